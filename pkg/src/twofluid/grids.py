"""Uniform periodic grids and the discrete calculus built on them.

All operators are 2nd-order centered differences with periodic wraparound,
which makes the summation-by-parts identity

    integrate(f * divergence(v)) == -integrate(dot(gradient(f), v))

exact up to roundoff. ``laplacian`` uses the compact nearest-neighbour
stencil and therefore differs from ``divergence(gradient(f))``, which is the
wide 2*dx stencil.

Scalar fields are arrays of shape ``grid.shape``; vector fields carry a
leading component axis ``(dim, *grid.shape)``. Storage is row-major, and
dumps flatten in C order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on the d-torus with period ``length`` per axis."""

    dim: int
    n: int
    length: float = 2.0 * math.pi

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2 != 0:
            raise DomainError(f"n must be even and at least 8, got {self.n}")
        if not (math.isfinite(self.length) and self.length > 0.0):
            raise DomainError(f"length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def npoints(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def volume(self) -> float:
        return self.length**self.dim

    def axis_coords(self) -> np.ndarray:
        """Grid point positions along one axis: j*dx for j = 0..n-1."""
        return np.arange(self.n) * self.dx

    def coordinates(self) -> np.ndarray:
        """Point coordinates, shape (dim, *shape)."""
        axes = np.meshgrid(*([self.axis_coords()] * self.dim), indexing="ij")
        return np.stack(axes)


@dataclass(frozen=True)
class ScalarField:
    """One value per grid point, shape ``grid.shape``."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise DomainError(
                f"scalar field shape {self.values.shape} does not match grid "
                f"{self.grid.shape}"
            )

    def validate_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise DomainError("scalar field contains non-finite values")


@dataclass(frozen=True)
class VectorField:
    """dim components per grid point, shape ``(dim, *grid.shape)``."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != (self.grid.dim, *self.grid.shape):
            raise DomainError(
                f"vector field shape {self.values.shape} does not match grid "
                f"({self.grid.dim}, *{self.grid.shape})"
            )

    def validate_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise DomainError("vector field contains non-finite values")


def _space_axis(grid: PeriodicGrid, values: np.ndarray, i: int) -> int:
    """Array axis corresponding to spatial direction i."""
    return values.ndim - grid.dim + i


def _centered(grid: PeriodicGrid, values: np.ndarray, i: int) -> np.ndarray:
    ax = _space_axis(grid, values, i)
    return (np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax)) / (
        2.0 * grid.dx
    )


def gradient(grid: PeriodicGrid, f: np.ndarray) -> np.ndarray:
    """Centered gradient of a scalar field, shape (dim, *shape)."""
    return np.stack([_centered(grid, f, i) for i in range(grid.dim)])


def divergence(grid: PeriodicGrid, v: np.ndarray) -> np.ndarray:
    """Centered divergence of a vector field, shape (*shape)."""
    out = _centered(grid, v[0], 0)
    for i in range(1, grid.dim):
        out += _centered(grid, v[i], i)
    return out


def vector_gradient(grid: PeriodicGrid, v: np.ndarray) -> np.ndarray:
    """Full Jacobian d_i v_j, shape (dim, dim, *shape)."""
    return np.stack([gradient(grid, v[j]) for j in range(grid.dim)], axis=1)


def laplacian(grid: PeriodicGrid, f: np.ndarray) -> np.ndarray:
    """Nearest-neighbour Laplacian; applied per component to vector fields."""
    out = np.zeros_like(f)
    for i in range(grid.dim):
        ax = _space_axis(grid, f, i)
        out += np.roll(f, -1, axis=ax) + np.roll(f, 1, axis=ax) - 2.0 * f
    return out / grid.dx**2


def grad_div(grid: PeriodicGrid, v: np.ndarray) -> np.ndarray:
    """gradient(divergence(v)), the wide-stencil composition."""
    return gradient(grid, divergence(grid, v))


def wide_laplacian(grid: PeriodicGrid, f: np.ndarray) -> np.ndarray:
    """divergence(gradient(f)), the wide 2*dx stencil.

    This is the energy-compatible companion of the centered gradient: summed
    against f it reproduces -integrate(|gradient(f)|^2) exactly. Applied per
    component to vector fields.
    """
    if f.ndim == grid.dim:
        return divergence(grid, gradient(grid, f))
    return np.stack([divergence(grid, gradient(grid, f[j])) for j in range(f.shape[0])])


def integrate(grid: PeriodicGrid, f: np.ndarray):
    """Cell-volume-weighted sum; vector fields integrate per component."""
    space = tuple(range(f.ndim - grid.dim, f.ndim))
    out = np.sum(f, axis=space) * grid.cell_volume
    return float(out) if np.ndim(out) == 0 else out


def pointwise_magnitude(grid: PeriodicGrid, values: np.ndarray) -> np.ndarray:
    """Euclidean magnitude over any leading component axes."""
    if values.ndim == grid.dim:
        return np.abs(values)
    flat = values.reshape(-1, *values.shape[values.ndim - grid.dim :])
    return np.sqrt(np.sum(flat * flat, axis=0))


def lp_norm(grid: PeriodicGrid, values: np.ndarray, p) -> float:
    """Discrete L^p norm; vectors and tensors use the pointwise magnitude."""
    mag = pointwise_magnitude(grid, values)
    if p == math.inf or (isinstance(p, str) and p == "inf"):
        return float(np.max(mag))
    p = float(p)
    if p < 1.0:
        raise DomainError(f"lp_norm requires p >= 1 or inf, got {p}")
    return float(integrate(grid, mag**p) ** (1.0 / p))


def weighted_l2(grid: PeriodicGrid, weight: np.ndarray, v: np.ndarray) -> float:
    """(integral of weight*|v|^2)**0.5; the weight must be nonnegative."""
    if np.any(weight < 0.0):
        raise DomainError("weighted_l2 requires a nonnegative weight")
    mag = pointwise_magnitude(grid, v)
    return float(math.sqrt(integrate(grid, weight * mag * mag)))
