"""Conservative time integration of the two-fluid system.

State variables are the conserved (R, Q, m) with m = (R+Q)u, advanced by a
two-stage strong-stability-preserving Runge-Kutta (Heun) step. All flux
divergences use the centered conservative form, so the discrete masses and
total momentum telescope exactly on the periodic grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import closure, energy, grids
from .closure import ClosureParams
from .errors import ConsistencyError, ConvergenceError, DomainError
from .grids import PeriodicGrid

DT_MIN = 1e-12


@dataclass(frozen=True)
class SimParams:
    """Physical and numerical parameters of one run."""

    closure: ClosureParams
    mu: float
    lam: float = 0.0
    cfl: float = 0.4
    density_floor: float = 1e-10
    t_end: float = 0.5
    output_interval: float = 0.0  # 0 means a snapshot every step
    dt_min: float = DT_MIN

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise DomainError(f"mu must be positive, got {self.mu}")
        if not (math.isfinite(self.lam) and self.mu + self.lam >= 0.0):
            raise DomainError(f"mu + lambda must be nonnegative, got {self.mu + self.lam}")
        if not (0.0 < self.cfl <= 1.0):
            raise DomainError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.density_floor < 0.0:
            raise DomainError("density_floor must be nonnegative")
        if not (math.isfinite(self.t_end) and self.t_end >= 0.0):
            raise DomainError(f"t_end must be nonnegative, got {self.t_end}")
        if self.output_interval < 0.0:
            raise DomainError("output_interval must be nonnegative")


@dataclass
class State:
    """Solution snapshot in conserved variables."""

    grid: PeriodicGrid
    R: np.ndarray
    Q: np.ndarray
    m: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.R.shape != self.grid.shape or self.Q.shape != self.grid.shape:
            raise DomainError("density shape does not match grid")
        if self.m.shape != (self.grid.dim, *self.grid.shape):
            raise DomainError("momentum shape does not match grid")

    def velocity(self, floor: float) -> tuple[np.ndarray, int]:
        """u = m / (R+Q) with the density floor; returns (u, floor hits)."""
        rho = self.R + self.Q
        hits = int(np.count_nonzero(rho < floor))
        return self.m / np.maximum(rho, floor), hits

    def copy(self) -> "State":
        return State(self.grid, self.R.copy(), self.Q.copy(), self.m.copy(), self.t)


@dataclass
class Tendencies:
    """Time derivatives of (R, Q, m) plus reusable byproducts."""

    dR: np.ndarray
    dQ: np.ndarray
    dm: np.ndarray
    Z: np.ndarray
    alpha: np.ndarray
    u: np.ndarray
    floor_hits: int


SourceFn = Callable[[State], tuple[np.ndarray, np.ndarray, np.ndarray]]


def rhs(state: State, params: SimParams, source: SourceFn | None = None) -> Tendencies:
    """Conservative right-hand side of the two-fluid system.

    dR/dt = -div(R u), dQ/dt = -div(Q u) and
    dm/dt = -div(m x u) - grad p(Z) + mu div(grad u) + (mu+lam) grad(div u),
    with Z from the pointwise closure solve and p = Z**gamma_plus.

    The viscous terms use the wide div(grad) composition rather than the
    compact Laplacian: paired with the centered stencils of the energy
    audit, the discrete viscous energy exchange is then exact, so the
    audited defect measures only advection, pressure and time-integration
    errors.
    """
    g = state.grid
    u, hits = state.velocity(params.density_floor)
    Z, alpha = closure.solve_Z_field(state.R, state.Q, params.closure)
    p = closure.pressure(Z, params.closure)

    dR = -grids.divergence(g, state.R * u)
    dQ = -grids.divergence(g, state.Q * u)
    adv = np.stack([grids.divergence(g, state.m[i] * u) for i in range(g.dim)])
    dm = (
        -adv
        - grids.gradient(g, p)
        + params.mu * grids.wide_laplacian(g, u)
        + (params.mu + params.lam) * grids.grad_div(g, u)
    )
    if source is not None:
        sR, sQ, sm = source(state)
        dR = dR + sR
        dQ = dQ + sQ
        dm = dm + sm
    for name, arr in (("dR", dR), ("dQ", dQ), ("dm", dm)):
        if not np.all(np.isfinite(arr)):
            loc = tuple(int(k) for k in np.argwhere(~np.isfinite(arr))[0])
            raise ConsistencyError(
                f"non-finite tendency {name} at index {loc}, t={state.t}"
            )
    return Tendencies(dR, dQ, dm, Z, alpha, u, hits)


def stable_dt(state: State, params: SimParams) -> float:
    """Explicit-scheme time step limit.

    dt = cfl * min(dx/(max|u| + c_max), dx^2/(2 dim nu_max)) with the
    sound-speed proxy c_max = max sqrt(gamma_plus Z^(gamma_plus-1)
    max(|dZ/dR|, |dZ/dQ|)) taken pointwise over the grid.
    """
    g = state.grid
    u, _ = state.velocity(params.density_floor)
    umax = float(np.max(grids.pointwise_magnitude(g, u)))

    Z, _ = closure.solve_Z_field(state.R, state.Q, params.closure)
    pos = Z > 0.0
    c_max = 0.0
    if pos.any():
        zp = Z[pos]
        dzr, dzq = closure.derivative_arrays(state.R[pos], zp, params.closure.gamma)
        stiff = (
            params.closure.gamma_plus
            * np.power(zp, params.closure.gamma_plus - 1.0)
            * np.maximum(np.abs(dzr), np.abs(dzq))
        )
        c_max = float(np.sqrt(np.max(stiff)))

    rho_min = float(np.min(state.R + state.Q))
    nu_max = (2.0 * params.mu + params.lam) / max(params.density_floor, rho_min)
    advective = g.dx / (umax + c_max) if umax + c_max > 0.0 else math.inf
    viscous = g.dx**2 / (2.0 * g.dim * nu_max) if nu_max > 0.0 else math.inf
    dt = params.cfl * min(advective, viscous)
    if dt < params.dt_min:
        raise ConvergenceError(f"vanishing time step: dt={dt} below {params.dt_min}")
    return dt


def step(
    state: State, params: SimParams, dt: float, source: SourceFn | None = None
) -> State:
    """One SSP-RK2 (Heun) update; the caller guarantees dt <= stable_dt."""
    g = state.grid
    k1 = rhs(state, params, source)
    s1 = State(
        g,
        state.R + dt * k1.dR,
        state.Q + dt * k1.dQ,
        state.m + dt * k1.dm,
        state.t + dt,
    )
    k2 = rhs(s1, params, source)
    return State(
        g,
        0.5 * state.R + 0.5 * (s1.R + dt * k2.dR),
        0.5 * state.Q + 0.5 * (s1.Q + dt * k2.dQ),
        0.5 * state.m + 0.5 * (s1.m + dt * k2.dm),
        state.t + dt,
    )


@dataclass
class DiagnosticSeries:
    """Per-step scalar diagnostics; one row per recorded state.

    ``kinetic`` and ``internal`` are kept for the energy emission but are
    not part of the diagnostics CSV contract (``energy`` is their sum).
    """

    t: np.ndarray
    dt: np.ndarray
    mass_R: np.ndarray
    mass_Q: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    min_R: np.ndarray
    min_Q: np.ndarray
    max_u: np.ndarray
    floor_hits: np.ndarray
    kinetic: np.ndarray
    internal: np.ndarray

    COLUMNS = (
        "t",
        "dt",
        "mass_R",
        "mass_Q",
        "energy",
        "dissipation",
        "min_R",
        "min_Q",
        "max_u",
        "floor_hits",
    )


@dataclass
class Trajectory:
    """Everything one run produced, kept in memory for diagnostics."""

    grid: PeriodicGrid
    params: SimParams
    diagnostics: DiagnosticSeries
    snapshots: list[State]
    snapshot_times: np.ndarray
    dts: np.ndarray
    total_floor_hits: int
    negative_density_steps: int

    @property
    def initial(self) -> State:
        return self.snapshots[0]

    @property
    def final(self) -> State:
        return self.snapshots[-1]


ProbeFn = Callable[[int, State], State | None]


@dataclass
class _DiagRow:
    t: float
    mass_R: float
    mass_Q: float
    kinetic: float
    internal: float
    dissipation: float
    min_R: float
    min_Q: float
    max_u: float
    floor_hits: int

    @property
    def energy(self) -> float:
        return self.kinetic + self.internal


def _diag_row(state: State, params: SimParams) -> _DiagRow:
    g = state.grid
    u, hits = state.velocity(params.density_floor)
    report = energy.total_energy(state, params)
    return _DiagRow(
        t=state.t,
        mass_R=grids.integrate(g, state.R),
        mass_Q=grids.integrate(g, state.Q),
        kinetic=report.kinetic,
        internal=report.internal,
        dissipation=report.dissipation_rate,
        min_R=float(np.min(state.R)),
        min_Q=float(np.min(state.Q)),
        max_u=float(np.max(grids.pointwise_magnitude(g, u))),
        floor_hits=hits,
    )


def run(
    initial: State,
    params: SimParams,
    *,
    dt_schedule: Sequence[float] | None = None,
    source: SourceFn | None = None,
    probes: Sequence[ProbeFn] | None = None,
) -> Trajectory:
    """Advance the state to t_end, collecting diagnostics and snapshots.

    ``dt_schedule`` imposes an explicit step sequence (used to force twin
    runs onto a shared schedule); otherwise each step takes the stability
    limit clamped to land exactly on t_end. Time accumulation snaps onto
    t_end through the same code path either way, so replaying a recorded
    schedule reproduces the recorded sample times bit for bit.

    ``probes`` are callables ``(step_index, state) -> State | None`` applied
    after every step; a returned state replaces the current one (experiment
    fixtures use this to inject controlled perturbations mid-run).

    Identical inputs produce bit-identical trajectories. The floor-hit count
    reflects the velocity reconstruction of each recorded state.
    """
    eps_t = max(params.dt_min, 4.0 * np.finfo(float).eps * params.t_end)
    state = initial.copy()
    rows = [_diag_row(state, params)]
    snapshots = [state.copy()]
    snapshot_times = [state.t]
    dts: list[float] = []
    next_output = state.t + params.output_interval

    k = 0
    while True:
        remaining = params.t_end - state.t
        if remaining <= eps_t:
            break
        if dt_schedule is not None:
            if k >= len(dt_schedule):
                break
            dt = float(dt_schedule[k])
        else:
            dt = min(stable_dt(state, params), remaining)
        state = step(state, params, dt, source)
        if abs(params.t_end - state.t) <= eps_t:
            state.t = params.t_end
        k += 1
        if probes:
            for probe in probes:
                replacement = probe(k, state)
                if replacement is not None:
                    state = replacement
        dts.append(dt)
        rows.append(_diag_row(state, params))
        due = params.output_interval == 0.0 or state.t >= next_output - 1e-12
        if due:
            snapshots.append(state.copy())
            snapshot_times.append(state.t)
            while params.output_interval > 0.0 and next_output <= state.t + 1e-12:
                next_output += params.output_interval

    if snapshot_times[-1] != state.t:
        snapshots.append(state.copy())
        snapshot_times.append(state.t)

    diag = DiagnosticSeries(
        t=np.asarray([r.t for r in rows]),
        dt=np.asarray(dts + [0.0]),
        mass_R=np.asarray([r.mass_R for r in rows]),
        mass_Q=np.asarray([r.mass_Q for r in rows]),
        energy=np.asarray([r.energy for r in rows]),
        dissipation=np.asarray([r.dissipation for r in rows]),
        min_R=np.asarray([r.min_R for r in rows]),
        min_Q=np.asarray([r.min_Q for r in rows]),
        max_u=np.asarray([r.max_u for r in rows]),
        floor_hits=np.asarray([r.floor_hits for r in rows], dtype=int),
        kinetic=np.asarray([r.kinetic for r in rows]),
        internal=np.asarray([r.internal for r in rows]),
    )
    return Trajectory(
        grid=initial.grid,
        params=params,
        diagnostics=diag,
        snapshots=snapshots,
        snapshot_times=np.asarray(snapshot_times),
        dts=np.asarray(dts),
        total_floor_hits=int(diag.floor_hits.sum()),
        negative_density_steps=int(
            np.count_nonzero((diag.min_R < 0.0) | (diag.min_Q < 0.0))
        ),
    )
