import math

import numpy as np
import pytest

from twofluid import dynamics, grids, gronwall, twin
from twofluid.closure import ClosureParams
from twofluid.dynamics import SimParams, State
from twofluid.errors import ConfigError, DomainError
from twofluid.grids import PeriodicGrid


class TestPerturbState:
    def test_zero_delta_is_bit_identical(self, std1d_initial):
        out = twin.perturb_state(std1d_initial, 0.0)
        assert np.array_equal(out.R, std1d_initial.R)
        assert np.array_equal(out.m, std1d_initial.m)

    def test_velocity_target_leaves_densities_alone(self, std1d_initial):
        out = twin.perturb_state(std1d_initial, 1e-3, "velocity", wavevector=2)
        assert np.array_equal(out.R, std1d_initial.R)
        assert np.array_equal(out.Q, std1d_initial.Q)
        assert not np.array_equal(out.m, std1d_initial.m)

    def test_density_target_shifts_both_phases(self, std1d_initial):
        out = twin.perturb_state(std1d_initial, 1e-3, "densities", wavevector=2)
        g = std1d_initial.grid
        bump = 1e-3 * np.sin(2 * g.coordinates()[0])
        assert np.allclose(out.R - std1d_initial.R, bump, atol=1e-18)
        assert np.allclose(out.Q - std1d_initial.Q, bump, atol=1e-18)

    def test_nonpositive_density_rejected(self, std1d_initial):
        with pytest.raises(DomainError):
            twin.perturb_state(std1d_initial, 1.0, "densities")

    def test_unknown_target_rejected(self, std1d_initial):
        with pytest.raises(DomainError):
            twin.perturb_state(std1d_initial, 1e-3, "pressure")


class TestCompare:
    def test_identical_runs_give_zero_diagnostics(self, std1d_initial, std1d_params):
        result = twin.run_twin(std1d_initial, std1d_params, delta=0.0)
        d = result.diag
        for name in ("norm_frakR", "norm_calQ", "norm_wU", "norm_gradU", "norm_U6", "mean_U"):
            assert np.all(getattr(d, name) == 0.0), name
        assert result.sup_distance == 0.0

    def test_velocity_offset_norm_at_t0(self):
        # unit-volume grid so ||eps * const||_6 = eps * |const| exactly
        g = PeriodicGrid(1, 16, length=1.0)
        rho = np.ones(g.shape)
        params = SimParams(closure=ClosureParams(2.0, 2.0), mu=0.1, t_end=0.0)
        eps = 1e-4
        base = State(g, rho.copy(), rho.copy(), np.zeros((1, *g.shape)), 0.0)
        shifted = State(g, rho.copy(), rho.copy(), np.full((1, *g.shape), 2.0 * eps), 0.0)
        tA = dynamics.run(shifted, params)
        tB = dynamics.run(base, params)
        d = twin.compare(tA, tB)
        assert d.norm_frakR[0] == 0.0
        assert d.norm_U6[0] == pytest.approx(eps, rel=1e-13)
        assert d.mean_U[0] == pytest.approx(eps, rel=1e-13)

    def test_mismatched_grids_rejected(self, std1d_params):
        g1, g2 = PeriodicGrid(1, 16), PeriodicGrid(1, 32)
        p = SimParams(closure=ClosureParams(1.5, 3.0), mu=0.1, t_end=0.0)
        mk = lambda g: dynamics.run(
            State(g, np.ones(g.shape), np.ones(g.shape), np.zeros((1, *g.shape)), 0.0), p
        )
        with pytest.raises(ConfigError):
            twin.compare(mk(g1), mk(g2))

    def test_m_bound_is_running_max(self, twin128):
        assert np.all(np.diff(twin128.diag.M_bound) >= 0.0)
        assert twin128.diag.M_bound[0] >= 1.2 - 1e-12  # sup of 1 + 0.2 sin x


class TestDensityStability:
    def test_identical_runs_fit_zero(self, std1d_initial, std1d_params):
        result = twin.run_twin(std1d_initial, std1d_params, delta=0.0)
        report = twin.check_density_stability(result.diag)
        assert report.fitted_C == 0.0
        assert report.verdict

    def test_std1d_constant_is_finite_and_stable(self, twin128):
        report = twin.check_density_stability(twin128.diag)
        assert np.all(np.isfinite(report.C_of_t))
        assert report.verdict
        assert report.fitted_C <= 2.0 * report.median_C

    def test_requires_matched_initial_densities(self, std1d_initial, std1d_params):
        result = twin.run_twin(std1d_initial, std1d_params, delta=1e-3, target="densities")
        with pytest.raises(DomainError):
            twin.check_density_stability(result.diag)

    def test_constant_stable_across_perturbation_sizes(self, sweep128):
        fits = [row.fitted_C for row in sweep128.rows]
        assert max(fits) / min(fits) <= 2.0


class TestMeanVelocity:
    def test_identity_on_twin(self, twin128):
        report = twin.check_mean_velocity(twin128.weak, twin128.strong, twin128.diag)
        assert report.verdict
        assert np.all(report.residual <= 1e-12 * np.maximum(report.scale, 1e-300))
        assert np.isfinite(report.fitted_C)

    def test_constant_reference_velocity_zeroes_rhs(self):
        # u~ constant makes (u~ - mean) vanish, so both sides reduce to the
        # weak-run momentum integral; with equal momenta both sides are 0
        g = PeriodicGrid(1, 16)
        x = g.coordinates()[0]
        params = SimParams(closure=ClosureParams(2.0, 2.0), mu=0.1, t_end=0.0)
        bump = 0.1 * np.sin(x)
        R = np.ones(g.shape)
        u0 = 0.3
        strong = State(g, R + bump, R - bump, (2 * R) * u0 * np.ones((1, *g.shape)), 0.0)
        weak = State(g, R - bump, R + bump, (2 * R) * u0 * np.ones((1, *g.shape)), 0.0)
        tW = dynamics.run(weak, params)
        tS = dynamics.run(strong, params)
        d = twin.compare(tW, tS)
        report = twin.check_mean_velocity(tW, tS, d)
        assert report.verdict
        assert np.all(report.residual <= 1e-14)

    def test_mass_mismatch_is_precondition_error(self, std1d_initial, std1d_params):
        other = std1d_initial.copy()
        other.R = other.R * 1.01
        t0 = dynamics.run(std1d_initial, SimParams(closure=std1d_params.closure, mu=0.1, t_end=0.0))
        t1 = dynamics.run(other, SimParams(closure=std1d_params.closure, mu=0.1, t_end=0.0))
        d = twin.compare(t1, t0)
        with pytest.raises(DomainError):
            twin.check_mean_velocity(t1, t0, d)


class TestTransportRates:
    def test_zero_twin_fits_zero(self, std1d_initial, std1d_params):
        result = twin.run_twin(std1d_initial, std1d_params, delta=0.0)
        rep_R, rep_Q = twin.check_transport_rates(result.diag, result.ref)
        assert np.all(rep_R.lhs == 0.0)
        assert rep_R.fitted_C == 0.0
        assert rep_Q.fitted_C == 0.0

    def test_std1d_rates_are_bounded(self, twin128):
        rep_R, rep_Q = twin.check_transport_rates(twin128.diag, twin128.ref)
        assert np.isfinite(rep_R.fitted_C)
        assert np.isfinite(rep_Q.fitted_C)
        # the one-sided estimate must actually dominate somewhere reasonable
        assert rep_R.fitted_C <= 10.0
        assert rep_Q.fitted_C <= 10.0

    def test_frozen_velocity_transport_constant_stable_under_dt(self):
        # difference transport with U = 0: d/dt ||frakR|| <= C ||grad u~||_inf ||frakR||
        g = PeriodicGrid(1, 128)
        x = g.axis_coords()
        u_tilde = (0.3 + 0.1 * np.sin(x))[None, :]
        grad_inf = grids.lp_norm(g, grids.vector_gradient(g, u_tilde), math.inf)
        frakR0 = 0.01 * np.sin(2 * x)

        def fitted(steps):
            dt = 0.5 / steps
            r = frakR0.copy()
            norms = [grids.lp_norm(g, r, 2)]
            for _ in range(steps):
                k1 = -grids.divergence(g, r * u_tilde)
                r1 = r + dt * k1
                k2 = -grids.divergence(g, r1 * u_tilde)
                r = 0.5 * r + 0.5 * (r1 + dt * k2)
                norms.append(grids.lp_norm(g, r, 2))
            norms = np.asarray(norms)
            t = dt * np.arange(steps + 1)
            dnorm = np.gradient(norms, t)
            return float(np.max(dnorm / (grad_inf * norms)))

        c1, c2 = fitted(400), fitted(800)
        assert np.isfinite(c1) and np.isfinite(c2)
        assert abs(c2 - c1) <= 0.05 * max(abs(c1), 1e-30)


class TestGronwallPipeline:
    def test_identical_runs_trace_is_trivial(self, std1d_initial, std1d_params):
        result = twin.run_twin(std1d_initial, std1d_params, delta=0.0)
        trace = twin.build_gronwall_trace(result.diag, result.ref, std1d_params)
        assert np.all(trace.f == 0.0)
        assert np.all(trace.gprime == 0.0)
        report = gronwall.check_conclusion(trace)
        assert report.verdict
        assert report.max_margin == 0.0

    def test_zero_constant_flags_hypothesis(self, twin128, std1d_params):
        trace = twin.build_gronwall_trace(twin128.diag, twin128.ref, std1d_params, C=0.0)
        report = gronwall.check_hypothesis(trace)
        assert not report.ok

    def test_fitted_constant_passes_conclusion(self, twin128, std1d_params):
        C = twin.fit_gronwall_constant(twin128.diag, twin128.ref, std1d_params)
        assert np.isfinite(C) and C > 0.0
        trace = twin.build_gronwall_trace(twin128.diag, twin128.ref, std1d_params, C=C)
        report = gronwall.check_conclusion(trace)
        assert report.hypothesis.ok
        assert report.verdict

    def test_mu_weighted_form_also_passes(self, twin128, std1d_params):
        C = twin.fit_gronwall_constant(
            twin128.diag, twin128.ref, std1d_params, mu_weighted=True
        )
        trace = twin.build_gronwall_trace(
            twin128.diag, twin128.ref, std1d_params, C=C, mu_weighted=True
        )
        report = gronwall.check_conclusion(trace)
        assert report.verdict

    def test_negative_constant_rejected(self, twin128, std1d_params):
        with pytest.raises(DomainError):
            twin.build_gronwall_trace(twin128.diag, twin128.ref, std1d_params, C=-1.0)


class TestHorizonMonotonicity:
    def test_doubling_horizon_does_not_decrease_fitted_constant(self):
        # the fitted constant is a running supremum, so a longer window can
        # only enlarge it (up to the end-of-run step clamp)
        g = PeriodicGrid(1, 64)
        x = g.axis_coords()
        R = 1 + 0.2 * np.sin(x)
        Q = 1 + 0.2 * np.cos(x)
        u = (0.1 * np.sin(x))[None, :]
        initial = State(g, R, Q, (R + Q) * u, 0.0)

        fits = []
        for t_end in (0.25, 0.5):
            params = SimParams(closure=ClosureParams(1.5, 3.0), mu=0.1, t_end=t_end)
            result = twin.run_twin(initial, params, delta=1e-3)
            fits.append(twin.check_density_stability(result.diag).fitted_C)
        assert fits[1] >= fits[0] * (1.0 - 1e-9)


class TestRestrictedReference:
    def test_restriction_subsamples_exactly(self, std1d_initial):
        coarse = twin.restrict_state(std1d_initial, 4)
        assert coarse.grid.n == 32
        assert np.array_equal(coarse.R, std1d_initial.R[::4])
        with pytest.raises(DomainError):
            twin.restrict_state(std1d_initial, 3)

    def test_fine_reference_agrees_at_final_time(self, std1d_cfg, traj128):
        # a restricted higher-resolution run is a valid reference at t_end:
        # the coarse run must approach it at the discretization order
        from twofluid import config as cfgmod

        errs = []
        for n in (128, 256):
            cfg = cfgmod.parse_config(f"[grid]\nn = {2 * n}\n")
            fine = dynamics.run(cfgmod.build_initial_state(cfg), cfg.sim_params())
            restricted = twin.restrict_state(fine.final, 2)
            coarse_cfg = cfgmod.parse_config(f"[grid]\nn = {n}\n")
            coarse = dynamics.run(
                cfgmod.build_initial_state(coarse_cfg), coarse_cfg.sim_params()
            )
            assert restricted.t == coarse.final.t == 0.5
            errs.append(
                grids.lp_norm(coarse_cfg.grid, coarse.final.R - restricted.R, 2)
                + grids.lp_norm(coarse_cfg.grid, coarse.final.Q - restricted.Q, 2)
            )
        assert math.log2(errs[0] / errs[1]) >= 1.5


class TestSweep:
    def test_small_sweep_ratios_and_zero_delta(self):
        # coarse, short-horizon sweep: the scaling law still shows
        g = PeriodicGrid(1, 32)
        x = g.axis_coords()
        R = 1 + 0.2 * np.sin(x)
        Q = 1 + 0.2 * np.cos(x)
        u = (0.1 * np.sin(x))[None, :]
        initial = State(g, R, Q, (R + Q) * u, 0.0)
        params = SimParams(closure=ClosureParams(1.5, 3.0), mu=0.1, t_end=0.1)
        report = twin.stability_sweep(initial, params, deltas=(0.0, 1e-2, 1e-3))
        assert report.rows[0].sup_distance == 0.0
        assert math.isnan(report.rows[0].ratio)
        r1, r2 = report.rows[1].ratio, report.rows[2].ratio
        assert max(r1, r2) / min(r1, r2) <= 2.0
