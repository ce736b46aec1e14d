"""Command-line entry point.

Subcommands: simulate, compare, sweep, closure-table, gronwall-check,
energy-audit. Exit codes: 0 success, 1 verdict failure, 2 configuration
error, 3 runtime/convergence error. CSV output goes to files under --out;
human-readable status goes to stdout and errors to stderr.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import closure, config, dynamics, energy, gronwall, iofmt, twin
from .errors import ConfigError, ConsistencyError, ConvergenceError, DomainError


def _load(args) -> config.RunConfig:
    text = ""
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
    if args.set:
        text = config.apply_overrides(text, args.set)
    return config.parse_config(text)


def _outdir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".writable"
        probe.touch()
        probe.unlink()
    except OSError as err:
        raise ConfigError(f"output directory {out} is not writable: {err}") from err
    return out


def _emit_fields(out: Path, state, tag: str) -> None:
    iofmt.write_field(out / f"{tag}_R.dat", state.grid, state.R, state.t, "R")
    iofmt.write_field(out / f"{tag}_Q.dat", state.grid, state.Q, state.t, "Q")
    iofmt.write_field(out / f"{tag}_m.dat", state.grid, state.m, state.t, "m")


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    traj = dynamics.run(config.build_initial_state(cfg), cfg.sim_params())
    if cfg.emit.diagnostics:
        iofmt.write_diagnostics_csv(out / "diagnostics.csv", traj)
    if cfg.emit.energy:
        audit = energy.audit_energy(traj)
        iofmt.write_energy_csv(
            out / "energy.csv",
            audit,
            kinetic=traj.diagnostics.kinetic,
            internal=traj.diagnostics.internal,
        )
    if cfg.emit.fields:
        _emit_fields(out, traj.initial, "initial")
        _emit_fields(out, traj.final, "final")
    print(
        f"simulate: {len(traj.dts)} steps to t={traj.final.t:g}, "
        f"outputs in {out}"
    )
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    p = cfg.perturbation
    result = twin.run_twin(
        config.build_initial_state(cfg),
        cfg.sim_params(),
        delta=p.delta,
        target=p.target,
        wavevector=p.wavevector,
        phase=p.phase,
    )
    if cfg.emit.comparison:
        iofmt.write_compare_csv(out / "compare.csv", result.diag)
    stability = twin.check_density_stability(result.diag)
    meanvel = twin.check_mean_velocity(result.weak, result.strong, result.diag)
    C = max(
        stability.fitted_C,
        twin.fit_gronwall_constant(result.diag, result.ref, cfg.sim_params()),
    )
    trace = twin.build_gronwall_trace(result.diag, result.ref, cfg.sim_params(), C=C)
    iofmt.write_trace_csv(out / "trace.csv", trace)
    conclusion = gronwall.check_conclusion(trace)
    print(f"density stability: fitted_C={stability.fitted_C:.6g} verdict={stability.verdict}")
    print(f"gronwall constant: C={C:.6g}")
    print(f"mean velocity identity: max residual={np.max(meanvel.residual):.3e} verdict={meanvel.verdict}")
    print(f"gronwall conclusion: max margin={conclusion.max_margin:.3e} verdict={conclusion.verdict}")
    ok = stability.verdict and meanvel.verdict and conclusion.verdict
    return 0 if ok else 1


def _sweep_worker(payload) -> tuple[float, float, float, float, bool]:
    text, delta = payload
    cfg = config.parse_config(text)
    p = cfg.perturbation
    result = twin.run_twin(
        config.build_initial_state(cfg),
        cfg.sim_params(),
        delta=delta,
        target=p.target,
        wavevector=p.wavevector,
        phase=p.phase,
    )
    stability = twin.check_density_stability(result.diag)
    sup = result.sup_distance
    ratio = sup / delta if delta != 0.0 else math.nan
    return delta, sup, ratio, stability.fitted_C, stability.verdict


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    try:
        deltas = [float(v) for v in args.deltas.split(",") if v.strip()]
    except ValueError as err:
        raise ConfigError(f"cannot parse --deltas {args.deltas!r}: {err}") from err
    if not deltas:
        raise ConfigError("--deltas must name at least one perturbation size")

    verdicts: list[bool] = []
    rows: list[twin.SweepRow] = []
    if args.jobs > 1:
        text = config.serialize_config(cfg)
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for delta, sup, ratio, fitted, verdict in pool.map(
                _sweep_worker, [(text, d) for d in deltas]
            ):
                rows.append(twin.SweepRow(delta, sup, ratio, fitted))
                verdicts.append(verdict)
    else:
        p = cfg.perturbation
        report = twin.stability_sweep(
            config.build_initial_state(cfg),
            cfg.sim_params(),
            deltas,
            target=p.target,
            wavevector=p.wavevector,
            phase=p.phase,
        )
        rows = report.rows
        verdicts = [
            twin.check_density_stability(r.diag).verdict for r in report.results
        ]
    iofmt.write_sweep_csv(out / "sweep.csv", twin.SweepReport(rows=rows, results=[]))
    for row in rows:
        print(
            f"delta={row.delta:g} sup_distance={row.sup_distance:.6e} "
            f"ratio={row.ratio:.6g} fitted_C={row.fitted_C:.6g}"
        )
    return 0 if all(verdicts) else 1


def cmd_closure_table(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    params = cfg.closure_params()
    r_values = np.linspace(args.r_min, args.r_max, args.r_count)
    q_values = np.linspace(args.q_min, args.q_max, args.q_count)
    rows = []
    for r in r_values:
        for q in q_values:
            point = closure.solve_Z(float(r), float(q), params)
            if point.Z > 0.0:
                dzr = closure.dZ_dR(point, params)
                dzq = closure.dZ_dQ(point, params)
            else:
                dzr = dzq = math.nan
            rows.append(
                (
                    point.R,
                    point.Q,
                    params.gamma_plus,
                    params.gamma_minus,
                    point.Z,
                    point.alpha,
                    closure.pressure(point.Z, params),
                    dzr,
                    dzq,
                    closure.closure_residual(point.R, point.Q, point.Z, params),
                )
            )
    iofmt.write_closure_table(out / "closure_table.csv", rows)
    print(f"closure-table: {len(rows)} rows in {out / 'closure_table.csv'}")
    return 0


def cmd_gronwall_check(args) -> int:
    trace = iofmt.read_trace_csv(args.trace)
    hypothesis = gronwall.check_hypothesis(trace)
    conclusion = gronwall.check_conclusion(trace)
    print(
        f"hypothesis: {'ok' if hypothesis.ok else 'violated'} "
        f"({hypothesis.violations.size} interval(s) flagged)"
    )
    print(
        f"conclusion: max margin={conclusion.max_margin:.6e} "
        f"verdict={conclusion.verdict}"
    )
    return 0 if (hypothesis.ok and conclusion.verdict) else 1


def cmd_energy_audit(args) -> int:
    out = _outdir(args)
    cols = iofmt.read_diagnostics_csv(args.diagnostics)
    if "energy" in cols and "dissipation" in cols:
        e, d = cols["energy"], cols["dissipation"]
        kin = cols.get("kinetic")
        inte = cols.get("internal")
    elif "kinetic" in cols and "internal" in cols:
        kin, inte = cols["kinetic"], cols["internal"]
        e = kin + inte
        d = cols["dissipation_rate"]
    else:
        raise ConfigError(
            f"{args.diagnostics}: need energy/dissipation or kinetic/internal columns"
        )
    audit = energy.audit_series(cols["t"], e, d)
    iofmt.write_energy_csv(out / "energy_audit.csv", audit, kinetic=kin, internal=inte)
    print(f"energy-audit: max defect={audit.max_defect:.6e}")
    if args.defect_tol is not None and audit.max_defect > args.defect_tol:
        return 1
    return 0


def _add_common(parser) -> None:
    parser.add_argument("--config", help="config file path (defaults to std1d)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--jobs", type=int, default=1, help="parallel runs for sweep")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twofluid",
        description="Two-fluid flow laboratory: simulation and stability diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trajectory")
    _add_common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("compare", help="twin experiment with verdicts")
    _add_common(p)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("sweep", help="perturbation-size stability sweep")
    _add_common(p)
    p.add_argument("--deltas", default="1e-2,1e-3,1e-4", help="comma-separated sizes")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("closure-table", help="tabulate the pressure closure")
    _add_common(p)
    p.add_argument("--r-min", type=float, default=0.0)
    p.add_argument("--r-max", type=float, default=10.0)
    p.add_argument("--r-count", type=int, default=11)
    p.add_argument("--q-min", type=float, default=0.0)
    p.add_argument("--q-max", type=float, default=10.0)
    p.add_argument("--q-count", type=int, default=11)
    p.set_defaults(fn=cmd_closure_table)

    p = sub.add_parser("gronwall-check", help="verify a trace CSV")
    _add_common(p)
    p.add_argument("--trace", required=True, help="trace CSV path")
    p.set_defaults(fn=cmd_gronwall_check)

    p = sub.add_parser("energy-audit", help="recompute defects from a diagnostics CSV")
    _add_common(p)
    p.add_argument("--diagnostics", required=True, help="diagnostics CSV path")
    p.add_argument("--defect-tol", type=float, default=None)
    p.set_defaults(fn=cmd_energy_audit)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except (ConvergenceError, ConsistencyError, DomainError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
