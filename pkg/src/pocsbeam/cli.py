"""Command-line harness: solve single instances, estimate power optima,
and run seeded parameter sweeps that emit analysis-ready CSVs.

Exit codes are a stable scripting contract: 0 success, 2 bad input,
3 solver hit the iteration cap, 4 oracle estimate unreliable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio
from .constraints import ProblemInstance, residuals, prepare
from .scenario import derive_seed, generate_instance, min_scaled_sinr, scale_factor
from .solve import (
    OracleConfig,
    SolverConfig,
    estimate_sdr_optimum,
    extract_beamformer,
    pocs_solve,
    spocs_solve,
)

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_ITERATION_CAP = 3
EXIT_UNRELIABLE_ORACLE = 4


def _parse_cap(value: str) -> float:
    if value.lower() in ("inf", "infinity"):
        return math.inf
    cap = float(value)
    if cap <= 0:
        raise argparse.ArgumentTypeError("power cap must be positive or 'inf'")
    return cap


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", metavar="FILE", help="load instance JSON instead of generating")
    p.add_argument("--N", type=int, default=8, help="antenna count (default 8)")
    p.add_argument("--K", type=int, default=6, help="user count (default 6)")
    p.add_argument("--M", type=int, default=2, help="group count (default 2)")
    p.add_argument("--gamma-db", type=float, default=0.0, help="SINR target in dB (default 0)")
    p.add_argument("--sigma2", type=float, default=1.0, help="noise power (default 1)")
    p.add_argument("--p", type=_parse_cap, default=math.inf,
                   help="per-antenna power cap, number or 'inf' (default inf)")
    p.add_argument("--seed", type=int, default=0, help="instance seed (default 0)")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = SolverConfig()
    p.add_argument("--a", type=float, default=d.a, help="perturbation step base (default %(default)s)")
    p.add_argument("--b", type=float, default=d.b, help="perturbation scale base (default %(default)s)")
    p.add_argument("--eps", type=float, default=d.eps, help="relative-step tolerance (default %(default)s)")
    p.add_argument("--n-max", type=int, default=d.n_max, help="iteration cap (default %(default)s)")
    p.add_argument("--mu-sinr", type=float, default=d.mu_sinr,
                   help="relaxation for the SINR half-spaces (default %(default)s)")
    p.add_argument("--mu-power", type=float, default=d.mu_power,
                   help="relaxation for the power caps (default %(default)s)")
    p.add_argument("--mu-psd", type=float, default=d.mu_psd,
                   help="relaxation for the PSD cone (default %(default)s)")
    p.add_argument("--trace-every", type=int, default=d.record_trace_every,
                   help="trace sampling stride (default %(default)s)")


def _add_oracle_flags(p: argparse.ArgumentParser) -> None:
    d = OracleConfig()
    p.add_argument("--step-scale", type=float, default=d.step_scale,
                   help="oracle descent step scale (default %(default)s)")
    p.add_argument("--oracle-budget", type=int, default=d.n_max,
                   help="oracle iteration cap (default %(default)s)")
    p.add_argument("--stab-rtol", type=float, default=d.stab_rtol,
                   help="oracle stabilization tolerance (default %(default)s)")


def _instance_from_args(args) -> tuple[ProblemInstance, int, float]:
    """Returns (instance, seed, gamma_db); seed is -1 for file-loaded instances."""
    if args.instance:
        inst, seed = fileio.load_instance(args.instance)
        gamma_db = 10.0 * math.log10(float(inst.sinr_target[0]))
        return inst, seed, gamma_db
    gamma = 10.0 ** (args.gamma_db / 10.0)
    inst = generate_instance(args.N, args.K, args.M, gamma, args.sigma2, args.p, args.seed)
    return inst, args.seed, args.gamma_db


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        mu_sinr=args.mu_sinr,
        mu_power=args.mu_power,
        mu_psd=args.mu_psd,
        a=args.a,
        b=args.b,
        eps=args.eps,
        n_max=args.n_max,
        record_trace_every=args.trace_every,
    )


def _oracle_config(args) -> OracleConfig:
    return OracleConfig(
        step_scale=args.step_scale,
        n_max=args.oracle_budget,
        stab_rtol=getattr(args, "stab_rtol", OracleConfig().stab_rtol),
    )


def _evaluate(inst: ProblemInstance, w: np.ndarray, p_sdr: float | None):
    """(sinr_min_rho_db, total_power, rho); SINR cells empty without a usable p_sdr."""
    total = float(np.sum(np.abs(w) ** 2))
    if p_sdr is None or total == 0:
        return None, total, None
    rho = scale_factor(w, inst, p_sdr)
    sinr = min_scaled_sinr(w, inst, p_sdr)
    sinr_db = 10.0 * math.log10(sinr) if sinr > 0 else -math.inf
    return sinr_db, total, rho


def _run_dir(parent: Path, seed: int) -> Path:
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    base = parent / f"{stamp}-{seed}"
    path = base
    suffix = 1
    while path.exists():
        path = Path(f"{base}-{suffix}")
        suffix += 1
    path.mkdir(parents=True)
    return path


def cmd_solve(args) -> int:
    inst, seed, gamma_db = _instance_from_args(args)
    config = _solver_config(args)
    solver = spocs_solve if args.solver == "spocs" else pocs_solve

    t0 = time.perf_counter_ns()
    x, trace = solver(inst, config)
    solve_ns = time.perf_counter_ns() - t0
    w = extract_beamformer(x)

    if args.p_sdr is not None:
        p_sdr, p_sdr_usable = args.p_sdr, True
    else:
        est = estimate_sdr_optimum(inst, _oracle_config(args))
        p_sdr, p_sdr_usable = est.value, est.reliable

    sinr_db, total, rho = _evaluate(inst, w, p_sdr if p_sdr_usable else None)

    out = _run_dir(Path(args.out_dir), seed)
    fileio.save_instance(out / "instance.json", inst, seed)
    fileio.save_beamformer(out / "beamformer.json", w)
    fileio.write_trace_csv(out / "trace.csv", trace)
    fileio.write_csv(
        out / "eval.csv",
        fileio.EVAL_HEADER,
        [(seed, inst.n_antennas, inst.n_users, inst.n_groups, gamma_db,
          sinr_db, total, rho, p_sdr, trace.iterations, solve_ns)],
    )

    final = residuals(x, prepare(inst))
    print(f"run directory: {out}")
    print(f"terminated by {trace.terminated_by} after {trace.iterations} iterations, "
          f"max constraint residual {final.max_constraint:.3e}")
    if sinr_db is not None:
        print(f"min scaled SINR {sinr_db:.4f} dB at total power {total:.6f} "
              f"(power optimum estimate {p_sdr:.6f})")
    else:
        print("power optimum estimate unreliable; scaled SINR not reported")

    if trace.terminated_by != "tolerance":
        return EXIT_ITERATION_CAP
    if not p_sdr_usable:
        return EXIT_UNRELIABLE_ORACLE
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst, _, _ = _instance_from_args(args)
    est = estimate_sdr_optimum(inst, _oracle_config(args))
    doc = {
        "p_sdr": est.value,
        "upper": est.upper,
        "gap": est.gap if math.isfinite(est.gap) else None,
        "certified": est.certified,
        "reliable": est.reliable,
        "stabilized": est.stabilized,
        "max_residual": est.max_residual,
        "iterations": est.iterations,
        "history": [list(row) for row in est.history],
    }
    text = json.dumps(doc, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK if est.reliable else EXIT_UNRELIABLE_ORACLE


def _sweep_task(task) -> tuple:
    """One (grid value, trial) run; returns a full aggregate-CSV row."""
    (axis, value, seed, base, solver_cfg, oracle_cfg) = task
    n, k, m, gamma_db, sigma2, cap = base
    if axis == "N":
        n = int(value)
    elif axis == "K":
        k = int(value)
    else:
        gamma_db = float(value)
    try:
        gamma = 10.0 ** (gamma_db / 10.0)
        inst = generate_instance(n, k, m, gamma, sigma2, cap, seed)
        t0 = time.perf_counter_ns()
        x, trace = spocs_solve(inst, solver_cfg)
        solve_ns = time.perf_counter_ns() - t0
        w = extract_beamformer(x)
        est = estimate_sdr_optimum(inst, oracle_cfg)
        sinr_db, total, rho = _evaluate(inst, w, est.value if est.reliable else None)
        status = "ok"
        if trace.terminated_by != "tolerance":
            status = "iteration-cap"
        elif not est.reliable:
            status = "unreliable-oracle"
        return (axis, value, "run", seed, n, k, m, gamma_db,
                sinr_db, total, rho, est.value, trace.iterations, solve_ns, status)
    except Exception as e:  # partial failures stay one row, sweep continues
        return (axis, value, "run", seed, n, k, m, gamma_db,
                None, None, None, None, None, None, f"error: {e}")


def cmd_sweep(args) -> int:
    try:
        raw = [v for v in args.grid.split(",") if v.strip()]
        grid = [float(v) for v in raw]
    except ValueError:
        print(f"error: cannot parse grid {args.grid!r}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if not grid or args.trials < 1:
        print("error: grid must be nonempty and trials >= 1", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.axis in ("N", "K") and any(v != int(v) for v in grid):
        print(f"error: {args.axis} grid values must be integers", file=sys.stderr)
        return EXIT_BAD_INPUT

    base = (args.N, args.K, args.M, args.gamma_db, args.sigma2, args.p)
    solver_cfg = _solver_config(args)
    oracle_cfg = _oracle_config(args)
    tasks = []
    for gi, value in enumerate(grid):
        for t in range(args.trials):
            seed = derive_seed(args.seed, gi * args.trials + t)
            tasks.append((args.axis, value, seed, base, solver_cfg, oracle_cfg))

    jobs = args.jobs if args.jobs > 0 else (os.cpu_count() or 1)
    jobs = min(jobs, len(tasks))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]

    # Deterministic order regardless of scheduling: grid value, then seed.
    rows.sort(key=lambda r: (r[1], r[3]))

    out_rows = []
    for value in grid:
        point = [r for r in rows if r[1] == value]
        out_rows.extend(point)
        sinrs = [r[8] for r in point if r[8] is not None]
        for kind, q in (("q25", 25), ("q50", 50), ("q75", 75), ("q100", 100)):
            cell = float(np.percentile(sinrs, q)) if sinrs else None
            out_rows.append((args.axis, value, kind, None, None, None, None, None,
                             cell, None, None, None, None, None,
                             f"{len(sinrs)}/{len(point)} runs"))

    fileio.write_csv(args.out, fileio.SWEEP_HEADER, out_rows)
    print(f"wrote {args.out} ({len(out_rows)} rows)")

    statuses = {r[14] for r in rows}
    if any(s.startswith("error") or s == "iteration-cap" for s in statuses):
        return EXIT_ITERATION_CAP
    if "unreliable-oracle" in statuses:
        return EXIT_UNRELIABLE_ORACLE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pocsbeam",
        description="QoS-constrained multicast beamforming via superiorized projections",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one instance and write run files")
    _add_instance_flags(ps)
    _add_config_flags(ps)
    _add_oracle_flags(ps)
    ps.add_argument("--solver", choices=("spocs", "pocs"), default="spocs",
                    help="iteration to run (default spocs)")
    ps.add_argument("--p-sdr", type=float, default=None,
                    help="externally supplied power optimum (skips the oracle)")
    ps.add_argument("--out-dir", default="runs", help="parent of run directories")
    ps.set_defaults(func=cmd_solve)

    po = sub.add_parser("oracle", help="estimate the relaxed power optimum")
    _add_instance_flags(po)
    _add_oracle_flags(po)
    po.add_argument("--out", default=None, help="optional JSON output path")
    po.set_defaults(func=cmd_oracle)

    pw = sub.add_parser("sweep", help="seeded grid sweep emitting an aggregate CSV")
    _add_instance_flags(pw)
    _add_config_flags(pw)
    _add_oracle_flags(pw)
    pw.add_argument("--axis", choices=("N", "K", "gamma"), required=True,
                    help="swept parameter; gamma grids are in dB")
    pw.add_argument("--grid", required=True, help="comma-separated grid values")
    pw.add_argument("--trials", type=int, default=20, help="runs per grid point")
    pw.add_argument("--jobs", type=int, default=0,
                    help="parallel workers (0 = one per CPU)")
    pw.add_argument("--out", default="sweep.csv", help="aggregate CSV path")
    pw.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
