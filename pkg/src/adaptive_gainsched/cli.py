"""Command-line entry point: ``adaptive-gainsched <command> ...``.

Every flag can also come from a JSON file passed with ``--config``; keys use
the flag's destination name (``mu_range``, ``k_lo``, ...). Flags given on the
command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import (
    SynthesisFailed,
    bisect_kstar,
    lin_space,
    log_space,
    run_trajectory,
    sweep,
)
from .model import PolytopicSystem, example_system
from .sdp import FEASIBLE, INCONCLUSIVE, INFEASIBLE, SolverOptions
from .simulator import SimulationConfig, simulate
from .synthesis import ControllerRealization, SynthesisOptions, synthesize, verify_certificate

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
STATUS_EXIT = {FEASIBLE: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE, INCONCLUSIVE: EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


def floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def pair(text) -> tuple:
    vals = floats(text)
    if len(vals) != 2:
        raise UsageError(f"expected two numbers a,b, got {text!r}")
    return vals[0], vals[1]


def grid_shape(text) -> tuple:
    if isinstance(text, (list, tuple)):
        m, n = text
    else:
        m, _, n = str(text).lower().partition("x")
    try:
        return int(m), int(n)
    except ValueError as exc:
        raise UsageError(f"grid must look like 12x12, got {text!r}") from exc


def load_system(spec: str) -> PolytopicSystem:
    """``example:k=775`` or a JSON file with vertex matrices ``A`` and ``B``."""
    if spec.startswith("example"):
        _, _, rest = spec.partition(":")
        params = dict(p.split("=", 1) for p in rest.split(",") if p)
        if set(params) - {"k"}:
            raise UsageError(f"unknown example parameter in {spec!r}")
        return example_system(float(params.get("k", 775)))
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"system file {spec!r} not found")
    return PolytopicSystem.load(path)


def synthesis_options(args) -> SynthesisOptions:
    return SynthesisOptions(
        mu=args.mu, eps=args.eps, certificate_samples=args.samples, seed=args.seed,
        annihilator=args.annihilator, mismatch=args.mismatch,
        solver=SolverOptions(max_iter=args.max_iter, tol=args.solver_tol, backend=args.backend))


def _print(obj):
    print(json.dumps(obj, indent=2, default=str))


def cmd_synthesize(args) -> int:
    sys_ = load_system(args.system)
    res = synthesize(sys_, synthesis_options(args))
    _print({"status": res.status, "margin": res.margin, "iterations": res.iterations,
            "seconds": round(res.seconds, 3), "message": res.message})
    if res.realization is not None and args.out:
        res.realization.save(args.out)
    return STATUS_EXIT[res.status]


def cmd_verify(args) -> int:
    real = ControllerRealization.load(args.realization)
    report = verify_certificate(real.system, real, args.samples, args.seed)
    _print({"passed": report.passed, "worst": report.worst, "worst_alpha": report.worst_alpha,
            "worst_delta": report.worst_delta, "samples": report.samples})
    return EXIT_OK if report.passed else EXIT_INCONCLUSIVE


def cmd_simulate(args) -> int:
    real = ControllerRealization.load(args.realization)
    r = real.r
    cfg = SimulationConfig(x0=floats(args.x0), alpha=floats(args.alpha or [1.0 / r] * r),
                           ahat0=floats(args.ahat0 or [1.0 / r] * r), gamma=args.gamma,
                           t_end=args.tend, dt=args.dt, clamp_simplex=args.clamp)
    trace = simulate(real.system, real, cfg)
    if args.out:
        trace.write(args.out)
    _print(trace.summary())
    return EXIT_INCONCLUSIVE if trace.diverged else EXIT_OK


def cmd_trajectory(args) -> int:
    r = 4
    try:
        _, summary = run_trajectory(
            args.k, args.mu, args.gamma, floats(args.x0), floats(args.alpha or [1.0 / r] * r),
            floats(args.ahat0 or [1.0 / r] * r), args.tend, args.dt, args.out,
            synthesis_options(args), args.clamp)
    except SynthesisFailed as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return STATUS_EXIT.get(exc.status, EXIT_ERROR)
    _print(summary)
    return EXIT_OK


def cmd_sweep(args) -> int:
    m, n = grid_shape(args.grid)
    mus = log_space(*pair(args.mu_range), m)
    k_space = log_space if args.k_scale == "log" else lin_space
    ks = k_space(*pair(args.k_range), n)

    def progress(mu, k, res):
        logging.info("mu=%.3g k=%.4g %s (%.1fs)", mu, k, res.status, res.seconds)

    grid = sweep(mus, ks, synthesis_options(args), workers=args.workers,
                 deadline=args.deadline, order=args.order, progress=progress)
    if args.out:
        grid.to_csv(args.out)
    cols = grid.feasible_columns()
    _print({"cells": m * n, "feasible": grid.count(FEASIBLE), "infeasible": grid.count(INFEASIBLE),
            "inconclusive": grid.count(INCONCLUSIVE), "skipped": m * n - sum(
                grid.count(s) for s in (FEASIBLE, INFEASIBLE, INCONCLUSIVE)),
            "k_columns_with_feasible": f"{sum(cols)}/{n}"})
    return EXIT_OK


def cmd_bisect(args) -> int:
    def progress(k, res):
        logging.info("k=%.6g %s (%.1fs)", k, res.status, res.seconds)

    try:
        res = bisect_kstar(args.mu, args.k_lo, args.k_hi, args.tol, synthesis_options(args),
                           progress=progress)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INFEASIBLE
    _print({"k_star": res.k_star, "bracket": res.bracket, "probes": res.probes,
            "warnings": res.warnings})
    return EXIT_OK


def _solver_flags(p):
    p.add_argument("--mu", type=float, default=1e-11)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--samples", type=int, default=1000, help="certificate re-check samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--annihilator", default="coupled")
    p.add_argument("--mismatch", default="simplex")
    p.add_argument("--backend", default="ipm")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--solver-tol", type=float, default=1e-8)


def _sim_flags(p, realization=True):
    if realization:
        p.add_argument("--realization", required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--x0", default="1,1")
    p.add_argument("--alpha", default=None, help="constant true parameter (default uniform)")
    p.add_argument("--ahat0", default=None, help="initial estimate (default uniform)")
    p.add_argument("--tend", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--clamp", action="store_true", help="clip ahat back onto the simplex")
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-gainsched", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with default flag values")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="solve the LMIs and write a realization")
    p.add_argument("--system", default="example:k=775", help="example:k=.. or a JSON file")
    p.add_argument("--out", default=None)
    _solver_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="re-check a saved realization's certificate")
    p.add_argument("--realization", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="closed-loop run of a saved realization")
    _sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trajectory", help="synthesize on the example family, then simulate")
    p.add_argument("--k", type=float, default=775.0)
    _sim_flags(p, realization=False)
    _solver_flags(p)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("sweep", help="feasibility over a (mu, k) grid")
    p.add_argument("--mu-range", default="1e-11,1e2")
    p.add_argument("--k-range", default="1,100")
    p.add_argument("--grid", default="12x12", help="MxN: M mu values, N k values")
    p.add_argument("--k-scale", choices=("lin", "log"), default="lin")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--deadline", type=float, default=None, help="seconds; later cells skipped")
    p.add_argument("--order", choices=("mu", "k"), default="mu")
    p.add_argument("--out", default=None)
    _solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bisect", help="largest feasible k at fixed mu")
    p.add_argument("--k-lo", type=float, default=1.0)
    p.add_argument("--k-hi", type=float, default=2000.0)
    p.add_argument("--tol", type=float, default=1.0, help="stop when the k bracket is this narrow")
    _solver_flags(p)
    p.set_defaults(func=cmd_bisect)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser = build_parser()
    if known.config:
        try:
            cfg = json.loads(Path(known.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {known.config!r}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        choices = parser._subparsers._group_actions[0].choices
        command = next((a for a in argv if a in choices), None)
        if command is None:
            raise UsageError("no command given")
        sub = choices[command]
        dests = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(dests))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {unknown}")
        for key in cfg:
            dests[key].required = False
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:  # argparse usage errors
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
