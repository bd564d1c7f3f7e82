"""Command-line entry point: ``holm solve | bench | tune-eta | check``.

Exit codes: 0 success, 1 usage or input error, 2 solver failure (solve) or
failed validation (check).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .bench import MEASURES, emit, performance_profile, performance_ratios, run_benchmark
from .core import TRACE_FIELDS, ConfigError, MuStrategy, SolverConfig
from .problems import BUILTINS, NetworkError, ParseError, builtin_problem, check_jacobian, load_network, read_vector
from .solvers import SOLVER_NAMES, make_solver

log = logging.getLogger("holm")

FD_TOLERANCE = 1e-5
DEFAULT_ETAS = (0.6, 0.8, 1.0, 1.2, 1.4)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_config_flags(p: argparse.ArgumentParser, max_iter: int = 100_000, eta: bool = True) -> None:
    g = p.add_argument_group("solver parameters")
    if eta:
        g.add_argument("--eta", type=float, default=1.2, help="exponent in the adaptive mu (default 1.2)")
    g.add_argument("--eps", type=float, default=1e-6, help="stopping accuracy (default 1e-6)")
    g.add_argument("--rel", type=float, default=1e-12, help="relative stopping factor (default 1e-12)")
    g.add_argument("--max-iter", type=int, default=max_iter)
    g.add_argument("--stop-rule", choices=("either", "both"), default="either",
                   help="stop when either |h| or |grad| is small, or only when both are")
    g.add_argument("--alpha-bar", type=float, default=1.0)
    g.add_argument("--rho", type=float, default=0.5)
    g.add_argument("--sigma", type=float, default=1e-2)
    g.add_argument("--theta", type=float, default=0.95)
    g.add_argument("--rho1", type=float, default=2.0)
    g.add_argument("--rho2", type=float, default=0.5)
    g.add_argument("--upsilon1", type=float, default=1e-4)
    g.add_argument("--upsilon2", type=float, default=0.9)
    g.add_argument("--lambda0", type=float, default=1e-2)
    g.add_argument("--mu-min", type=float, default=1e-8)


def config_from_args(args, eta: float | None = None) -> SolverConfig:
    eta = args.eta if eta is None else eta
    return SolverConfig(
        eps=args.eps, rel=args.rel, max_iter=args.max_iter, stop_rule=args.stop_rule,
        mu=MuStrategy.adaptive(eta=eta), alpha_bar=args.alpha_bar, rho=args.rho, sigma=args.sigma,
        theta=args.theta, theta_max=max(0.95, args.theta), rho1=args.rho1, rho2=args.rho2,
        upsilon1=args.upsilon1, upsilon2=args.upsilon2, lambda0=args.lambda0, mu_min=args.mu_min,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one problem")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", help=f"built-in problem: {', '.join(BUILTINS)}")
    src.add_argument("--manifest", type=Path, help="JSON manifest of a reaction network")
    p.add_argument("--solver", default="lmls", help=f"one of {', '.join(SOLVER_NAMES)}")
    p.add_argument("--x0", help="'zeros' or a vector file (default: the problem's start)")
    p.add_argument("--out", type=Path, help="write the report (with trace) as JSON")
    p.add_argument("--trace", type=Path, help="write per-iteration records as CSV")
    _add_config_flags(p)

    p = sub.add_parser("bench", help="run a problem x solver grid and emit performance profiles")
    p.add_argument("--problem", default="all", help="comma-separated built-ins, or 'all'")
    p.add_argument("--manifest", type=Path, action="append", default=[], help="extra network (repeatable)")
    p.add_argument("--solver", default=",".join(SOLVER_NAMES), help="comma-separated solver names")
    p.add_argument("--measure", default=",".join(MEASURES), help=f"comma-separated subset of {MEASURES}")
    p.add_argument("--out", type=Path, default=Path("bench_out"))
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)

    p = sub.add_parser("tune-eta", help="profile lmls and lmtr over a grid of eta values")
    p.add_argument("--eta", dest="etas", default=",".join(map(str, DEFAULT_ETAS)),
                   help="comma-separated eta values (default 0.6,0.8,1.0,1.2,1.4)")
    p.add_argument("--problem", default="all")
    p.add_argument("--manifest", type=Path, action="append", default=[])
    p.add_argument("--measure", default=",".join(MEASURES))
    p.add_argument("--out", type=Path, default=Path("tune_out"))
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p, max_iter=10_000, eta=False)

    p = sub.add_parser("check", help="validate a problem and its analytic Jacobian")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem")
    src.add_argument("--manifest", type=Path)
    p.add_argument("--points", type=int, default=10)
    return parser


# -------------------------------------------------------------------------
def _problems(names: str, manifests) -> list:
    chosen = list(BUILTINS) if names.strip() == "all" else _csv_list(names)
    out = []
    for name in chosen:
        if name not in BUILTINS:
            raise UsageError(f"unknown problem {name!r}; available: {', '.join(BUILTINS)}")
        out.append(builtin_problem(name))
    for m in manifests:
        out.append(_load(m).problem())
    if not out:
        raise UsageError("no problems selected")
    return out


def _load(manifest):
    try:
        return load_network(manifest)
    except (ParseError, NetworkError) as exc:
        raise UsageError(str(exc)) from exc


def _measures(text: str) -> list:
    ms = _csv_list(text)
    bad = [m for m in ms if m not in MEASURES]
    if bad or not ms:
        raise UsageError(f"measures must be a nonempty subset of {', '.join(MEASURES)}")
    return ms


def _x0(text, problem):
    if text is None:
        return problem.start()
    if text == "zeros":
        return np.zeros(problem.m)
    try:
        x0 = read_vector(text)
    except ParseError as exc:
        raise UsageError(str(exc)) from exc
    if x0.size != problem.m:
        raise UsageError(f"x0 has {x0.size} entries, problem {problem.name} needs {problem.m}")
    return x0


def _write_profiles(table, measures, out: Path, prefix: str = "profile") -> list:
    written = []
    for m in measures:
        curves = performance_profile(performance_ratios(table, m))
        written.append(emit(curves, out / f"{prefix}_{m}.csv"))
    return written


def cmd_solve(args) -> int:
    if args.solver not in SOLVER_NAMES:
        raise UsageError(f"unknown solver {args.solver!r}; available: {', '.join(SOLVER_NAMES)}")
    if args.manifest is not None:
        problem = _load(args.manifest).problem()
    elif args.problem in BUILTINS:
        problem = builtin_problem(args.problem)
    else:
        raise UsageError(f"unknown problem {args.problem!r}; available: {', '.join(BUILTINS)}")
    x0 = _x0(args.x0, problem)
    report = make_solver(args.solver, config_from_args(args))(problem, x0)

    print(json.dumps(report.to_dict()))
    if args.out:
        args.out.write_text(json.dumps(report.to_dict(with_trace=True), indent=1) + "\n", encoding="utf-8")
    if args.trace:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
            w.writeheader()
            for rec in report.trace:
                w.writerow({k: ("" if isinstance(v, float) and math.isnan(v) else v)
                            for k, v in dataclasses.asdict(rec).items()})
    return 0 if report.converged else 2


def cmd_bench(args) -> int:
    names = _csv_list(args.solver)
    if not names:
        raise UsageError("no solvers selected")
    unknown = [s for s in names if s not in SOLVER_NAMES]
    if unknown:
        raise UsageError(f"unknown solver(s) {', '.join(unknown)}; available: {', '.join(SOLVER_NAMES)}")
    measures = _measures(args.measure)
    problems = _problems(args.problem, args.manifest)
    cfg = config_from_args(args)
    table = run_benchmark(problems, [make_solver(s, cfg) for s in names], jobs=args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    emit(table, args.out / "metrics.csv")
    for path in _write_profiles(table, measures, args.out):
        log.info("wrote %s", path)
    solved = sum(r.solved for r in table.rows)
    print(f"{len(table)} runs, {solved} solved; results in {args.out}")
    return 0


def cmd_tune_eta(args) -> int:
    try:
        etas = [float(e) for e in _csv_list(args.etas)]
    except ValueError as exc:
        raise UsageError(f"bad eta list: {exc}") from exc
    if not etas or any(not e > 0 for e in etas):
        raise UsageError("eta values must be positive")
    measures = _measures(args.measure)
    problems = _problems(args.problem, args.manifest)
    args.out.mkdir(parents=True, exist_ok=True)
    for method in ("lmls", "lmtr"):
        solvers = [make_solver(method, config_from_args(args, eta=e), label=f"{method}-eta{e:g}") for e in etas]
        table = run_benchmark(problems, solvers, jobs=args.jobs)
        (args.out / method).mkdir(exist_ok=True)
        emit(table, args.out / method / "metrics.csv")
        _write_profiles(table, measures, args.out / method)
        solved = {s.name: sum(r.solved for r in table.rows if r.solver == s.name) for s in solvers}
        print(f"{method}: " + ", ".join(f"{k} solved {v}/{len(problems)}" for k, v in solved.items()))
    return 0


def cmd_check(args) -> int:
    seed = int(os.environ.get("HOLM_SEED", "0"))
    failures = []
    if args.manifest is not None:
        try:
            net = load_network(args.manifest)
        except (ParseError, NetworkError) as exc:
            for msg in getattr(exc, "problems", [str(exc)]):
                print(f"FAIL {msg}")
            return 2
        problem = net.problem()
        for note in net.notes:
            print(f"note: {note}")
        print(f"network {net.name}: m={net.m} n={net.n} rank={net.rank} moieties={net.L.shape[0]}")
    elif args.problem in BUILTINS:
        problem = builtin_problem(args.problem)
    else:
        raise UsageError(f"unknown problem {args.problem!r}; available: {', '.join(BUILTINS)}")
    err = check_jacobian(problem, np.random.default_rng(seed), points=args.points)
    print(f"max relative Jacobian error over {args.points} points: {err:.3e}")
    if not err <= FD_TOLERANCE:
        failures.append(f"Jacobian disagrees with finite differences ({err:.3e} > {FD_TOLERANCE:g})")
    for msg in failures:
        print(f"FAIL {msg}")
    if not failures:
        print("PASS")
    return 2 if failures else 0


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "tune-eta": cmd_tune_eta, "check": cmd_check}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, usage errors exit 1; return instead of raising
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"holm {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
