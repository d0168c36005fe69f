#!/usr/bin/env python3
"""Command line entry point.

Exit codes: 0 success, 1 a verification failed or a solve ended without a verdict,
2 bad input (usage, missing or malformed files, out-of-domain parameters).
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, List, Optional

from pydantic import BaseModel, Field

from cmbx import __version__
from cmbx.conic import condition_star_falsify, condition_star_structural
from cmbx.exceptions import CapacityError, DomainError, ModelSchemaError, StructureError
from cmbx.file import default_seed, read_regression_csv, write_csv, write_json
from cmbx.members import (
    Criterion,
    FalsifierConfig,
    FalsifyStatus,
    ProblemFamily,
    SolveMode,
    SolverOptions,
    SolveStatus,
    Tolerances,
)
from cmbx.model import build_bss, generate, load, save
from cmbx.set_function import check_nonnegative, check_submodular

logger = logging.getLogger("cmbx")

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


class CliConfig(BaseModel):
    seed: int = 0
    tolerances: Tolerances = Tolerances()
    out_dir: Optional[Path] = None
    trace: bool = False
    threads: int = Field(1, ge=1)


def _emit(name: str, payload: Any, config: CliConfig):
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    if config.out_dir is None:
        print(json.dumps(payload, indent=2))
    else:
        write_json(payload, config.out_dir / f"{name}.json")
        print(f"wrote {config.out_dir / f'{name}.json'}", file=sys.stderr)


def _solver_options(config: CliConfig, **update) -> SolverOptions:
    return SolverOptions(tolerances=config.tolerances, trace=config.trace, **update)


def _gen(args, config: CliConfig) -> int:
    model = generate(args.family, n=args.n, m=args.m, seed=config.seed)
    if args.objective_seed is not None:
        from cmbx.verify import sample_objective

        model = model.with_objective(sample_objective(model, args.objective_seed))
    if args.output:
        save(model, args.output)
        print(f"wrote {args.output}", file=sys.stderr)
    else:
        _emit(f"{model.meta['family']}_{config.seed}", model, config)
    return EXIT_OK


def _check(args, config: CliConfig) -> int:
    model = load(args.instance)
    report, failed = {}, False
    if args.what in ("submodular", "all"):
        found = [check_submodular(f, config.tolerances.feas) for f in model.functions]
        report["submodular"] = [None if v is None else v.model_dump() for v in found]
        failed |= any(v is not None for v in found)
    if args.what in ("nonneg", "all"):
        found = [check_nonnegative(f, config.tolerances.feas) for f in model.functions]
        report["nonneg"] = [None if v is None else v.model_dump() for v in found]
        failed |= any(v is not None for v in found)
    if args.what in ("condstar", "all"):
        patterns = [condition_star_structural(b) for b in model.blocks]
        falsifier = FalsifierConfig(samples=args.samples, seed=config.seed, respect_equalities=args.respect_equalities)
        found = condition_star_falsify(model.blocks, model.functions, falsifier, model.pins(), config.tolerances.feas)
        report["condstar"] = {
            "structural": [p.value for p in patterns],
            "falsifier": found.model_dump(mode="json"),
        }
        failed |= found.status is FalsifyStatus.Witness
        print(f"structural: {[p.value for p in patterns]}, falsifier: {found.status.value}", file=sys.stderr)
    _emit(f"check_{Path(args.instance).stem}", report, config)
    return EXIT_FAILED if failed else EXIT_OK


def _run_solver(model, mode: SolveMode, options: SolverOptions):
    from cmbx.solver import solve_branch_and_bound, solve_exact_enumeration, solve_relaxation

    if mode is SolveMode.Relax:
        return solve_relaxation(model, options)
    if mode is SolveMode.Exact:
        return solve_exact_enumeration(model, options)
    return solve_branch_and_bound(model, options)


def _write_trace(result, stem: str, config: CliConfig):
    if not config.trace:
        return
    path = (config.out_dir or Path.cwd()) / f"{stem}_trace.csv"
    write_csv([row.model_dump() for row in result.trace], path)
    print(f"wrote {path}", file=sys.stderr)


def _solve(args, config: CliConfig) -> int:
    model = load(args.instance)
    mode = SolveMode(args.mode)
    result = _run_solver(model, mode, _solver_options(config, polymatroid_cuts=not args.no_polymatroid))
    stem = Path(args.instance).stem
    _write_trace(result, stem, config)
    print(
        f"{mode.value}: {result.status.value}, value {result.value}, {result.nodes} nodes, "
        f"{result.cuts_added} cuts, {result.wall_time:.2f}s",
        file=sys.stderr,
    )
    _emit(f"solve_{stem}_{mode.value}", result.model_dump(mode="json", exclude={"trace"}), config)
    return EXIT_OK if result.status in (SolveStatus.Optimal, SolveStatus.Infeasible) else EXIT_FAILED


def _hulltest(args, config: CliConfig) -> int:
    from cmbx.verify import hull_equality_test

    model = load(args.instance)
    report = hull_equality_test(
        model,
        num_objectives=args.objectives,
        seed=config.seed,
        options=_solver_options(config),
        threads=config.threads,
        falsifier=FalsifierConfig(seed=config.seed),
        progress=args.progress,
    )
    stem = Path(args.instance).stem
    if config.trace:
        path = (config.out_dir or Path.cwd()) / f"{stem}_hulltest.csv"
        report.to_frame().to_csv(path, index=False)
    print(
        f"{report.summary.trials} objectives, {report.summary.failures} failures, "
        f"max gap {report.summary.max_gap:.3g}, "
        f"hypotheses {'met' if report.hypotheses_met else 'not met'}",
        file=sys.stderr,
    )
    _emit(f"hulltest_{stem}", report, config)
    return EXIT_OK if report.passed else EXIT_FAILED


def _bss(args, config: CliConfig) -> int:
    U, a = read_regression_csv(args.csv)
    model = build_bss(U, a, bigM=args.bigm, criterion=Criterion(args.criterion), alpha=args.alpha)
    result = _run_solver(model, SolveMode(args.mode), _solver_options(config))
    stem = Path(args.csv).stem
    _write_trace(result, stem, config)
    payload = {"status": result.status.value, "objective": result.value}
    if result.point is not None:
        z = [round(v) for v in result.point.z]
        payload["selected"] = [i + 1 for i, v in enumerate(z) if v]
        payload["beta"] = result.point.x[1 : 1 + len(z)]
    print(f"bss: {result.status.value}, selected {payload.get('selected')}", file=sys.stderr)
    _emit(f"bss_{stem}", payload, config)
    return EXIT_OK if result.status is SolveStatus.Optimal else EXIT_FAILED


def _report(args, config: CliConfig) -> int:
    from cmbx.verify import example1_report

    report = example1_report(x1_values=args.x1)
    for row in report.rows:
        print(f"x1={row.x1:g}: residual {row.residual:.2e}, {row.decomposition.value}", file=sys.stderr)
    _emit(args.name, report, config)
    return EXIT_OK


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    noise = common.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="count", default=0, help="more logging, repeat for debug")
    noise.add_argument("-q", "--quiet", action="store_true", help="errors only")
    common.add_argument("--seed", type=int, default=None, help="random seed (default: $CMBX_SEED or 0)")
    common.add_argument("--tol-feas", type=float, default=1e-7)
    common.add_argument("--tol-opt", type=float, default=1e-6)
    common.add_argument("--out", type=Path, default=None, help="write results into this directory")
    common.add_argument("--trace", action="store_true", help="keep per-iteration records as CSV")
    common.add_argument("--threads", type=int, default=1)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="cmbx", description="conic mixed-binary sets and their convex hulls")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", parents=[common], help="generate a random instance")
    families = [f.value for f in ProblemFamily if f is not ProblemFamily.Custom]
    gen.add_argument("--family", required=True, choices=families)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, default=2)
    gen.add_argument("--objective-seed", type=int, default=None)
    gen.add_argument("--output", type=Path, default=None)
    gen.set_defaults(handler=_gen)

    check = commands.add_parser("check", parents=[common], help="check the hypotheses of an instance")
    check.add_argument("instance", type=Path)
    check.add_argument("--what", choices=["submodular", "nonneg", "condstar", "all"], default="all")
    check.add_argument("--samples", type=int, default=10_000)
    check.add_argument("--respect-equalities", action="store_true")
    check.set_defaults(handler=_check)

    solve = commands.add_parser("solve", parents=[common], help="solve an instance")
    solve.add_argument("instance", type=Path)
    solve.add_argument("--mode", choices=[m.value for m in SolveMode], default=SolveMode.BnB.value)
    solve.add_argument("--no-polymatroid", action="store_true")
    solve.set_defaults(handler=_solve)

    hull = commands.add_parser("hulltest", parents=[common], help="relaxation against exact value on random objectives")
    hull.add_argument("instance", type=Path)
    hull.add_argument("--objectives", type=int, default=20)
    hull.add_argument("--progress", action="store_true")
    hull.set_defaults(handler=_hulltest)

    bss = commands.add_parser("bss", parents=[common], help="best subset selection from a CSV")
    bss.add_argument("csv", type=Path)
    bss.add_argument("--criterion", choices=[c.value for c in Criterion], default=Criterion.AIC.value)
    bss.add_argument("--alpha", type=float, default=0.0)
    bss.add_argument("--bigm", type=float, default=100.0)
    bss.add_argument("--mode", choices=[SolveMode.Exact.value, SolveMode.BnB.value], default=SolveMode.BnB.value)
    bss.set_defaults(handler=_bss)

    report = commands.add_parser("report", parents=[common], help="fractional points of the two-variable example")
    report.add_argument("name", choices=["example1"])
    report.add_argument("--x1", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    report.set_defaults(handler=_report)
    return parser


def _configure_logging(args):
    level = logging.WARNING
    if args.quiet:
        level = logging.ERROR
    elif args.verbose == 1:
        level = logging.INFO
    elif args.verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        config = CliConfig(
            seed=default_seed() if args.seed is None else args.seed,
            tolerances=Tolerances(feas=args.tol_feas, opt=args.tol_opt),
            out_dir=args.out,
            trace=args.trace,
            threads=args.threads,
        )
        return args.handler(args, config)
    except (FileNotFoundError, ModelSchemaError, StructureError, DomainError, CapacityError, ValueError) as e:
        logger.debug("input error", exc_info=True)
        print(f"cmbx: error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
