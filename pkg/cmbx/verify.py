#!/usr/bin/env python3
"""Experiments that test the convex hull description on concrete models."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, TypeAdapter, ValidationError

from cmbx.conic import condition_star_falsify, condition_star_structural
from cmbx.exceptions import ModelSchemaError
from cmbx.file import read_json, write_json
from cmbx.members import (
    DecompositionOptions,
    DecompositionStatus,
    FalsifierConfig,
    FalsifyStatus,
    SolverOptions,
    SolveStatus,
)
from cmbx.model import FunctionCut, MixedBinaryConicModel, Objective, build_example1
from cmbx.polymatroid import permutation_vertices, separate_greedy, validate_cut
from cmbx.set_function import CHECK_LIMIT, SetFunctionSpec, check_nonnegative, check_submodular
from cmbx.solver import (
    Point,
    decomposition_check,
    relaxation_residual,
    solve_exact_enumeration,
    solve_relaxation,
)

try:
    import pandas as pd
    from tqdm import tqdm
except ImportError as e:
    msg = (
        "cmbx.verify dependencies are not installed.\n\n"
        "Please pip install as follows:\n\n"
        "  python -m pip install cmbx[verify] --upgrade"
    )
    raise ImportError(str(e) + "\n\n" + msg)

logger = logging.getLogger(__name__)

INFLATION = 10.0


def sample_objective(model: MixedBinaryConicModel, seed: int) -> Objective:
    """Random unit direction over (x, z).

    x coefficients are signed so the objective cannot run along a free bound side: a variable
    with a genuine lower and an artificial upper bound gets a nonnegative cost, and vice versa.
    """
    rng = np.random.default_rng(seed)
    nx = len(model.vars)
    g = rng.standard_normal(nx + model.n)
    g /= np.linalg.norm(g)
    cx, cz = g[:nx], g[nx:]
    for i, var in enumerate(model.vars):
        if var.ub_artificial and not var.lb_artificial:
            cx[i] = abs(cx[i])
        elif var.lb_artificial and not var.ub_artificial:
            cx[i] = -abs(cx[i])
    return Objective(x=dict(enumerate(cx.tolist())), z=dict(enumerate(cz.tolist())))


def theorem_hypotheses(
    model: MixedBinaryConicModel, falsifier: Optional[FalsifierConfig] = None, tol: float = 1e-7
) -> List[str]:
    """Reasons why the hull result is not known to apply; empty if every hypothesis is met.

    :param model: MixedBinaryConicModel
    :param falsifier: sampling settings for blocks no structural pattern certifies
    :param tol: tolerance of the function checks
    :return: list of str
    """
    reasons = []
    for j, f in enumerate(model.functions):
        if f.n > CHECK_LIMIT:
            reasons.append(f"functions[{j}]: n={f.n} too large to check submodularity")
            continue
        violation = check_submodular(f, tol)
        if violation is not None:
            reasons.append(f"functions[{j}] is not submodular: {violation.first}, {violation.second}")
        negative = check_nonnegative(f, tol)
        if negative is not None:
            reasons.append(f"functions[{j}] is negative at {negative.subset}")

    unknown = [b for b, block in enumerate(model.blocks) if not condition_star_structural(block).holds]
    if unknown:
        config = falsifier or FalsifierConfig()
        found = condition_star_falsify([model.blocks[b] for b in unknown], model.functions, config, model.pins())
        if found.status is FalsifyStatus.Witness:
            reasons.append(f"blocks[{unknown[found.block]}] is not closed under scaling (alpha={found.alpha:g})")
        elif found.status is FalsifyStatus.Inconclusive:
            reasons.append(f"blocks[{unknown[found.block]}]: scaling closure undecided")

    for r, row in enumerate(model.linear):
        if (row.x or row.y) and (row.z or row.rhs != 0):
            reasons.append(f"linear[{r}] ties continuous variables to z or to a nonzero constant")
    return reasons


class HullRow(BaseModel):
    objective_seed: int
    relaxation: Optional[float] = None
    exact: Optional[float] = None
    gap: Optional[float] = None
    relaxation_status: SolveStatus
    exact_status: SolveStatus
    inflated: bool = False
    bound_touched: bool = False
    passed: bool = False


class HullSummary(BaseModel):
    trials: int
    failures: int
    max_gap: float


class HullReport(BaseModel):
    instance: str
    seed: int
    hypotheses: List[str]
    rows: List[HullRow]
    summary: HullSummary

    @property
    def hypotheses_met(self) -> bool:
        return not self.hypotheses

    @property
    def passed(self) -> bool:
        return self.summary.failures == 0

    @property
    def certificate(self) -> bool:
        """Equality observed on every objective of an instance meeting every hypothesis."""
        return self.passed and self.hypotheses_met

    def to_frame(self) -> "pd.DataFrame":
        return pd.DataFrame.from_records([r.model_dump(mode="json") for r in self.rows])


def _hull_row(model: MixedBinaryConicModel, objective_seed: int, options: SolverOptions) -> HullRow:
    tol = options.tolerances.opt
    candidate = model.with_objective(sample_objective(model, objective_seed))
    inflated = False
    for attempt in range(2):
        relax = solve_relaxation(candidate, options)
        exact = solve_exact_enumeration(candidate, options)
        touched = relax.bound_touched or exact.bound_touched
        if not touched or attempt:
            break
        logger.info("objective %d: artificial bound active, retrying with bounds x%g", objective_seed, INFLATION)
        candidate, inflated = candidate.inflated(INFLATION), True

    row = HullRow(
        objective_seed=objective_seed,
        relaxation=relax.value,
        exact=exact.value,
        relaxation_status=relax.status,
        exact_status=exact.status,
        inflated=inflated,
        bound_touched=touched,
    )
    if relax.status is SolveStatus.Optimal and exact.status is SolveStatus.Optimal:
        row.gap = (exact.value - relax.value) / (1.0 + abs(exact.value))
        row.passed = not touched and abs(row.gap) <= tol
    return row


def hull_equality_test(
    model: MixedBinaryConicModel,
    num_objectives: int = 20,
    seed: int = 0,
    options: Optional[SolverOptions] = None,
    threads: int = 1,
    falsifier: Optional[FalsifierConfig] = None,
    progress: bool = False,
) -> HullReport:
    """Compare the strengthened relaxation with exact enumeration on random objectives.

    Objective k is drawn from seed + k. A row whose solution sits on an artificial bound is
    solved again with the bounds inflated; touching again fails the row.

    :param model: MixedBinaryConicModel with n <= 20
    :param num_objectives: number of objectives
    :param seed: seed of the first objective
    :param options: SolverOptions
    :param threads: worker threads, one objective each
    :param falsifier: sampling settings for the scaling-closure check
    :param progress: show a progress bar
    :return: HullReport
    """
    options = options or SolverOptions()
    hypotheses = theorem_hypotheses(model, falsifier, options.tolerances.feas)
    for reason in hypotheses:
        logger.info("hypothesis not met: %s", reason)
    seeds = [seed + k for k in range(num_objectives)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        jobs = pool.map(lambda s: _hull_row(model, s, options), seeds)
        rows = list(tqdm(jobs, total=len(seeds), disable=not progress, desc="objectives"))

    gaps = [abs(r.gap) for r in rows if r.gap is not None]
    summary = HullSummary(
        trials=len(rows), failures=sum(not r.passed for r in rows), max_gap=max(gaps, default=0.0)
    )
    return HullReport(
        instance=str(model.meta.get("family", "custom")), seed=seed, hypotheses=hypotheses, rows=rows, summary=summary
    )


class StrengtheningReport(BaseModel):
    plain: Optional[float] = None
    strengthened: Optional[float] = None
    exact: Optional[float] = None
    statuses: List[SolveStatus]

    @property
    def improvement(self) -> Optional[float]:
        if self.plain is None or self.strengthened is None:
            return None
        return self.strengthened - self.plain


def strengthening_gap(model: MixedBinaryConicModel, options: Optional[SolverOptions] = None) -> StrengtheningReport:
    """Relaxation values without and with polymatroid cuts next to the exact value."""
    options = options or SolverOptions()
    plain = solve_relaxation(model, options.model_copy(update={"polymatroid_cuts": False}))
    strengthened = solve_relaxation(model, options.model_copy(update={"polymatroid_cuts": True}))
    exact = solve_exact_enumeration(model, options)
    return StrengtheningReport(
        plain=plain.value,
        strengthened=strengthened.value,
        exact=exact.value,
        statuses=[plain.status, strengthened.status, exact.status],
    )


class SeparationReport(BaseModel):
    trials: int
    failures: int
    max_discrepancy: float


def separation_vs_bruteforce(f: SetFunctionSpec, trials: int = 100, seed: int = 0) -> SeparationReport:
    """Greedy separation value against the best of all n! permutation vertices at random points.

    :param f: set function with n <= 7
    :param trials: random points in [0, 1]^n
    :param seed: random seed
    :return: SeparationReport
    """
    vertices = permutation_vertices(f)
    rng = np.random.default_rng(seed)
    failures, worst = 0, 0.0
    for _ in range(trials):
        z = rng.random(f.n)
        greedy = separate_greedy(f, z, 0.0).value
        brute = max(v.value(z) for v in vertices)
        discrepancy = brute - greedy
        worst = max(worst, abs(discrepancy))
        if abs(discrepancy) > 1e-12 * (1.0 + abs(brute)):
            failures += 1
    return SeparationReport(trials=trials, failures=failures, max_discrepancy=worst)


class InvalidCut(BaseModel):
    index: int
    function: int
    subset: List[int]
    slack: float


class CutValidityReport(BaseModel):
    checked: int
    invalid: List[InvalidCut]

    @property
    def passed(self) -> bool:
        return not self.invalid


def cut_validity_suite(
    model: MixedBinaryConicModel, cuts: Optional[Sequence[FunctionCut]] = None, tol: float = 1e-7
) -> CutValidityReport:
    """Check every cut against its function by enumeration (n <= 12); defaults to the model's cuts."""
    cuts = model.cuts if cuts is None else list(cuts)
    invalid = []
    for k, fc in enumerate(cuts):
        violation = validate_cut(model.functions[fc.function], fc.cut, tol)
        if violation is not None:
            invalid.append(InvalidCut(index=k, function=fc.function, subset=violation.subset, slack=violation.slack))
    return CutValidityReport(checked=len(cuts), invalid=invalid)


_cuts_adapter = TypeAdapter(List[FunctionCut])


def save_cuts(cuts: Sequence[FunctionCut], path: Union[str, Path]):
    write_json([fc.model_dump(mode="json") for fc in cuts], path)


def load_cuts(path: Union[str, Path]) -> List[FunctionCut]:
    try:
        return _cuts_adapter.validate_python(read_json(path))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ModelSchemaError(f"{path}: not a cut file ({e})") from e


class Example1Row(BaseModel):
    x1: float
    point: Point
    residual: float
    tight_cuts: List[bool]
    decomposition: DecompositionStatus
    p1: Optional[Point] = None
    p2: Optional[Point] = None


class Example1Report(BaseModel):
    rows: List[Example1Row]


def example1_report(
    x1_values: Sequence[float] = (0.0, 0.5, 1.0),
    options: DecompositionOptions = DecompositionOptions(),
    tol: float = 1e-7,
) -> Example1Report:
    """Fractional points (x1, 1 + sqrt(x1^2 + 1/2), sqrt(1/2), (1/2, 1/2)) of the two-variable example.

    Each point lies on both preloaded cuts; the decomposition search reports whether it
    splits into two other points of the relaxation.
    """
    model = build_example1()
    y = np.sqrt(0.5)
    rows = []
    for x1 in x1_values:
        point = Point(x=[x1, 1.0 + np.sqrt(x1 ** 2 + 0.5), 1.0], y=[y], z=[0.5, 0.5])
        tight = [abs(fc.cut.value(point.z) - (y - fc.cut.offset)) <= tol for fc in model.cuts]
        found = decomposition_check(model, point, options, tol)
        rows.append(
            Example1Row(
                x1=x1,
                point=point,
                residual=relaxation_residual(model, point),
                tight_cuts=tight,
                decomposition=found.status,
                p1=found.p1,
                p2=found.p2,
            )
        )
        logger.info("x1=%g: %s", x1, found.status.value)
    return Example1Report(rows=rows)
