#!/usr/bin/env python3
"""Outer approximation over mixed-binary conic models.

Variables are laid out as w = (x, y, z). Every master problem is an LP over the model's
linear rows, its box and a pool of cuts; conic cuts come from supporting hyperplanes of the
blocks at the LP point and polymatroid cuts from greedy separation of y_j >= f_j(z).
"""
import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from cmbx._simplex import LpProblem, LpSolution, solve_lp
from cmbx.conic import residual, supporting_cut
from cmbx.exceptions import CapacityError
from cmbx.members import DecompositionOptions, DecompositionStatus, LpStatus, Sense, SolveStatus, SolverOptions
from cmbx.model import FunctionCut, MixedBinaryConicModel
from cmbx.polymatroid import VALIDATE_LIMIT, GreedyCut, lovasz_extension, separate_greedy, validate_cut
from cmbx.set_function import CHECK_LIMIT, TABLE_LIMIT, characteristic, check_submodular, values

try:
    from scipy.optimize import minimize
except ImportError as e:
    msg = (
        "cmbx.solver dependencies are not installed.\n\n"
        "Please pip install as follows:\n\n"
        "  python -m pip install cmbx[solver] --upgrade"
    )
    raise ImportError(str(e) + "\n\n" + msg)

logger = logging.getLogger(__name__)

DEDUP_DIGITS = 12
TOUCH_TOL = 1e-8
PAIRING_LIMIT = 12
# endpoints of a split differ by more than this in some coordinate
DISTINCT = 1e-6
RETIRE_AFTER = 5
# a split is accepted when both endpoints are within this fraction of tol
SPLIT_SLACK = 1e-3


class Point(BaseModel):
    x: List[float]
    y: List[float]
    z: List[float]


class TraceRow(BaseModel):
    node: int
    iteration: int
    value: float
    violation: float
    new_cuts: int
    pool_size: int


class SolveResult(BaseModel):
    status: SolveStatus
    value: Optional[float] = None
    bound: Optional[float] = None
    point: Optional[Point] = None
    polymatroid_cuts: int = 0
    conic_cuts: int = 0
    nodes: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    bound_touched: bool = False
    message: str = ""
    cuts: List[FunctionCut] = []
    trace: List[TraceRow] = []

    @property
    def cuts_added(self) -> int:
        return self.polymatroid_cuts + self.conic_cuts


@dataclass
class Cut:
    coefs: np.ndarray
    rhs: float
    origin: str
    source: int
    active: bool = True
    idle: int = 0


class CutPool:
    """Cuts coefs'w <= rhs over the full layout, unique after rounding to 12 digits.

    Every cut found stays in the pool. A conic cut left slack by ``retire_after`` consecutive
    master LPs drops out of the active rows; separating it again brings it back.
    """

    def __init__(self, size: int, retire_after: int = RETIRE_AFTER):
        self.size = size
        self.retire_after = retire_after
        self._cuts: Dict[Tuple[float, ...], Cut] = {}
        self._active: List[Cut] = []
        self._stacked = None

    def __len__(self):
        return len(self._cuts)

    def __iter__(self):
        return iter(self._cuts.values())

    def add(self, coefs: np.ndarray, rhs: float, origin: str, source: int) -> bool:
        key = tuple(np.round(np.append(coefs, rhs), DEDUP_DIGITS).tolist())
        cut = self._cuts.get(key)
        if cut is not None:
            if cut.active:
                return False
            cut.active, cut.idle = True, 0
        else:
            self._cuts[key] = Cut(np.asarray(coefs, dtype=float), float(rhs), origin, source)
        self._stacked = None
        return True

    def count(self, origin: str) -> int:
        return sum(cut.origin == origin for cut in self)

    @property
    def active_size(self) -> int:
        return sum(cut.active for cut in self)

    def rows(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._stacked is None:
            self._active = [c for c in self if c.active]
            if self._active:
                self._stacked = np.vstack([c.coefs for c in self._active]), np.array([c.rhs for c in self._active])
            else:
                self._stacked = np.zeros((0, self.size)), np.zeros(0)
        return self._stacked

    def age(self, w: np.ndarray, tol: float) -> int:
        """Count another slack round for the active rows at w; returns how many were retired."""
        G, h = self.rows()
        if not h.size:
            return 0
        slack = h - G @ w > tol * (1.0 + np.abs(h))
        retired = 0
        for cut, idle in zip(self._active, slack):
            if cut.origin != "conic":
                continue
            cut.idle = cut.idle + 1 if idle else 0
            if cut.idle >= self.retire_after:
                cut.active = False
                retired += 1
        if retired:
            self._stacked = None
        return retired


class _Layout:
    def __init__(self, model: MixedBinaryConicModel, options: SolverOptions):
        self.model = model
        self.nx, self.p, self.n = len(model.vars), len(model.functions), model.n
        self.size = self.nx + self.p + self.n
        self.lower = np.concatenate(
            [[v.lb for v in model.vars], np.zeros(self.p), np.zeros(self.n)]
        )
        self.upper = np.concatenate(
            [[v.ub for v in model.vars], np.full(self.p, options.y_upper), np.ones(self.n)]
        )
        self.cost = self._dense(model.objective.x, model.objective.y, model.objective.z)
        ineq, eq = [], []
        for row in model.linear:
            coefs = self._dense(row.x, row.y, row.z)
            if row.sense is Sense.EQ:
                eq.append((coefs, row.rhs))
            else:
                sign = 1.0 if row.sense is Sense.LE else -1.0
                ineq.append((sign * coefs, sign * row.rhs))
        self.G = np.array([r for r, _ in ineq]).reshape(-1, self.size)
        self.h = np.array([b for _, b in ineq], dtype=float)
        self.A_eq = np.array([r for r, _ in eq]).reshape(-1, self.size)
        self.b_eq = np.array([b for _, b in eq], dtype=float)

    def residual(self, w: np.ndarray) -> float:
        """Largest violation of the strengthened relaxation at w, 0 if feasible."""
        x, y, z = self.split(w)
        worst = 0.0
        for block in self.model.blocks:
            worst = max(worst, residual(block.cone, block.image(x, y)))
        if self.h.size:
            worst = max(worst, float(np.max(self.G @ w - self.h)))
        if self.b_eq.size:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ w - self.b_eq))))
        if z.size:
            worst = max(worst, float(np.max(-z)), float(np.max(z - 1.0)))
        if y.size:
            worst = max(worst, float(np.max(-y)))
        zc = np.clip(z, 0.0, 1.0)
        for j, f in enumerate(self.model.functions):
            worst = max(worst, lovasz_extension(f, zc) - y[j])
        for i, var in enumerate(self.model.vars):
            if not var.lb_artificial:
                worst = max(worst, var.lb - x[i])
            if not var.ub_artificial:
                worst = max(worst, x[i] - var.ub)
        return worst

    def _dense(self, x, y, z) -> np.ndarray:
        w = np.zeros(self.size)
        for i, a in x.items():
            w[i] += a
        for j, a in y.items():
            w[self.nx + j] += a
        for i, a in z.items():
            w[self.nx + self.p + i] += a
        return w

    def y(self, j: int) -> int:
        return self.nx + j

    def z_slice(self) -> slice:
        return slice(self.nx + self.p, self.size)

    def split(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return w[: self.nx], w[self.nx : self.nx + self.p], w[self.nx + self.p :]

    def pack(self, point: Union[Point, Sequence[float]]) -> np.ndarray:
        if isinstance(point, Point):
            w = np.concatenate([point.x, point.y, point.z]).astype(float)
        else:
            w = np.asarray(point, dtype=float)
        if w.shape != (self.size,):
            raise ValueError(f"expected a point of length {self.size}, got shape {w.shape}")
        return w

    def point(self, w: np.ndarray) -> Point:
        x, y, z = self.split(w)
        return Point(x=x.tolist(), y=y.tolist(), z=z.tolist())

    def objective(self, w: np.ndarray) -> float:
        return float(self.cost @ w) + self.model.objective.constant

    def polymatroid_row(self, j: int, cut: GreedyCut) -> Tuple[np.ndarray, float]:
        coefs = np.zeros(self.size)
        coefs[self.z_slice()] = cut.pi
        coefs[self.y(j)] = -1.0
        return coefs, -cut.offset

    def conic_row(self, b: int, lam: np.ndarray) -> Tuple[np.ndarray, float]:
        block = self.model.blocks[b]
        coefs = np.zeros(self.size)
        np.add.at(coefs, block.x_index, -(lam @ block.a_matrix()))
        if block.y_index is not None:
            coefs[self.y(block.y_index)] -= lam @ block.b_vector()
        return coefs, float(lam @ block.c_vector())


class _Separator:
    """Cut generation at LP points; greedy cuts of uncertified functions are checked before use."""

    def __init__(self, model: MixedBinaryConicModel, layout: _Layout, options: SolverOptions):
        self.model, self.layout = model, layout
        self.tol = options.tolerances.feas
        self.polymatroid = options.polymatroid_cuts
        self.certified = []
        self.verdicts: Dict[Tuple[int, Tuple[float, ...]], bool] = {}
        self.cuts: List[FunctionCut] = []
        self._seen = set()
        if not self.polymatroid:
            return
        for j, f in enumerate(model.functions):
            if f.n > CHECK_LIMIT:
                logger.warning("functions[%d]: n=%d too large to check submodularity, greedy cuts trusted", j, f.n)
                self.certified.append(True)
                continue
            violation = check_submodular(f, self.tol)
            if violation is not None:
                logger.warning("functions[%d] is not submodular (%s), greedy cuts are validated first", j, violation)
            self.certified.append(violation is None)

    def preload(self, pool: CutPool):
        if not self.polymatroid:
            return
        for fc in self.model.cuts:
            if self._usable(fc.function, fc.cut):
                self._keep(pool, fc.function, fc.cut)

    def _usable(self, j: int, cut: GreedyCut) -> bool:
        if self.certified[j]:
            return True
        key = (j, cut.key)
        if key not in self.verdicts:
            f = self.model.functions[j]
            if f.n > VALIDATE_LIMIT:
                logger.warning("functions[%d]: cannot validate greedy cut with n=%d, skipped", j, f.n)
                self.verdicts[key] = False
            else:
                self.verdicts[key] = validate_cut(f, cut, self.tol) is None
        return self.verdicts[key]

    def _keep(self, pool: CutPool, j: int, cut: GreedyCut) -> bool:
        coefs, rhs = self.layout.polymatroid_row(j, cut)
        added = pool.add(coefs, rhs, "polymatroid", j)
        if (j, cut.key) not in self._seen:
            self._seen.add((j, cut.key))
            self.cuts.append(FunctionCut(function=j, cut=cut))
        return added

    def separate(self, w: np.ndarray, pool: CutPool) -> Tuple[int, float]:
        """Add cuts violated at w; returns (new cuts, largest violation among separable constraints)."""
        x, y, z = self.layout.split(w)
        added, worst = 0, 0.0
        for b, block in enumerate(self.model.blocks):
            image = block.image(x, y)
            r = residual(block.cone, image)
            worst = max(worst, r)
            if r > self.tol:
                coefs, rhs = self.layout.conic_row(b, supporting_cut(block.cone, image, self.tol))
                added += pool.add(coefs, rhs, "conic", b)
        if self.polymatroid:
            z = np.clip(z, 0.0, 1.0)
            for j, f in enumerate(self.model.functions):
                sep = separate_greedy(f, z, y[j], self.tol)
                if sep.violated and self._usable(j, sep.cut):
                    worst = max(worst, sep.value - (y[j] - sep.cut.offset))
                    added += self._keep(pool, j, sep.cut)
        return added, worst


@dataclass
class _Outcome:
    status: SolveStatus
    value: Optional[float] = None
    w: Optional[np.ndarray] = None
    lp: Optional[LpSolution] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    iterations: int = 0
    violation: float = 0.0
    message: str = ""


def _at_upper(w: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return w >= upper - 1e-9 * (1.0 + np.abs(upper))


def _kelley(layout, separator, pool, lower, upper, options, trace, node=0, warm=None) -> _Outcome:
    """Outer approximation at one node; each master LP starts from the bound statuses of the last."""
    tol = options.tolerances
    for iteration in range(1, options.max_iterations + 1):
        G_cuts, h_cuts = pool.rows()
        problem = LpProblem(
            c=layout.cost,
            G=np.vstack([layout.G, G_cuts]),
            h=np.concatenate([layout.h, h_cuts]),
            lb=lower,
            ub=upper,
            A_eq=layout.A_eq,
            b_eq=layout.b_eq,
        )
        lp = solve_lp(problem, tol, start_at_upper=warm)
        if lp.status is LpStatus.Infeasible:
            return _Outcome(SolveStatus.Infeasible, iterations=iteration, message=lp.message)
        if lp.status is not LpStatus.Optimal:
            message = f"LP {lp.status.value}: {lp.message}"
            return _Outcome(SolveStatus.Numerical, iterations=iteration, message=message)
        warm = _at_upper(lp.x, upper)
        pool.age(lp.x, tol.feas)
        added, worst = separator.separate(lp.x, pool)
        value = layout.objective(lp.x)
        if options.trace:
            trace.append(
                TraceRow(
                    node=node, iteration=iteration, value=value, violation=worst, new_cuts=added, pool_size=len(pool)
                )
            )
        logger.debug("node %d, iteration %d: %.10g, violation %.3g, %d cuts", node, iteration, value, worst, added)
        if not added:
            outcome = _Outcome(SolveStatus.Optimal, value, lp.x, lp, lower, upper, iteration, worst)
            if worst > tol.feas:
                outcome.status = SolveStatus.Numerical
                outcome.message = f"no new cut separates a violation of {worst:g}"
            return outcome
    return _Outcome(
        SolveStatus.CapHit, value, lp.x, lp, lower, upper, options.max_iterations, worst,
        message=f"iteration cap {options.max_iterations} reached",
    )


def _bound_touched(layout: _Layout, outcome: _Outcome, fixed_y: bool) -> bool:
    """True if an artificial bound is active with a nonzero reduced cost."""
    if outcome.lp is None:
        return False
    w, rc = outcome.w, outcome.lp.reduced_costs
    lower, upper = outcome.lower, outcome.upper
    at_upper = _at_upper(w, upper)
    at_lower = w <= lower + 1e-9 * (1.0 + np.abs(lower))
    for i, var in enumerate(layout.model.vars):
        if var.ub_artificial and at_upper[i] and rc[i] < -TOUCH_TOL:
            return True
        if var.lb_artificial and at_lower[i] and rc[i] > TOUCH_TOL:
            return True
    if not fixed_y:
        ys = slice(layout.nx, layout.nx + layout.p)
        if np.any(at_upper[ys] & (rc[ys] < -TOUCH_TOL)):
            return True
    return False


def _finish(layout, outcome, pool, separator, start, trace, nodes=1, iterations=None, fixed_y=False) -> SolveResult:
    result = SolveResult(
        status=outcome.status,
        polymatroid_cuts=pool.count("polymatroid"),
        conic_cuts=pool.count("conic"),
        nodes=nodes,
        iterations=outcome.iterations if iterations is None else iterations,
        message=outcome.message,
        cuts=separator.cuts,
        trace=trace,
    )
    if outcome.w is not None and outcome.status is not SolveStatus.Infeasible:
        result.value = outcome.value
        result.bound = outcome.value
        result.point = layout.point(outcome.w)
        result.bound_touched = _bound_touched(layout, outcome, fixed_y)
    result.wall_time = time.perf_counter() - start
    return result


def solve_relaxation(
    model: MixedBinaryConicModel,
    options: Optional[SolverOptions] = None,
    pool: Optional[CutPool] = None,
) -> SolveResult:
    """min of the objective over the continuous relaxation, z in [0, 1]^n.

    With polymatroid cuts this is the strengthened relaxation (the model's preloaded cuts
    are used first); without, only the conic blocks and y >= 0 restrict y.

    :param model: MixedBinaryConicModel
    :param options: SolverOptions
    :param pool: cut pool to reuse across calls on the same model
    :return: SolveResult
    """
    options = options or SolverOptions()
    start = time.perf_counter()
    layout = _Layout(model, options)
    pool = pool if pool is not None else CutPool(layout.size)
    separator = _Separator(model, layout, options)
    separator.preload(pool)
    trace: List[TraceRow] = []
    outcome = _kelley(layout, separator, pool, layout.lower, layout.upper, options, trace)
    return _finish(layout, outcome, pool, separator, start, trace)


def _z_rows_hold(layout: _Layout, z: np.ndarray, tol: float) -> bool:
    """Rows over z alone, checked before solving a fixed-z subproblem."""
    for row in layout.model.linear:
        if not row.binary_only:
            continue
        lhs = sum(a * z[i] for i, a in row.z.items())
        if (row.sense is Sense.LE and lhs > row.rhs + tol) or (row.sense is Sense.GE and lhs < row.rhs - tol):
            return False
        if row.sense is Sense.EQ and abs(lhs - row.rhs) > tol:
            return False
    return True


def solve_exact_enumeration(model: MixedBinaryConicModel, options: Optional[SolverOptions] = None) -> SolveResult:
    """min over conv(S) by enumerating every binary z with y fixed to f(z).

    One conic cut pool serves all z; ties keep the smallest bitmask.

    :param model: MixedBinaryConicModel with n <= 20
    :param options: SolverOptions
    :return: SolveResult
    """
    options = options or SolverOptions()
    if model.n > TABLE_LIMIT:
        raise CapacityError(f"n={model.n} exceeds the enumeration bound {TABLE_LIMIT}")
    start = time.perf_counter()
    layout = _Layout(model, options)
    pool = CutPool(layout.size)
    separator = _Separator(model, layout, options.model_copy(update={"polymatroid_cuts": False}))
    tables = [values(f) for f in model.functions]
    trace: List[TraceRow] = []
    ys, zs = slice(layout.nx, layout.nx + layout.p), layout.z_slice()

    best, iterations, degraded, warm = None, 0, None, None
    for mask in range(1 << model.n):
        z = characteristic(mask, model.n).astype(float)
        if not _z_rows_hold(layout, z, options.tolerances.feas):
            continue
        fz = np.array([t[mask] for t in tables])
        lower, upper = layout.lower.copy(), layout.upper.copy()
        lower[ys] = upper[ys] = fz
        lower[zs] = upper[zs] = z
        outcome = _kelley(layout, separator, pool, lower, upper, options, trace, node=mask, warm=warm)
        iterations += outcome.iterations
        if outcome.status is SolveStatus.Infeasible:
            continue
        if outcome.w is not None:
            warm = _at_upper(outcome.w, layout.upper)
        if outcome.status is not SolveStatus.Optimal:
            logger.warning("z=%s: %s", z.astype(int).tolist(), outcome.message)
            degraded = degraded or outcome
        if best is None or outcome.value < best.value - 1e-12 * (1.0 + abs(best.value)):
            best = outcome

    if best is None:
        result = SolveResult(
            status=SolveStatus.Infeasible, iterations=iterations, message="no binary point is feasible"
        )
        result.wall_time = time.perf_counter() - start
        return result
    if degraded is not None:
        best.status, best.message = degraded.status, degraded.message
    return _finish(layout, best, pool, separator, start, trace, nodes=1 << model.n, iterations=iterations, fixed_y=True)


@dataclass(order=True)
class _Node:
    bound: float
    order: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    depth: int = field(compare=False, default=0)
    # bound statuses of the parent's last master LP
    warm: Optional[np.ndarray] = field(compare=False, default=None)


def _branching_index(z: np.ndarray, tol: float) -> Optional[int]:
    """Most fractional binary, lowest index on ties; None if z is integral."""
    frac = np.abs(z - np.rint(z))
    if frac.max(initial=0.0) <= tol:
        return None
    return int(np.argmax(frac))


def solve_branch_and_bound(model: MixedBinaryConicModel, options: Optional[SolverOptions] = None) -> SolveResult:
    """min over S by best-bound branch and bound on z with outer approximation at every node.

    :param model: MixedBinaryConicModel
    :param options: SolverOptions
    :return: SolveResult
    """
    options = options or SolverOptions()
    start = time.perf_counter()
    tol = options.tolerances
    layout = _Layout(model, options)
    pool = CutPool(layout.size)
    separator = _Separator(model, layout, options)
    separator.preload(pool)
    trace: List[TraceRow] = []
    zs = layout.z_slice()

    heap = [_Node(-np.inf, 0, layout.lower.copy(), layout.upper.copy())]
    incumbent: Optional[_Outcome] = None
    nodes, iterations, order, degraded = 0, 0, 1, None

    def gap(value):
        return tol.opt * (1.0 + abs(value))

    while heap:
        if incumbent is not None and heap[0].bound >= incumbent.value - gap(incumbent.value):
            heapq.heappop(heap)
            continue
        if nodes >= options.max_nodes:
            break
        node = heapq.heappop(heap)
        nodes += 1
        outcome = _kelley(
            layout, separator, pool, node.lower, node.upper, options, trace, node=nodes, warm=node.warm
        )
        iterations += outcome.iterations
        if outcome.status is SolveStatus.Infeasible:
            continue
        if outcome.status is not SolveStatus.Optimal:
            logger.warning("node %d: %s", nodes, outcome.message)
            degraded = degraded or outcome
            if outcome.w is None:
                continue
        if incumbent is not None and outcome.value >= incumbent.value - gap(incumbent.value):
            continue

        z = outcome.w[zs]
        i = _branching_index(z, tol.integrality)
        if i is None:
            if np.abs(z - np.rint(z)).max(initial=0.0) > 1e-12:
                lower, upper = node.lower.copy(), node.upper.copy()
                lower[zs] = upper[zs] = np.rint(z)
                outcome = _kelley(layout, separator, pool, lower, upper, options, trace, node=nodes)
                iterations += outcome.iterations
                if outcome.status is not SolveStatus.Optimal:
                    continue
            if incumbent is None or outcome.value < incumbent.value:
                logger.info("node %d: incumbent %.10g", nodes, outcome.value)
                incumbent = outcome
            continue

        k = layout.nx + layout.p + i
        down_upper = node.upper.copy()
        down_upper[k] = 0.0
        up_lower = node.lower.copy()
        up_lower[k] = 1.0
        warm = _at_upper(outcome.w, node.upper)
        heapq.heappush(heap, _Node(outcome.value, order, node.lower.copy(), down_upper, node.depth + 1, warm))
        heapq.heappush(heap, _Node(outcome.value, order + 1, up_lower, node.upper.copy(), node.depth + 1, warm))
        order += 2

    open_bound = min((n.bound for n in heap), default=np.inf)
    if incumbent is None:
        status = SolveStatus.NodeLimit if heap else SolveStatus.Infeasible
        result = SolveResult(
            status=status,
            bound=None if not heap else float(open_bound),
            nodes=nodes,
            iterations=iterations,
            polymatroid_cuts=pool.count("polymatroid"),
            conic_cuts=pool.count("conic"),
            cuts=separator.cuts,
            trace=trace,
            message="no integral point found",
        )
        result.wall_time = time.perf_counter() - start
        return result

    result = _finish(layout, incumbent, pool, separator, start, trace, nodes=nodes, iterations=iterations)
    result.bound = float(min(incumbent.value, open_bound))
    if heap and open_bound < incumbent.value - gap(incumbent.value):
        result.status, result.message = SolveStatus.NodeLimit, f"node limit {options.max_nodes} reached"
    elif degraded is not None:
        result.status, result.message = degraded.status, degraded.message
    return result


class DecompositionResult(BaseModel):
    status: DecompositionStatus
    p1: Optional[Point] = None
    p2: Optional[Point] = None
    residual: Optional[float] = None
    log: List[str] = []


def relaxation_residual(model: MixedBinaryConicModel, point: Union[Point, Sequence[float]]) -> float:
    """Largest violation of the strengthened relaxation at a point, 0 if feasible.

    Covers the blocks, the linear rows, z in [0, 1], y >= 0, y_j >= Lovasz extension of f_j
    and the genuine sides of the x bounds; artificial sides are ignored.
    """
    layout = _Layout(model, SolverOptions())
    return layout.residual(layout.pack(point))


def _z_pairings(z_bar: np.ndarray) -> List[np.ndarray]:
    """Directions d_z = b - z_bar with b binary and z_bar - d_z also in [0, 1]^n."""
    n = z_bar.size
    if n > PAIRING_LIMIT:
        logger.warning("n=%d: binary pairings skipped, continuous directions only", n)
        return []
    found = []
    for mask in range(1 << n):
        b = characteristic(mask, n).astype(float)
        other = 2.0 * z_bar - b
        if np.all(other >= -1e-12) and np.all(other <= 1.0 + 1e-12) and np.abs(b - z_bar).max() > DISTINCT:
            found.append(b - z_bar)
    return found


def decomposition_check(
    model: MixedBinaryConicModel,
    candidate: Union[Point, Sequence[float]],
    options: DecompositionOptions = DecompositionOptions(),
    tol: float = 1e-7,
) -> DecompositionResult:
    """Look for p1 != p2 in the relaxation with (p1 + p2) / 2 = candidate.

    Binary pairings of z are tried first with a free continuous part, then moves of the
    continuous part alone on a sphere of radius ``options.step``. Each search minimizes
    max(residual(c + d), residual(c - d)) with Powell's method from several starts. A split is
    accepted only when both endpoints are within ``SPLIT_SLACK * tol`` of the relaxation.

    :param model: MixedBinaryConicModel
    :param candidate: feasible point of the relaxation
    :param options: DecompositionOptions
    :param tol: residual accepted for the candidate
    :return: DecompositionResult
    """
    layout = _Layout(model, SolverOptions())
    w = layout.pack(candidate)
    base = layout.residual(w)
    if base > tol:
        raise ValueError(f"candidate violates the relaxation by {base:g}")
    nc = layout.nx + layout.p
    rng = np.random.default_rng(options.seed)
    scale = max(1.0, float(np.abs(w[:nc]).max(initial=0.0)))
    accept = SPLIT_SLACK * tol
    log = []

    def split_found(d, value, label):
        log.append(f"{label}: residual {value:.3g}")
        return DecompositionResult(
            status=DecompositionStatus.Decomposed,
            p1=layout.point(w + d),
            p2=layout.point(w - d),
            residual=float(value),
            log=log,
        )

    def search(phi, starts):
        best = (np.inf, None)
        for s in starts:
            value = phi(s)
            if value > accept and nc:
                settings = {"maxfev": options.max_evaluations, "xtol": 1e-10, "ftol": 1e-12}
                run = minimize(phi, s, method="Powell", options=settings)
                s, value = run.x, float(run.fun)
            if value < best[0]:
                best = (value, np.asarray(s, dtype=float))
            if value <= accept:
                break
        return best

    for dz in _z_pairings(w[layout.z_slice()]):

        def phi(dc, dz=dz):
            d = np.concatenate([dc, dz])
            return max(layout.residual(w + d), layout.residual(w - d))

        starts = [np.zeros(nc)] + [rng.normal(scale=0.5 * scale, size=nc) for _ in range(options.grid)]
        value, dc = search(phi, starts)
        label = f"pairing z={np.rint(w[layout.z_slice()] + dz).astype(int).tolist()}"
        if value <= accept:
            return split_found(np.concatenate([dc, dz]), value, label)
        log.append(f"{label}: best residual {value:.3g}")

    if nc:

        def direction(u):
            return options.step * np.asarray(u, dtype=float) / np.linalg.norm(u)

        def phi_sphere(u):
            if np.linalg.norm(u) < 1e-12:
                return np.inf
            d = np.concatenate([direction(u), np.zeros(layout.n)])
            return max(layout.residual(w + d), layout.residual(w - d))

        axes = [sign * np.eye(nc)[i] for i in range(nc) for sign in (1.0, -1.0)]
        starts = axes + [rng.normal(size=nc) for _ in range(options.grid)]
        value, u = search(phi_sphere, starts)
        if value <= accept:
            return split_found(np.concatenate([direction(u), np.zeros(layout.n)]), value, "continuous move")
        log.append(f"continuous move of length {options.step:g}: best residual {value:.3g}")

    return DecompositionResult(status=DecompositionStatus.NoneFound, log=log)
