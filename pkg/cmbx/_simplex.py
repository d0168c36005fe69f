#!/usr/bin/env python3
"""Bounded-variable revised simplex for min c'x, G x <= h, A_eq x = b_eq, lb <= x <= ub.

Every variable is shifted to x = lb + x' with 0 <= x' <= ub - lb, so nonbasic variables sit at
0 or at their range. Inequality rows get slacks, rows whose start is infeasible get artificials
with coefficient sign(rhs), and phase 1 minimizes their sum. The basis inverse is kept explicit,
updated by eta columns and refactored at a fixed period.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from cmbx.members import LpStatus, Tolerances

logger = logging.getLogger(__name__)

REFACTOR_PERIOD = 50
DUAL_TOL = 1e-9


@dataclass
class LpProblem:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        nv = self.c.size
        self.G = np.asarray(self.G, dtype=float).reshape(-1, nv)
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        if self.A_eq is None:
            self.A_eq, self.b_eq = np.zeros((0, nv)), np.zeros(0)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, nv)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.lb = np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.asarray(self.ub, dtype=float).reshape(-1)
        if self.G.shape[0] != self.h.size or self.A_eq.shape[0] != self.b_eq.size:
            raise ValueError("row counts of the matrices and right-hand sides differ")
        if self.lb.size != nv or self.ub.size != nv:
            raise ValueError(f"expected {nv} bounds, got {self.lb.size} and {self.ub.size}")
        if not (np.all(np.isfinite(self.lb)) and np.all(np.isfinite(self.ub))):
            raise ValueError("every variable needs finite bounds")


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    value: float
    # multipliers of G rows (>= 0) and of A_eq rows
    duals: np.ndarray
    duals_eq: np.ndarray
    reduced_costs: np.ndarray
    basis: List[int] = field(default_factory=list)
    iterations: int = 0
    message: str = ""

    def dual_value(self, problem: LpProblem) -> float:
        """Lagrangian dual bound; equals the primal value at an optimal basis."""
        d = self.reduced_costs
        bound_terms = np.minimum(d * problem.lb, d * problem.ub).sum()
        return float(-self.duals @ problem.h + self.duals_eq @ problem.b_eq + bound_terms)


class _BoundedSimplex:
    def __init__(
        self, M: np.ndarray, b: np.ndarray, upper: np.ndarray, basis: np.ndarray, pivot_tol: float, at_upper=None
    ):
        self.M, self.b, self.upper = M, b, upper
        self.m, self.N = M.shape
        self.basis = basis.copy()
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(self.N, dtype=bool) if at_upper is None else at_upper.copy()
        self.pivot_tol = pivot_tol
        self.iterations = 0
        self.degenerate = 0
        self.bland = False
        self.since_refactor = 0
        self.refactor()

    def refactor(self):
        self.Binv = np.linalg.inv(self.M[:, self.basis])
        self.since_refactor = 0

    def nonbasic_values(self) -> np.ndarray:
        values = np.where(self.at_upper, self.upper, 0.0)
        values[self.is_basic] = 0.0
        return values

    def basic_values(self) -> np.ndarray:
        return self.Binv @ (self.b - self.M @ self.nonbasic_values())

    def values(self) -> np.ndarray:
        x = self.nonbasic_values()
        x[self.basis] = self.basic_values()
        return x

    def duals(self, cost: np.ndarray) -> np.ndarray:
        return cost[self.basis] @ self.Binv

    def pivot(self, r: int, j: int, column: np.ndarray):
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.basis[r] = j
        self.is_basic[j] = True
        self.at_upper[j] = False
        row = self.Binv[r] / column[r]
        self.Binv -= np.outer(column, row)
        self.Binv[r] = row
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_PERIOD:
            self.refactor()

    def _ratio_test(self, xb: np.ndarray, delta: np.ndarray, step: float):
        """Longest step keeping the basics in range; (step, row or -1, leaves at upper)."""
        leave, to_upper, best_pivot = -1, False, 0.0
        ub = self.upper[self.basis]
        for r in np.flatnonzero(np.abs(delta) > self.pivot_tol):
            if delta[r] < 0:
                ratio, upper_side = max(xb[r], 0.0) / -delta[r], False
            elif np.isfinite(ub[r]):
                ratio, upper_side = max(ub[r] - xb[r], 0.0) / delta[r], True
            else:
                continue
            if ratio < step - 1e-12:
                better = True
            elif ratio <= step + 1e-12 and leave >= 0:
                if self.bland:
                    better = self.basis[r] < self.basis[leave]
                else:
                    better = abs(delta[r]) > best_pivot
            else:
                better = False
            if better:
                step, leave, to_upper, best_pivot = min(ratio, step), int(r), upper_side, abs(delta[r])
        return step, leave, to_upper

    def run(self, cost: np.ndarray, max_iterations: int) -> str:
        degenerate_limit = 10 * (self.m + self.N)
        while True:
            if self.iterations >= max_iterations:
                return "limit"
            xb = self.basic_values()
            d = cost - self.duals(cost) @ self.M
            score = np.where(self.at_upper, d, -d)
            score[self.is_basic] = 0.0
            score[self.upper <= 0.0] = 0.0
            candidates = np.flatnonzero(score > DUAL_TOL)
            if not candidates.size:
                return "optimal"
            j = int(candidates[0] if self.bland else candidates[np.argmax(score[candidates])])

            column = self.Binv @ self.M[:, j]
            direction = -1.0 if self.at_upper[j] else 1.0
            step, leave, to_upper = self._ratio_test(xb, -direction * column, self.upper[j])
            if not np.isfinite(step):
                return "unbounded"

            self.iterations += 1
            if step <= 1e-12:
                self.degenerate += 1
                if not self.bland and self.degenerate > degenerate_limit:
                    logger.debug("switching to Bland's rule after %d degenerate pivots", self.degenerate)
                    self.bland = True
            if leave < 0:
                self.at_upper[j] = not self.at_upper[j]
                continue
            leaving = self.basis[leave]
            self.pivot(leave, j, column)
            self.at_upper[leaving] = to_upper

    def drive_out(self, artificial: np.ndarray):
        """Pivot zero-valued artificials out of the basis where a structural column allows it."""
        for r in range(self.m):
            if not artificial[self.basis[r]]:
                continue
            row = self.Binv[r] @ self.M
            row[self.is_basic | artificial] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > 1e-7:
                self.pivot(r, j, self.Binv @ self.M[:, j])


def _empty(problem: LpProblem, status: LpStatus, message: str) -> LpSolution:
    nv = problem.c.size
    return LpSolution(
        status=status,
        x=np.full(nv, np.nan),
        value=float("nan"),
        duals=np.zeros(problem.h.size),
        duals_eq=np.zeros(problem.b_eq.size),
        reduced_costs=np.zeros(nv),
        message=message,
    )


def solve_lp(
    problem: LpProblem,
    tolerances: Tolerances = Tolerances(),
    max_iterations: Optional[int] = None,
    start_at_upper: Optional[np.ndarray] = None,
) -> LpSolution:
    """Solve a bounded LP.

    :param problem: LpProblem
    :param tolerances: feasibility and pivot tolerances
    :param max_iterations: pivot cap over both phases
    :param start_at_upper: boolean mask of variables that start nonbasic at their upper bound
    :return: LpSolution
    """
    c, G, h, A, b_eq = problem.c, problem.G, problem.h, problem.A_eq, problem.b_eq
    lb, ub = problem.lb, problem.ub
    nv, mi, me = c.size, h.size, b_eq.size
    if np.any(ub < lb - tolerances.feas):
        return _empty(problem, LpStatus.Infeasible, "a lower bound exceeds its upper bound")
    span = np.maximum(ub - lb, 0.0)

    if mi + me == 0:
        x = np.where(c < 0, ub, lb)
        return LpSolution(LpStatus.Optimal, x, float(c @ x), np.zeros(0), np.zeros(0), c.copy())

    rhs = np.concatenate([h - G @ lb, b_eq - A @ lb])
    at_upper = np.zeros(nv, dtype=bool)
    if start_at_upper is not None:
        at_upper = np.asarray(start_at_upper, dtype=bool).reshape(nv) & (span > 0.0)
    start = rhs - np.concatenate([G, A]) @ np.where(at_upper, span, 0.0)
    needs = np.concatenate([start[:mi] < 0, np.ones(me, dtype=bool)])
    art_rows = np.flatnonzero(needs)
    na, m = art_rows.size, mi + me
    M = np.zeros((m, nv + mi + na))
    M[:mi, :nv], M[mi:, :nv] = G, A
    M[:mi, nv : nv + mi] = np.eye(mi)
    signs = np.where(start[art_rows] >= 0, 1.0, -1.0)
    M[art_rows, nv + mi + np.arange(na)] = signs
    upper = np.concatenate([span, np.full(mi + na, np.inf)])
    basis = np.empty(m, dtype=np.int64)
    basis[:mi] = nv + np.arange(mi)
    basis[art_rows] = nv + mi + np.arange(na)
    artificial = np.zeros(M.shape[1], dtype=bool)
    artificial[nv + mi :] = True

    cap = max_iterations or max(10_000, 50 * (m + M.shape[1]))
    lp = _BoundedSimplex(
        M, rhs, upper, basis, tolerances.pivot, np.concatenate([at_upper, np.zeros(mi + na, dtype=bool)])
    )
    if na:
        outcome = lp.run(artificial.astype(float), cap)
        if outcome == "limit":
            return _empty(problem, LpStatus.IterationLimit, f"phase 1 stopped after {lp.iterations} pivots")
        infeasibility = float(lp.values()[artificial].sum())
        if infeasibility > tolerances.feas * (1.0 + np.abs(rhs).max()):
            return _empty(problem, LpStatus.Infeasible, f"phase 1 ends at {infeasibility:g}")
        lp.upper[artificial] = 0.0
        lp.at_upper[artificial] = False
        lp.drive_out(artificial)
        lp.bland, lp.degenerate = False, 0

    cost = np.concatenate([c, np.zeros(mi + na)])
    outcome = lp.run(cost, cap)
    if outcome == "limit":
        return _empty(problem, LpStatus.IterationLimit, f"stopped after {lp.iterations} pivots")
    if outcome == "unbounded":
        return _empty(problem, LpStatus.Unbounded, "no leaving variable")

    lp.refactor()
    x = np.clip(lb + lp.values()[:nv], lb, ub)
    y = lp.duals(cost)
    solution = LpSolution(
        status=LpStatus.Optimal,
        x=x,
        value=float(c @ x),
        duals=-y[:mi],
        duals_eq=y[mi:],
        reduced_costs=c - y @ M[:, :nv],
        basis=lp.basis.tolist(),
        iterations=lp.iterations,
    )
    violation = max(
        np.max(G @ x - h - tolerances.feas * (1.0 + np.abs(h)), initial=0.0),
        np.max(np.abs(A @ x - b_eq) - tolerances.feas * (1.0 + np.abs(b_eq)), initial=0.0),
    )
    if violation > 0:
        solution.status = LpStatus.Numerical
        solution.message = f"final point violates a row by {violation:g} beyond tolerance"
        logger.warning(solution.message)
    return solution
