#!/usr/bin/env python3
"""Extended polymatroid and polar inequalities y - f(empty) >= pi'z."""
import itertools
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from cmbx.exceptions import CapacityError
from cmbx.set_function import TOL_FEAS, SetFunctionSpec, _affine, members, subset_rows

logger = logging.getLogger(__name__)

VALIDATE_LIMIT = 12
BRUTE_FORCE_LIMIT = 7
POLAR_LIMIT = 5
DEDUP_DIGITS = 12


class GreedyCut(BaseModel):
    """The inequality y - offset >= pi'z. ``perm`` is the 0-based permutation it came from, if any."""

    pi: List[float]
    offset: float
    perm: Optional[List[int]] = None

    @property
    def key(self) -> Tuple[float, ...]:
        return tuple(np.round(self.pi, DEDUP_DIGITS).tolist())

    def value(self, z: Sequence[float]) -> float:
        """pi'z, the right-hand side without offset."""
        return float(np.dot(self.pi, np.asarray(z, dtype=float)))


class Separation(BaseModel):
    cut: GreedyCut
    value: float
    violated: bool


class CutViolation(BaseModel):
    """pi(subset) exceeds f(subset) - f(empty) by ``slack``."""

    subset: List[int]
    slack: float


def vertex_from_permutation(f: SetFunctionSpec, sigma: Sequence[int]) -> GreedyCut:
    """Greedy vertex pi_{sigma(t)} = f(V_t) - f(V_{t-1}) with V_t = {sigma(1), ..., sigma(t)}.

    :param f: set function, a vertex of P_f only when f is submodular
    :param sigma: permutation of range(n)
    :return: GreedyCut
    """
    n = f.n
    sigma = [int(s) for s in sigma]
    if sorted(sigma) != list(range(n)):
        raise ValueError(f"{sigma} is not a permutation of range({n})")
    rows = np.zeros((n + 1, n), dtype=np.int8)
    for t, s in enumerate(sigma):
        rows[t + 1 :, s] = 1
    chain = f.on_rows(rows)
    pi = np.empty(n)
    pi[sigma] = np.diff(chain)
    return GreedyCut(pi=pi.tolist(), offset=float(chain[0]), perm=sigma)


def greedy_order(z_bar: np.ndarray) -> List[int]:
    """Indices by non-increasing value, ties by ascending index."""
    return np.lexsort((np.arange(z_bar.size), -z_bar)).tolist()


def separate_greedy(f: SetFunctionSpec, z_bar: Sequence[float], y_bar: float, tol: float = TOL_FEAS) -> Separation:
    """Most violated extended polymatroid inequality at (z_bar, y_bar).

    :param f: set function
    :param z_bar: point in [0, 1]^n
    :param y_bar: epigraph value
    :param tol: violation tolerance
    :return: Separation with the greedy cut, its value pi'z_bar and whether it cuts off the point
    """
    z_bar = np.asarray(z_bar, dtype=float)
    if z_bar.shape != (f.n,):
        raise ValueError(f"expected a point of length {f.n}, got shape {z_bar.shape}")
    if np.any(z_bar < -tol) or np.any(z_bar > 1 + tol):
        raise ValueError(f"point {z_bar.tolist()} is outside [0, 1]^{f.n}")
    cut = vertex_from_permutation(f, greedy_order(z_bar))
    value = cut.value(z_bar)
    return Separation(cut=cut, value=value, violated=bool(y_bar - cut.offset < value - tol))


def lovasz_extension(f: SetFunctionSpec, z_bar: Sequence[float]) -> float:
    sep = separate_greedy(f, z_bar, 0.0)
    return sep.cut.offset + sep.value


def validate_cut(f: SetFunctionSpec, cut: GreedyCut, tol: float = TOL_FEAS) -> Optional[CutViolation]:
    """Check pi(V) <= f(V) - f(empty) over every V.

    :return: None if valid, else the most violated subset
    """
    if f.n > VALIDATE_LIMIT:
        raise CapacityError(f"n={f.n} exceeds the enumeration bound {VALIDATE_LIMIT}")
    if len(cut.pi) != f.n:
        raise ValueError(f"cut has {len(cut.pi)} coefficients, f has n={f.n}")
    rows = subset_rows(f.n)
    table = f.on_rows(rows)
    slack = _affine(0.0, cut.pi, rows) - (table - table[0])
    worst = int(np.argmax(slack))
    if slack[worst] <= tol:
        return None
    return CutViolation(subset=members(worst), slack=float(slack[worst]))


def permutation_vertices(f: SetFunctionSpec) -> List[GreedyCut]:
    """Greedy vertices of all n! permutations, in lexicographic permutation order."""
    if f.n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"n={f.n} exceeds the permutation bound {BRUTE_FORCE_LIMIT}")
    return [vertex_from_permutation(f, sigma) for sigma in itertools.permutations(range(f.n))]


def enumerate_polar_vertices(f: SetFunctionSpec, tol: float = TOL_FEAS) -> List[GreedyCut]:
    """Vertices of {pi : pi(V) <= f(V) - f(empty) for all nonempty V} by basis enumeration.

    Every choice of n of the 2^n - 1 constraints is solved as a square system; singular
    choices are skipped and solutions violating any constraint are dropped.
    """
    n = f.n
    if n > POLAR_LIMIT:
        raise CapacityError(f"n={n} exceeds the vertex enumeration bound {POLAR_LIMIT}")
    rows = subset_rows(n)
    table = f.on_rows(rows)
    lhs = rows[1:].astype(float)
    rhs = table[1:] - table[0]

    found = {}
    combos = np.array(list(itertools.combinations(range(lhs.shape[0]), n)), dtype=np.int64)
    for start in range(0, combos.shape[0], 20_000):
        chunk = combos[start : start + 20_000]
        systems = lhs[chunk]
        # 0/1 matrices have integral determinants
        regular = np.abs(np.linalg.det(systems)) > 0.5
        if not regular.any():
            continue
        solutions = np.linalg.solve(systems[regular], rhs[chunk][regular][..., None])[..., 0]
        feasible = np.all(solutions @ lhs.T <= rhs + tol, axis=1)
        for pi in solutions[feasible]:
            found.setdefault(tuple(np.round(pi, DEDUP_DIGITS).tolist()), pi)

    logger.debug("%d distinct polar vertices for n=%d", len(found), n)
    ordered = sorted(found.values(), key=lambda pi: tuple(-pi))
    return [GreedyCut(pi=pi.tolist(), offset=float(table[0])) for pi in ordered]
