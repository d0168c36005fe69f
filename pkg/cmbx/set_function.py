#!/usr/bin/env python3
"""Nonnegative set functions f: {0,1}^n -> R and the transformations applied to them.

Subsets are bitmasks, bit i standing for variable i+1. Every family evaluates a whole
0/1 matrix of rows at once, so a single subset and a full table share one arithmetic path.
"""
import logging
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, TypeAdapter, model_validator

from cmbx.exceptions import CapacityError, StructureError
from cmbx.members import Extremum

logger = logging.getLogger(__name__)

TOL_FEAS = 1e-7
# exhaustive checks (submodularity, extrema, signs)
CHECK_LIMIT = 16
# plain materialization of all values
TABLE_LIMIT = 20


def _affine(sigma: float, c: List[float], rows: np.ndarray) -> np.ndarray:
    # column by column so that every row is summed in the same order
    acc = np.full(rows.shape[0], float(sigma))
    for i, ci in enumerate(c):
        acc = acc + ci * rows[:, i]
    return acc


class _Family(BaseModel):
    model_config = ConfigDict(frozen=True)

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        """Values on the rows of a 0/1 matrix of shape (k, n)."""
        raise NotImplementedError


class SqrtAffine(_Family):
    """f(z) = sqrt(sigma + c'z)"""

    family: Literal["sqrt_affine"] = "sqrt_affine"
    sigma: NonNegativeFloat = 0.0
    c: List[NonNegativeFloat]

    @property
    def n(self) -> int:
        return len(self.c)

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        return np.sqrt(_affine(self.sigma, self.c, rows))


class ConcaveOfAffine(_Family):
    """f(z) = g(sigma + c'z) for g one of sqrt, log1p or t -> t**rho."""

    family: Literal["concave_affine"] = "concave_affine"
    g: Literal["sqrt", "log1p", "power"]
    rho: Optional[float] = Field(None, gt=0, lt=1)
    sigma: NonNegativeFloat = 0.0
    c: List[NonNegativeFloat]

    @model_validator(mode="after")
    def _rho_for_power(self):
        if self.g == "power" and self.rho is None:
            raise ValueError("g='power' needs an exponent rho in (0, 1)")
        return self

    @property
    def n(self) -> int:
        return len(self.c)

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        t = _affine(self.sigma, self.c, rows)
        if self.g == "sqrt":
            return np.sqrt(t)
        if self.g == "log1p":
            return np.log1p(t)
        return np.power(t, self.rho)


class PNormAugmented(_Family):
    """f(z) = ||[z; eta2]||_p, which is (sum z + eta2)**(1/p) on binary points."""

    family: Literal["pnorm_augmented"] = "pnorm_augmented"
    p: float = Field(..., ge=1)
    eta2: Literal[0, 1] = 1
    n: int = Field(..., ge=1)

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        count = rows.sum(axis=1).astype(float)
        return np.power(count + self.eta2, 1.0 / self.p)


class ExpDecay(_Family):
    """h(z) = exp(-alpha * sum z), the AIC / BIC penalty shape."""

    family: Literal["exp_decay"] = "exp_decay"
    alpha: NonNegativeFloat
    n: int = Field(..., ge=1)

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        return np.exp(-self.alpha * rows.sum(axis=1))


class AiccDecay(_Family):
    """h(z) = exp(-2 alpha / (alpha - sum z)), the AICc penalty shape; needs alpha > n."""

    family: Literal["aicc_decay"] = "aicc_decay"
    alpha: float
    n: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _off_the_pole(self):
        if self.alpha <= self.n:
            raise ValueError(f"AICc decay needs alpha > n, got alpha={self.alpha}, n={self.n}")
        return self

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        return np.exp(-2.0 * self.alpha / (self.alpha - rows.sum(axis=1)))


class Table(_Family):
    """Explicit values indexed by subset bitmask."""

    family: Literal["table"] = "table"
    values: List[float]

    @property
    def n(self) -> int:
        size = len(self.values)
        n = size.bit_length() - 1
        if size < 2 or (1 << n) != size:
            raise StructureError(f"Table needs 2^n values for some n >= 1, got {size}")
        return n

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        table = np.asarray(self.values, dtype=float)
        return table[bitmasks(rows)]


class Complement(_Family):
    """f = h_max - h, turning a supermodular h into a submodular f."""

    family: Literal["complement"] = "complement"
    inner: "SetFunctionSpec"
    h_max: float

    @property
    def n(self) -> int:
        return self.inner.n

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        return self.h_max - self.inner.on_rows(rows)


class Shifted(_Family):
    """f = inner - delta"""

    family: Literal["shifted"] = "shifted"
    inner: "SetFunctionSpec"
    delta: float

    @property
    def n(self) -> int:
        return self.inner.n

    def on_rows(self, rows: np.ndarray) -> np.ndarray:
        return self.inner.on_rows(rows) - self.delta


SetFunctionSpec = Annotated[
    Union[SqrtAffine, ConcaveOfAffine, PNormAugmented, ExpDecay, AiccDecay, Table, Complement, Shifted],
    Field(discriminator="family"),
]
Complement.model_rebuild()
Shifted.model_rebuild()

_spec_adapter = TypeAdapter(SetFunctionSpec)


class SubmodularityViolation(BaseModel):
    """f(first) + f(second) < f(first | second) + f(first & second) by ``gap``."""

    first: List[int]
    second: List[int]
    gap: float


class NegativeValue(BaseModel):
    subset: List[int]
    value: float


def parse_spec(data: dict) -> SetFunctionSpec:
    """Read a tagged JSON object into a set function.

    >>> parse_spec({"family": "sqrt_affine", "sigma": 0.0, "c": [1.0, 1.0]}).n
    2
    """
    return _spec_adapter.validate_python(data)


def members(subset: int) -> List[int]:
    """1-based members of a bitmask.

    >>> members(0b101)
    [1, 3]
    """
    return [i + 1 for i in range(subset.bit_length()) if subset >> i & 1]


def bitmasks(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    return (rows << np.arange(rows.shape[1], dtype=np.int64)).sum(axis=1)


def characteristic(subset: int, n: int) -> np.ndarray:
    """0/1 vector of a bitmask.

    >>> characteristic(0b10, 3).tolist()
    [0, 1, 0]
    """
    return (subset >> np.arange(n)) & 1


def subset_rows(n: int) -> np.ndarray:
    """All characteristic vectors, row k being the subset with bitmask k."""
    masks = np.arange(1 << n, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(np.int8)


def _require(spec: SetFunctionSpec, limit: int):
    if spec.n > limit:
        raise CapacityError(f"n={spec.n} exceeds the enumeration bound {limit}")


def evaluate(spec: SetFunctionSpec, subset: int) -> float:
    """f at the characteristic vector of a subset.

    :param spec: set function
    :param subset: bitmask, bit i is variable i+1
    :return: float

    >>> evaluate(SqrtAffine(sigma=0.0, c=[1.0, 1.0]), 0b11)
    1.4142135623730951
    """
    n = spec.n
    if not 0 <= subset < 1 << n:
        raise ValueError(f"subset {subset} is not a bitmask over {n} variables")
    return float(spec.on_rows(characteristic(subset, n)[None, :])[0])


def evaluate_point(spec: SetFunctionSpec, z: np.ndarray) -> float:
    """f at a binary vector."""
    z = np.rint(np.asarray(z, dtype=float)).astype(np.int64)
    if z.shape != (spec.n,):
        raise ValueError(f"expected a vector of length {spec.n}, got shape {z.shape}")
    return evaluate(spec, int(bitmasks(z[None, :])[0]))


def values(spec: SetFunctionSpec) -> np.ndarray:
    """All 2^n values in bitmask order."""
    _require(spec, TABLE_LIMIT)
    return spec.on_rows(subset_rows(spec.n))


def to_table(spec: SetFunctionSpec) -> Table:
    return Table(values=values(spec).tolist())


def check_submodular(spec: SetFunctionSpec, tol: float = TOL_FEAS) -> Optional[SubmodularityViolation]:
    """Diminishing returns over every (S, i, j) with i, j outside S.

    :return: None if submodular, else the violation with the smallest (S, i, j)
    """
    _require(spec, CHECK_LIMIT)
    n = spec.n
    f = values(spec)
    masks = np.arange(1 << n, dtype=np.int64)
    best = None
    for i in range(n):
        for j in range(i + 1, n):
            bi, bj = 1 << i, 1 << j
            base = masks[(masks & (bi | bj)) == 0]
            gap = f[base | bi | bj] - f[base | bj] - f[base | bi] + f[base]
            bad = np.flatnonzero(gap > tol)
            if bad.size and (best is None or (base[bad[0]], i, j) < best[:3]):
                best = (int(base[bad[0]]), i, j, float(gap[bad[0]]))
    if best is None:
        return None
    s, i, j, gap = best
    logger.debug("submodularity fails at S=%s, i=%d, j=%d by %g", members(s), i + 1, j + 1, gap)
    return SubmodularityViolation(first=members(s | 1 << i), second=members(s | 1 << j), gap=gap)


def check_nonnegative(spec: SetFunctionSpec, tol: float = TOL_FEAS) -> Optional[NegativeValue]:
    """First subset (in bitmask order) with f < -tol, None if there is none."""
    _require(spec, CHECK_LIMIT)
    f = values(spec)
    bad = np.flatnonzero(f < -tol)
    if not bad.size:
        return None
    return NegativeValue(subset=members(int(bad[0])), value=float(f[bad[0]]))


def extremal_value(spec: SetFunctionSpec, mode: Extremum = Extremum.Max) -> float:
    _require(spec, CHECK_LIMIT)
    f = values(spec)
    return float(f.max() if Extremum(mode) is Extremum.Max else f.min())


def to_submodular_complement(spec: SetFunctionSpec) -> Complement:
    """h_max - h for a supermodular, nonnegative h."""
    return Complement(inner=spec, h_max=extremal_value(spec, Extremum.Max))


def normalized(spec: SetFunctionSpec) -> Shifted:
    """f - f(empty set)"""
    return Shifted(inner=spec, delta=evaluate(spec, 0))


def shift_to_nonnegative(spec: SetFunctionSpec) -> Shifted:
    """f - h_min, nonnegative whatever the signs of f."""
    return Shifted(inner=spec, delta=extremal_value(spec, Extremum.Min))
