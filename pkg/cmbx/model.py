#!/usr/bin/env python3
"""Mixed-binary conic models and the builders of the application families.

A model is the set of (x, y, z) with conic blocks A x + B y + C in K, box bounds on x,
linear side rows over (x, y, z), y_j >= f_j(z) and z binary.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from cmbx.conic import ConicBlock, homogenize, orthant, porder, rsoc, soc
from cmbx.exceptions import DomainError, ModelSchemaError, StructureError
from cmbx.file import read_json, write_json
from cmbx.members import Criterion, LinearConstraint, ProblemFamily, Sense
from cmbx.polymatroid import GreedyCut, vertex_from_permutation
from cmbx.set_function import (
    CHECK_LIMIT,
    AiccDecay,
    ExpDecay,
    PNormAugmented,
    SetFunctionSpec,
    SqrtAffine,
    extremal_value,
    subset_rows,
    to_submodular_complement,
)

logger = logging.getLogger(__name__)

BOX = 1e3


class VarBound(BaseModel):
    """Box bound of a continuous variable; an artificial side is a modelling convenience, not part of the set."""

    lb: float
    ub: float
    name: str = ""
    lb_artificial: bool = False
    ub_artificial: bool = True

    @model_validator(mode="after")
    def _ordered(self):
        if not (np.isfinite(self.lb) and np.isfinite(self.ub)):
            raise ValueError(f"bounds of {self.name or 'variable'} must be finite")
        if self.lb > self.ub:
            raise ValueError(f"{self.name or 'variable'}: lb={self.lb} exceeds ub={self.ub}")
        return self


class Objective(BaseModel):
    """min sum of sparse coefficients over x, y and z plus a constant."""

    x: Dict[int, float] = {}
    y: Dict[int, float] = {}
    z: Dict[int, float] = {}
    constant: float = 0.0


class FunctionCut(BaseModel):
    function: int = Field(..., ge=0)
    cut: GreedyCut


class BlockParams(BaseModel):
    """Parameters of one H or R block: f = sqrt(sigma + c'z), coefficients d of the quadratic part."""

    sigma: float = 0.0
    c: List[float]
    d: List[float] = []
    m: int = Field(..., ge=1)


def _check_indices(where: str, indices, size: int):
    bad = [i for i in indices if not 0 <= i < size]
    if bad:
        raise StructureError(f"{where}: index {bad[0]} out of range 0..{size - 1}")


class MixedBinaryConicModel(BaseModel):
    version: Literal[1] = 1
    n: int = Field(..., ge=1)
    vars: List[VarBound]
    functions: List[SetFunctionSpec]
    blocks: List[ConicBlock]
    linear: List[LinearConstraint] = []
    objective: Objective = Objective()
    cuts: List[FunctionCut] = []
    meta: Dict[str, Any] = {}

    @model_validator(mode="after")
    def _consistent(self):
        nx, p = len(self.vars), len(self.functions)
        for j, f in enumerate(self.functions):
            if f.n != self.n:
                raise StructureError(f"functions[{j}]: n={f.n} differs from model n={self.n}")
        referenced = [0] * p
        for b, block in enumerate(self.blocks):
            _check_indices(f"blocks[{b}].x_index", block.x_index, nx)
            if block.y_index is not None:
                _check_indices(f"blocks[{b}].y_index", [block.y_index], p)
                referenced[block.y_index] += 1
        for j, count in enumerate(referenced):
            if count != 1:
                raise StructureError(f"functions[{j}]: referenced by {count} blocks, expected exactly 1")
        for r, row in enumerate(self.linear):
            _check_indices(f"linear[{r}].x", row.x, nx)
            _check_indices(f"linear[{r}].y", row.y, p)
            _check_indices(f"linear[{r}].z", row.z, self.n)
        _check_indices("objective.x", self.objective.x, nx)
        _check_indices("objective.y", self.objective.y, p)
        _check_indices("objective.z", self.objective.z, self.n)
        for k, fc in enumerate(self.cuts):
            _check_indices(f"cuts[{k}].function", [fc.function], p)
            if len(fc.cut.pi) != self.n:
                raise StructureError(f"cuts[{k}]: {len(fc.cut.pi)} coefficients, model n={self.n}")
        return self

    @property
    def family(self) -> ProblemFamily:
        return ProblemFamily(self.meta.get("family", ProblemFamily.Custom.value))

    def with_objective(self, objective: Objective) -> "MixedBinaryConicModel":
        return self.model_validate({**self.model_dump(), "objective": objective.model_dump()})

    def inflated(self, factor: float = 10.0) -> "MixedBinaryConicModel":
        """Widen every artificial bound side by ``factor``; genuine sides stay put."""
        widened = []
        for var in self.vars:
            lb, ub = var.lb, var.ub
            if var.lb_artificial:
                lb = lb - (factor - 1.0) * max(abs(lb), 1.0)
            if var.ub_artificial:
                ub = ub + (factor - 1.0) * max(abs(ub), 1.0)
            widened.append(var.model_copy(update={"lb": lb, "ub": ub}))
        return self.model_copy(update={"vars": widened})

    def pins(self) -> Dict[int, float]:
        """x index -> value for equality rows over a single x variable."""
        pinned = {}
        for row in self.linear:
            if row.sense is Sense.EQ and len(row.x) == 1 and not row.y and not row.z:
                (i, coef), = row.x.items()
                if coef != 0:
                    pinned[i] = row.rhs / coef
        return pinned


def save(model: MixedBinaryConicModel, path: Union[str, Path]):
    write_json(model.model_dump(mode="json"), path)


def parse_model(data: Any, source: str = "model") -> MixedBinaryConicModel:
    if not isinstance(data, dict):
        raise ModelSchemaError(f"{source}: expected a JSON object, got {type(data).__name__}")
    if data.get("version") != 1:
        raise ModelSchemaError(f"{source}: version: expected 1, got {data.get('version')!r}")
    try:
        return MixedBinaryConicModel.model_validate(data)
    except ValidationError as e:
        raise ModelSchemaError(f"{source}: {e}") from e


def load(path: Union[str, Path]) -> MixedBinaryConicModel:
    """Read a model file, raising ModelSchemaError for anything but a valid version-1 model.

    :param path: JSON file
    :return: MixedBinaryConicModel
    """
    try:
        data = read_json(path)
    except json.JSONDecodeError as e:
        raise ModelSchemaError(f"{path}: not valid JSON ({e})") from e
    return parse_model(data, str(path))


class _Assembler:
    def __init__(self, n: int):
        self.n = n
        self.vars: List[VarBound] = []
        self.functions: List[SetFunctionSpec] = []
        self.blocks: List[ConicBlock] = []
        self.linear: List[LinearConstraint] = []
        self.cuts: List[FunctionCut] = []

    def add_vars(self, count, lb=0.0, ub=BOX, name="x", lb_artificial=False, ub_artificial=True) -> List[int]:
        start = len(self.vars)
        for k in range(count):
            label = name if count == 1 else f"{name}{k + 1}"
            self.vars.append(
                VarBound(lb=lb, ub=ub, name=label, lb_artificial=lb_artificial, ub_artificial=ub_artificial)
            )
        return list(range(start, start + count))

    def add_function(self, spec: SetFunctionSpec) -> int:
        if spec.n != self.n:
            raise StructureError(f"function has n={spec.n}, model has n={self.n}")
        self.functions.append(spec)
        return len(self.functions) - 1

    def add_block(self, a, b, cone, x_index, y_index=None, c=None, v_index=None) -> ConicBlock:
        block = ConicBlock(
            A=np.asarray(a, dtype=float).tolist(),
            B=np.asarray(b, dtype=float).tolist(),
            cone=cone,
            C=None if c is None else np.asarray(c, dtype=float).tolist(),
            x_index=list(x_index),
            y_index=y_index,
        )
        if not block.homogeneous:
            if v_index is None:
                (v_index,) = self.add_vars(1, lb=-BOX, ub=BOX, name="v", lb_artificial=True)
            block, _, row = homogenize(block, v_index)
            if all(existing != row for existing in self.linear):
                self.linear.append(row)
        self.blocks.append(block)
        return block

    def add_orthant(self, x_index: Sequence[int]):
        k = len(x_index)
        self.add_block(np.eye(k), np.zeros(k), orthant(k), x_index)

    def add_row(self, sense: Sense, rhs: float, x=None, y=None, z=None):
        self.linear.append(LinearConstraint(x=x or {}, y=y or {}, z=z or {}, sense=sense, rhs=rhs))

    def build(self, family: ProblemFamily, objective: Optional[Objective] = None, **meta) -> MixedBinaryConicModel:
        return MixedBinaryConicModel(
            n=self.n,
            vars=self.vars,
            functions=self.functions,
            blocks=self.blocks,
            linear=self.linear,
            objective=objective or Objective(),
            cuts=self.cuts,
            meta={"family": family.value, **meta},
        )


def _epigraph_vector(dim: int) -> np.ndarray:
    e = np.zeros(dim)
    e[0] = 1.0
    return e


def _check_params(p: BlockParams, minimum_m: int, quadratic: int):
    if p.m < minimum_m:
        raise StructureError(f"block needs m >= {minimum_m}, got m={p.m}")
    if len(p.d) != quadratic:
        raise StructureError(f"expected {quadratic} entries in d for m={p.m}, got {len(p.d)}")
    if p.sigma < 0 or min(p.c, default=0.0) < 0 or min(p.d, default=0.0) < 0:
        raise DomainError("sigma, c and d must be nonnegative")


def _add_h_block(asm: _Assembler, p: BlockParams, bounds: Tuple[float, float]):
    _check_params(p, 1, p.m - 1)
    x = asm.add_vars(p.m, lb=bounds[0], ub=bounds[1], name=f"x{len(asm.blocks)}_")
    j = asm.add_function(SqrtAffine(sigma=p.sigma, c=p.c))
    a = np.zeros((p.m + 1, p.m))
    for i, di in enumerate(p.d):
        a[i + 1, i] = np.sqrt(di)
    a[p.m, p.m - 1] = 1.0
    asm.add_block(a, _epigraph_vector(p.m + 1), soc(p.m + 1), x, j)
    asm.add_orthant(x)


def _add_r_block(asm: _Assembler, p: BlockParams, bounds: Tuple[float, float]):
    _check_params(p, 2, p.m - 2)
    x = asm.add_vars(p.m, lb=bounds[0], ub=bounds[1], name=f"x{len(asm.blocks)}_")
    j = asm.add_function(SqrtAffine(sigma=p.sigma, c=p.c))
    a = np.zeros((p.m + 1, p.m))
    for i, di in enumerate(p.d):
        a[i + 1, i] = np.sqrt(di)
    a[p.m - 1, p.m - 2] = 1.0
    a[p.m, p.m - 1] = 1.0
    asm.add_block(a, _epigraph_vector(p.m + 1), rsoc(p.m + 1), x, j)
    asm.add_orthant(x)


def build_M(
    h_params: Sequence[Union[BlockParams, dict]] = (),
    r_params: Sequence[Union[BlockParams, dict]] = (),
    bounds: Tuple[float, float] = (0.0, BOX),
) -> MixedBinaryConicModel:
    """Intersection of H and R blocks, each on its own x, function and epigraph variable.

    :param h_params: parameters of the second-order blocks sqrt(sigma + c'z) <= ...
    :param r_params: parameters of the rotated blocks
    :param bounds: (lb, ub) of every x; lb is genuine, ub artificial
    :return: MixedBinaryConicModel
    """
    hs = [BlockParams.model_validate(p) if isinstance(p, dict) else p for p in h_params]
    rs = [BlockParams.model_validate(p) if isinstance(p, dict) else p for p in r_params]
    if not hs and not rs:
        raise StructureError("at least one block is needed")
    asm = _Assembler(len((hs or rs)[0].c))
    for p in hs:
        _add_h_block(asm, p, bounds)
    for p in rs:
        _add_r_block(asm, p, bounds)
    family = ProblemFamily.M
    if not rs and len(hs) == 1:
        family = ProblemFamily.H
    elif not hs and len(rs) == 1:
        family = ProblemFamily.R
    return asm.build(family, bounds=list(bounds))


def build_H(sigma: float, c: Sequence[float], d: Sequence[float] = (), m: int = 1, bounds=(0.0, BOX)):
    """sqrt(sigma + c'z) <= y, ||(y, sqrt(d) x_1..x_{m-1})|| <= x_m, x >= 0.

    >>> build_H(0.0, [1.0, 1.0]).blocks[0].cone.dim
    2
    """
    return build_M(h_params=[BlockParams(sigma=sigma, c=list(c), d=list(d), m=m)], bounds=bounds)


def build_R(sigma: float, c: Sequence[float], d: Sequence[float] = (), m: int = 2, bounds=(0.0, BOX)):
    """y^2 + sum d_i x_i^2 <= 4 x_{m-1} x_m as a rotated cone of dimension m + 1."""
    return build_M(r_params=[BlockParams(sigma=sigma, c=list(c), d=list(d), m=m)], bounds=bounds)


def _z_rows_hold(rows: Sequence[LinearConstraint], z: np.ndarray, tol: float = 1e-9) -> bool:
    for row in rows:
        lhs = sum(coef * z[i] for i, coef in row.z.items())
        if row.sense is Sense.LE and lhs > row.rhs + tol:
            return False
        if row.sense is Sense.GE and lhs < row.rhs - tol:
            return False
        if row.sense is Sense.EQ and abs(lhs - row.rhs) > tol:
            return False
    return True


def build_fractional(
    a0: Sequence[float],
    a: Sequence[Sequence[float]],
    b0: Sequence[float],
    b: Sequence[Sequence[float]],
    X: Sequence[LinearConstraint] = (),
    bounds: Tuple[float, float] = (0.0, BOX),
) -> MixedBinaryConicModel:
    """min sum_l (a0_l + a_l'z) / (b0_l + b_l'z) as u_l v_l >= (a0_l + a_l'z) / 4 with v_l = b0_l + b_l'z.

    :param X: linear rows over z alone restricting the binary choices
    :param bounds: (lb, ub) of every u; ub is raised to twice the largest ratio when needed
    :return: MixedBinaryConicModel
    """
    a0, b0 = np.asarray(a0, dtype=float), np.asarray(b0, dtype=float)
    a, b = np.atleast_2d(np.asarray(a, dtype=float)), np.atleast_2d(np.asarray(b, dtype=float))
    ratios, n = a.shape
    if a0.shape != (ratios,) or b0.shape != (ratios,) or b.shape != (ratios, n):
        raise StructureError(f"inconsistent shapes a0{a0.shape}, a{a.shape}, b0{b0.shape}, b{b.shape}")
    if min(a0.min(), a.min(), b0.min(), b.min()) < 0:
        raise DomainError("fractional coefficients must be nonnegative")
    X = list(X)
    if any(not row.binary_only for row in X):
        raise StructureError("rows of X may only involve z")
    if n > CHECK_LIMIT:
        raise DomainError(f"n={n} too large to certify positive denominators")

    zs = subset_rows(n).astype(float)
    zs = zs[[_z_rows_hold(X, z) for z in zs]]
    ratio_bound = 0.0
    if zs.size:
        denominators = b0[None, :] + zs @ b.T
        if denominators.min() <= 0:
            bad = zs[int(np.argmin(denominators.min(axis=1)))]
            raise DomainError(f"denominator vanishes at z={bad.astype(int).tolist()}")
        ratio_bound = float(((a0[None, :] + zs @ a.T) / denominators).max())

    asm = _Assembler(n)
    u_upper = max(bounds[1], 2.0 * ratio_bound)
    objective = {}
    for k in range(ratios):
        (u,) = asm.add_vars(1, lb=bounds[0], ub=u_upper, name=f"u{k + 1}")
        (v,) = asm.add_vars(1, lb=0.0, ub=float(b0[k] + b[k].sum()), name=f"v{k + 1}", ub_artificial=False)
        j = asm.add_function(SqrtAffine(sigma=4.0 * a0[k], c=(4.0 * a[k]).tolist()))
        asm.add_block([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], _epigraph_vector(3), rsoc(3), [u, v], j)
        asm.add_row(Sense.EQ, float(b0[k]), x={v: 1.0}, z={i: -float(b[k, i]) for i in range(n) if b[k, i]})
        objective[u] = 1.0
    asm.linear.extend(X)
    return asm.build(ProblemFamily.Fractional, objective=Objective(x=objective), ratios=ratios)


def decay_function(criterion: Criterion, alpha: float, n: int) -> SetFunctionSpec:
    """Supermodular penalty shape h of an information criterion."""
    criterion = Criterion(criterion)
    if alpha < 0:
        raise DomainError(f"alpha must be nonnegative, got {alpha}")
    if criterion is Criterion.AICc:
        if alpha <= n:
            raise DomainError(f"AICc needs alpha > n, got alpha={alpha}, n={n}")
        return AiccDecay(alpha=alpha, n=n)
    return ExpDecay(alpha=alpha, n=n)


def build_bss(
    U: Sequence[Sequence[float]],
    a: Sequence[float],
    bigM: float,
    criterion: Criterion = Criterion.AIC,
    alpha: float = 0.0,
    bounds: Tuple[float, float] = (-BOX, BOX),
) -> MixedBinaryConicModel:
    """Best subset selection min ||a - U beta||^2 / h(z) with |beta_i| <= bigM z_i.

    The epigraph t h(z) >= ||a - U beta||^2 is written with f = h_max - h as
    ||(2(a v - U beta), t - h_max v + y)|| <= t + h_max v - y, v = 1.

    :param U: design matrix (samples x features)
    :param a: response
    :param bigM: bound on |beta_i| for selected features
    :param criterion: Criterion
    :param alpha: penalty weight of the criterion
    :param bounds: (lb, ub) of every beta_i, both artificial
    :return: MixedBinaryConicModel
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    a = np.asarray(a, dtype=float)
    k, n = U.shape
    if a.shape != (k,):
        raise StructureError(f"response has shape {a.shape}, design has {k} rows")
    if not bigM > 0:
        raise DomainError(f"bigM must be positive, got {bigM}")
    h = decay_function(criterion, alpha, n)
    f = to_submodular_complement(h)
    h_min = extremal_value(h, "min")
    if h_min <= 0:
        raise DomainError("penalty shape must stay positive")

    asm = _Assembler(n)
    (t,) = asm.add_vars(1, lb=0.0, ub=max(BOX, 2.0 * float(a @ a) / h_min), name="t")
    beta = asm.add_vars(n, lb=bounds[0], ub=bounds[1], name="beta", lb_artificial=True)
    (v,) = asm.add_vars(1, lb=-BOX, ub=BOX, name="v", lb_artificial=True)
    j = asm.add_function(f)

    A = np.zeros((k + 2, n + 1))
    A[:k, 1:] = -2.0 * U
    A[k:, 0] = 1.0
    C = np.concatenate([2.0 * a, [-f.h_max, f.h_max]])
    B = np.concatenate([np.zeros(k), [1.0, -1.0]])
    asm.add_block(A, B, soc(k + 2), [t] + beta, j, c=C, v_index=v)
    for i, bi in enumerate(beta):
        asm.add_row(Sense.LE, 0.0, x={bi: 1.0}, z={i: -float(bigM)})
        asm.add_row(Sense.LE, 0.0, x={bi: -1.0}, z={i: -float(bigM)})
    return asm.build(
        ProblemFamily.BSS,
        objective=Objective(x={t: 1.0}),
        criterion=Criterion(criterion).value,
        alpha=alpha,
        bigM=bigM,
        h_max=f.h_max,
    )


def build_drccp_norm(p: float, eta1: float, eta2: int, m: int, n: int, bounds=(0.0, BOX)) -> MixedBinaryConicModel:
    """||(||[z; eta2]||_p, x)||_p <= t with x, t >= 0.

    :param p: norm order, p >= 1
    :param eta1: must be 1
    :param eta2: 0 or 1
    :param m: length of x
    :param n: number of binaries
    :return: MixedBinaryConicModel
    """
    if eta1 != 1:
        raise DomainError(f"eta1 must be 1, got {eta1}")
    if eta2 not in (0, 1):
        raise DomainError(f"eta2 must be 0 or 1, got {eta2}")
    if m < 0:
        raise StructureError(f"m must be nonnegative, got {m}")
    asm = _Assembler(n)
    x = asm.add_vars(m, lb=bounds[0], ub=bounds[1], name="x")
    (t,) = asm.add_vars(1, lb=bounds[0], ub=bounds[1], name="t")
    j = asm.add_function(PNormAugmented(p=p, eta2=eta2, n=n))
    a = np.vstack([np.zeros((1, m + 1)), np.eye(m + 1)])
    asm.add_block(a, _epigraph_vector(m + 2), porder(p, m + 2), x + [t], j)
    asm.add_orthant(x + [t])
    return asm.build(ProblemFamily.DRCCP, p=p, eta2=eta2)


def build_example1(bounds: Tuple[float, float] = (-BOX, BOX)) -> MixedBinaryConicModel:
    """sqrt(z1 + z2) <= y, ||(y, x1)|| <= x2 - 1 with both polymatroid vertices preloaded as cuts."""
    asm = _Assembler(2)
    x1, x2 = asm.add_vars(2, lb=bounds[0], ub=bounds[1], name="x", lb_artificial=True)
    f = SqrtAffine(sigma=0.0, c=[1.0, 1.0])
    j = asm.add_function(f)
    a = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    asm.add_block(a, _epigraph_vector(3), soc(3), [x1, x2], j, c=[0.0, 0.0, -1.0])
    for sigma in ((0, 1), (1, 0)):
        asm.cuts.append(FunctionCut(function=j, cut=vertex_from_permutation(f, sigma)))
    return asm.build(ProblemFamily.Example1)


def generate(family: Union[ProblemFamily, str], n: int, m: int = 2, seed: int = 0) -> MixedBinaryConicModel:
    """Random instance of a family, reproducible from the seed.

    :param family: ProblemFamily
    :param n: number of binaries
    :param m: continuous dimension (length of x, rows of the design for BSS)
    :param seed: random seed
    :return: MixedBinaryConicModel
    """
    family = ProblemFamily(family)
    rng = np.random.default_rng(seed)

    def params(size, quadratic):
        return BlockParams(
            sigma=float(rng.uniform(0.0, 1.0)),
            c=rng.uniform(0.1, 1.0, n).tolist(),
            d=rng.uniform(0.5, 2.0, quadratic).tolist(),
            m=size,
        )

    if family is ProblemFamily.H:
        model = build_M(h_params=[params(m, m - 1)])
    elif family is ProblemFamily.R:
        model = build_M(r_params=[params(max(m, 2), max(m, 2) - 2)])
    elif family is ProblemFamily.M:
        model = build_M(h_params=[params(m, m - 1)], r_params=[params(max(m, 2), max(m, 2) - 2)])
    elif family is ProblemFamily.Fractional:
        ratios = max(m, 1)
        model = build_fractional(
            a0=rng.uniform(0.0, 1.0, ratios),
            a=rng.uniform(0.0, 1.0, (ratios, n)),
            b0=rng.uniform(0.5, 1.5, ratios),
            b=rng.uniform(0.0, 1.0, (ratios, n)),
        )
    elif family is ProblemFamily.BSS:
        k = max(m, n + 1)
        U = rng.standard_normal((k, n))
        truth = np.where(rng.random(n) < 0.5, rng.standard_normal(n), 0.0)
        a = U @ truth + 0.1 * rng.standard_normal(k)
        model = build_bss(U, a, bigM=100.0, criterion=Criterion.AIC, alpha=0.5)
    elif family is ProblemFamily.DRCCP:
        model = build_drccp_norm(p=2.0, eta1=1, eta2=1, m=m, n=n)
    elif family is ProblemFamily.Example1:
        model = build_example1()
    else:
        raise StructureError(f"no generator for family {family.value!r}")
    logger.debug("generated %s instance with n=%d, m=%d, seed=%d", family.value, model.n, m, seed)
    return model.model_copy(update={"meta": {**model.meta, "seed": seed, "m": m}})
