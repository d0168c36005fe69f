#!/usr/bin/env python3
"""Cones, conic blocks A x + B y + C in K and the scaling closure of their feasible sets."""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cmbx.members import ConeTag, FalsifierConfig, FalsifyStatus, LinearConstraint, Sense, StarPattern
from cmbx.set_function import TOL_FEAS, SetFunctionSpec, members

logger = logging.getLogger(__name__)

# exhaustive z enumeration in the falsifier, random subsets beyond
FALSIFY_ENUMERATION_LIMIT = 12
FALSIFY_SUBSET_SAMPLES = 256

_MIN_DIM = {ConeTag.NonnegOrthant: 1, ConeTag.Soc: 2, ConeTag.RotatedSoc: 2, ConeTag.POrder: 2}


class Cone(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: ConeTag
    dim: int = Field(..., ge=1)
    p: Optional[float] = Field(None, ge=1)

    @model_validator(mode="after")
    def _shape(self):
        if self.dim < _MIN_DIM[self.tag]:
            raise ValueError(f"{self.tag.value} cone needs dim >= {_MIN_DIM[self.tag]}, got {self.dim}")
        if self.tag is ConeTag.POrder and self.p is None:
            raise ValueError("p-order cone needs p >= 1")
        return self


def orthant(dim: int) -> Cone:
    return Cone(tag=ConeTag.NonnegOrthant, dim=dim)


def soc(dim: int) -> Cone:
    return Cone(tag=ConeTag.Soc, dim=dim)


def rsoc(dim: int) -> Cone:
    return Cone(tag=ConeTag.RotatedSoc, dim=dim)


def porder(p: float, dim: int) -> Cone:
    return Cone(tag=ConeTag.POrder, dim=dim, p=p)


class ConicBlock(BaseModel):
    """A x[x_index] + B y[y_index] + C in cone, with C = 0 when omitted.

    Blocks without an epigraph variable (``y_index`` None) must have B = 0.
    """

    A: List[List[float]]
    B: List[float]
    cone: Cone
    C: Optional[List[float]] = None
    x_index: List[int]
    y_index: Optional[int] = None

    @model_validator(mode="after")
    def _dimensions(self):
        d = self.cone.dim
        if len(self.A) != d or len(self.B) != d:
            raise ValueError(f"A has {len(self.A)} rows and B has {len(self.B)} entries, cone dim is {d}")
        width = len(self.x_index)
        bad = [r for r, row in enumerate(self.A) if len(row) != width]
        if bad:
            raise ValueError(f"A row {bad[0]} has {len(self.A[bad[0]])} entries, x_index has {width}")
        if self.C is not None and len(self.C) != d:
            raise ValueError(f"C has {len(self.C)} entries, cone dim is {d}")
        if self.y_index is None and any(self.B):
            raise ValueError("B must be zero when the block has no epigraph variable")
        return self

    def a_matrix(self) -> np.ndarray:
        return np.asarray(self.A, dtype=float).reshape(self.cone.dim, len(self.x_index))

    def b_vector(self) -> np.ndarray:
        return np.asarray(self.B, dtype=float)

    def c_vector(self) -> np.ndarray:
        if self.C is None:
            return np.zeros(self.cone.dim)
        return np.asarray(self.C, dtype=float)

    @property
    def homogeneous(self) -> bool:
        return self.C is None or not any(self.C)

    def image(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """A x_block + B y_j + C for full x and y vectors."""
        x = np.asarray(x, dtype=float)
        fy = 0.0 if self.y_index is None else float(y[self.y_index])
        return self.a_matrix() @ x[self.x_index] + self.b_vector() * fy + self.c_vector()


def rotated_map(dim: int) -> np.ndarray:
    """Linear map taking (xi, u, v) to (xi, u - v, u + v), so that rsoc is its preimage of soc."""
    m = np.eye(dim)
    m[dim - 2, dim - 1] = -1.0
    m[dim - 1, dim - 2] = 1.0
    return m


def residuals(cone: Cone, points: np.ndarray) -> np.ndarray:
    """Row-wise membership residual, <= 0 exactly on the cone."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if cone.tag is ConeTag.NonnegOrthant:
        return -points.min(axis=1)
    if cone.tag is ConeTag.RotatedSoc:
        points = points @ rotated_map(cone.dim).T
    p = 2 if cone.tag is not ConeTag.POrder else cone.p
    return np.linalg.norm(points[:, :-1], ord=p, axis=1) - points[:, -1]


def residual(cone: Cone, v: Sequence[float]) -> float:
    """Membership residual of a single vector.

    :param cone: Cone
    :param v: vector of length cone.dim
    :return: float, <= 0 iff v is in the cone

    >>> residual(soc(3), [3.0, 4.0, 5.0])
    0.0
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (cone.dim,):
        raise ValueError(f"expected a vector of length {cone.dim}, got shape {v.shape}")
    return float(residuals(cone, v[None, :])[0])


def _dual_norm_direction(xi: np.ndarray, p: float) -> np.ndarray:
    norm = np.linalg.norm(xi, ord=p)
    if norm == 0:
        return np.zeros_like(xi)
    if p == 1:
        return np.sign(xi)
    return np.sign(xi) * (np.abs(xi) / norm) ** (p - 1)


def supporting_cut(cone: Cone, v: Sequence[float], tol: float = TOL_FEAS) -> np.ndarray:
    """Dual vector lam with lam'w >= 0 on the cone and lam'v = -residual(v).

    :param cone: Cone
    :param v: point outside the cone by more than tol
    :return: np.ndarray
    """
    v = np.asarray(v, dtype=float)
    r = residual(cone, v)
    if r <= tol:
        raise ValueError(f"point lies in the {cone.tag.value} cone (residual {r:g}), no cut separates it")
    if cone.tag is ConeTag.NonnegOrthant:
        lam = np.zeros(cone.dim)
        lam[int(np.argmin(v))] = 1.0
        return lam
    if cone.tag is ConeTag.RotatedSoc:
        m = rotated_map(cone.dim)
        w = m @ v
        return m.T @ np.append(-_dual_norm_direction(w[:-1], 2), 1.0)
    p = 2 if cone.tag is ConeTag.Soc else cone.p
    return np.append(-_dual_norm_direction(v[:-1], p), 1.0)


def homogenize(block: ConicBlock, v_index: int) -> Tuple[ConicBlock, Optional[int], Optional[LinearConstraint]]:
    """Move C into a new column on the variable v_index, pinned by v = 1.

    :return: (block, v_index, row v = 1); a homogeneous block is returned as is with (None, None)
    """
    if block.homogeneous:
        return block.model_copy(update={"C": None}), None, None
    a = np.hstack([block.a_matrix(), block.c_vector()[:, None]])
    augmented = ConicBlock(
        A=a.tolist(),
        B=list(block.B),
        cone=block.cone,
        C=None,
        x_index=list(block.x_index) + [v_index],
        y_index=block.y_index,
    )
    return augmented, v_index, LinearConstraint(x={v_index: 1.0}, sense=Sense.EQ, rhs=1.0)


def condition_star_structural(block: ConicBlock) -> StarPattern:
    """Recognize blocks whose feasible set is closed under x -> alpha x, alpha >= 1.

    P0: B = 0. P1: B = beta e_1 with beta >= 0 on a zero row of A in the norm part of the
    cone (or any orthant row). P2: second-order cone with B = (0; beta; -beta), beta > 0,
    which holds for any A as long as f >= 0.
    """
    if not block.homogeneous:
        return StarPattern.Unknown
    a, b, cone = block.a_matrix(), block.b_vector(), block.cone
    if not b.any():
        return StarPattern.ZeroB
    if b[0] >= 0 and not b[1:].any() and not a[0].any():
        if cone.tag in (ConeTag.Soc, ConeTag.POrder, ConeTag.NonnegOrthant):
            return StarPattern.EpigraphRow
        if cone.tag is ConeTag.RotatedSoc and cone.dim >= 3:
            return StarPattern.EpigraphRow
    if cone.tag is ConeTag.Soc and cone.dim >= 3:
        beta = b[-2]
        if beta > 0 and b[-1] == -beta and not b[:-2].any():
            return StarPattern.SignedPair
    return StarPattern.Unknown


class FalsifyResult(BaseModel):
    """Witness of A(alpha x) + B f(z) + C outside the cone for a feasible (x, z)."""

    status: FalsifyStatus
    block: Optional[int] = None
    alpha: Optional[float] = None
    x: Optional[List[float]] = None
    z: Optional[List[int]] = None
    residual: Optional[float] = None
    samples: int = 0


def _draws(rng: np.random.Generator, count: int, width: int, box: float) -> np.ndarray:
    # magnitudes spread over several decades inside the box
    scale = box * 10.0 ** (-3.0 * rng.random((count, width)))
    return np.where(rng.random((count, width)) < 0.5, -scale, scale)


def _subset_masks(n: int, rng: np.random.Generator) -> np.ndarray:
    if n <= FALSIFY_ENUMERATION_LIMIT:
        return np.arange(1 << n, dtype=np.int64)
    rows = rng.integers(0, 2, size=(FALSIFY_SUBSET_SAMPLES, n))
    return np.unique((rows << np.arange(n)).sum(axis=1))


def _feasible_samples(block, masks, fvals, pins, config, rng):
    cone = block.cone
    a, b, c = block.a_matrix(), block.b_vector(), block.c_vector()
    width = a.shape[1]
    per_subset = max(8, config.samples // len(masks))
    points, subsets, fs = [], [], []
    for mask, fz in zip(masks, fvals):
        draws = _draws(rng, per_subset, width, config.box)
        for col, val in pins.items():
            draws[:, col] = val
        shift = fz * b + c
        inside = residuals(cone, draws @ a.T + shift) <= 0.0
        if not inside.any():
            continue
        # bisect every outside draw against one feasible anchor
        lo = np.repeat(draws[np.argmax(inside)][None, :], int((~inside).sum()), axis=0)
        hi = draws[~inside]
        for _ in range(config.bisection_steps):
            mid = 0.5 * (lo + hi)
            ok = residuals(cone, mid @ a.T + shift) <= 0.0
            lo[ok] = mid[ok]
            hi[~ok] = mid[~ok]
        found = np.vstack([draws[inside], lo])
        points.append(found)
        subsets.append(np.full(found.shape[0], mask))
        fs.append(np.full(found.shape[0], fz))
    if not points:
        return None
    return np.vstack(points), np.concatenate(subsets), np.concatenate(fs)


def condition_star_falsify(
    blocks: Sequence[ConicBlock],
    functions: Sequence[SetFunctionSpec],
    config: FalsifierConfig = FalsifierConfig(),
    pins: Optional[Dict[int, float]] = None,
    tol: float = TOL_FEAS,
) -> FalsifyResult:
    """Search feasible (x, z) of each block and scalings alpha breaking cone membership.

    Samples are strictly feasible draws or boundary points found by bisection. With
    ``config.respect_equalities`` the pinned x columns are held at their values and a
    scaling that moves them off also counts as a witness. Within a block the smallest breaking
    alpha of the grid is reported.

    :param blocks: conic blocks, their y_index pointing into ``functions``
    :param functions: set functions of the model
    :param config: FalsifierConfig
    :param pins: x index -> value fixed by single-variable equality rows
    :param tol: residual above which a scaled point counts as outside
    :return: FalsifyResult
    """
    pins = pins or {}
    alphas = sorted(config.alphas)
    tested = 0
    for index, block in enumerate(blocks):
        rng = np.random.default_rng([config.seed, index])
        local_pins = {}
        if config.respect_equalities:
            local_pins = {col: pins[i] for col, i in enumerate(block.x_index) if i in pins}
        if block.y_index is None:
            masks, fvals = np.zeros(1, dtype=np.int64), np.zeros(1)
        else:
            f = functions[block.y_index]
            masks = _subset_masks(f.n, rng)
            fvals = f.on_rows(((masks[:, None] >> np.arange(f.n)) & 1).astype(np.int8))

        sample = _feasible_samples(block, masks, fvals, local_pins, config, rng)
        if sample is None:
            logger.info("block %d: no feasible sample found", index)
            return FalsifyResult(status=FalsifyStatus.Inconclusive, block=index, samples=tested)
        points, subsets, fs = sample
        tested += points.shape[0]

        a, b, c = block.a_matrix(), block.b_vector(), block.c_vector()
        shift = fs[:, None] * b + c
        for alpha in alphas:
            depth = residuals(block.cone, alpha * points @ a.T + shift)
            broken = depth > tol
            for col, val in local_pins.items():
                broken |= np.abs(alpha * points[:, col] - val) > tol
            hits = np.flatnonzero(broken)
            if not hits.size:
                continue
            row = int(hits[0])
            logger.info("block %d: scaling by %g leaves the cone", index, alpha)
            return FalsifyResult(
                status=FalsifyStatus.Witness,
                block=index,
                alpha=alpha,
                x=points[row].tolist(),
                z=members(int(subsets[row])),
                residual=float(depth[row]),
                samples=tested,
            )
        logger.debug("block %d: %d feasible samples survive every scaling", index, points.shape[0])
    return FalsifyResult(status=FalsifyStatus.NoneFound, samples=tested)
