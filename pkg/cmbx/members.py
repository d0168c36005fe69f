from enum import Enum
from typing import Dict, Tuple

from pydantic import BaseModel, Field


class ConeTag(Enum):
    NonnegOrthant = "nonneg"
    Soc = "soc"
    RotatedSoc = "rsoc"
    POrder = "porder"


class Criterion(Enum):
    AIC = "aic"
    BIC = "bic"
    AICc = "aicc"


class Extremum(Enum):
    Max = "max"
    Min = "min"


class Sense(Enum):
    LE = "<="
    EQ = "=="
    GE = ">="


class StarPattern(Enum):
    """Outcome of the structural scaling-closure check of a conic block."""

    ZeroB = "P0"
    EpigraphRow = "P1"
    SignedPair = "P2"
    Unknown = "unknown"

    @property
    def holds(self) -> bool:
        return self is not StarPattern.Unknown


class FalsifyStatus(Enum):
    Witness = "witness"
    NoneFound = "none_found"
    Inconclusive = "inconclusive"


class DecompositionStatus(Enum):
    Decomposed = "decomposed"
    NoneFound = "none_found"


class LpStatus(Enum):
    Optimal = "optimal"
    Infeasible = "infeasible"
    Unbounded = "unbounded"
    IterationLimit = "iteration_limit"
    Numerical = "numerical"


class SolveStatus(Enum):
    Optimal = "optimal"
    Infeasible = "infeasible"
    CapHit = "cap_hit"
    NodeLimit = "node_limit"
    Numerical = "numerical"


class ProblemFamily(Enum):
    H = "H"
    R = "R"
    M = "M"
    Fractional = "fractional"
    BSS = "bss"
    DRCCP = "drccp"
    Example1 = "example1"
    Custom = "custom"


class SolveMode(Enum):
    Relax = "relax"
    Exact = "exact"
    BnB = "bnb"


class Tolerances(BaseModel):
    feas: float = Field(1e-7, gt=0)
    opt: float = Field(1e-6, gt=0)
    pivot: float = Field(1e-9, gt=0)
    integrality: float = Field(1e-6, gt=0)


class SolverOptions(BaseModel):
    tolerances: Tolerances = Tolerances()
    max_iterations: int = Field(10_000, gt=0)
    max_nodes: int = Field(10_000, gt=0)
    polymatroid_cuts: bool = True
    trace: bool = False
    # upper end of the artificial box on every epigraph variable y_j
    y_upper: float = Field(1e3, gt=0)


class FalsifierConfig(BaseModel):
    alphas: Tuple[float, ...] = (1.1, 2.0, 10.0, 100.0)
    samples: int = Field(10_000, gt=0)
    seed: int = 0
    box: float = Field(10.0, gt=0)
    bisection_steps: int = Field(50, gt=0)
    respect_equalities: bool = False


class DecompositionOptions(BaseModel):
    grid: int = Field(3, ge=1)
    step: float = Field(1e-2, gt=0)
    seed: int = 0
    max_evaluations: int = Field(2_000, gt=0)


class LinearConstraint(BaseModel):
    """Sparse row over the (x, y, z) blocks: sum of coefficients times variables, sense, rhs."""

    x: Dict[int, float] = {}
    y: Dict[int, float] = {}
    z: Dict[int, float] = {}
    sense: Sense = Sense.LE
    rhs: float = 0.0

    @property
    def binary_only(self) -> bool:
        return not self.x and not self.y
