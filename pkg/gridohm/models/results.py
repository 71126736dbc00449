from datetime import datetime
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from gridohm.models.lattice import LatticeSpec, ResistanceQuery

# Default midpoint orders per dimension
DEFAULT_ORDERS = {1: 4096, 2: 256, 3: 64}


class QuadratureConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    order: Optional[int] = None
    refinement_factor: int = 2
    max_refinements: int = 3
    target_relative_error: float = 1e-5
    strict: bool = False

    @model_validator(mode="after")
    def _check_ranges(self) -> "QuadratureConfig":
        if self.order is not None and (self.order < 2 or self.order % 2):
            raise ValueError(f"quadrature order must be even and at least 2, got {self.order}")
        if self.refinement_factor < 2:
            raise ValueError("refinement_factor must be at least 2")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be at least 1 to estimate the error")
        if not self.target_relative_error > 0:
            raise ValueError("target_relative_error must be positive")
        return self

    def initial_order(self, dimension: int) -> int:
        if self.order is not None:
            return self.order
        return DEFAULT_ORDERS.get(dimension, 32)


class SpectralSample(BaseModel):
    """L(x) at one point of the hypercube, in conductance units"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: Tuple[float, ...]
    matrix: np.ndarray


class ResistanceResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    error_estimate: float = 0.0
    order_used: int = 0
    evaluations: int = 0
    converged: bool = True
    wall_time: float = 0.0
    query: Optional[ResistanceQuery] = None


class TorusConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    sizes: Tuple[int, ...]

    @property
    def cells(self) -> int:
        return int(np.prod(self.sizes))


class MappedResistance(BaseModel):
    model_config = ConfigDict(frozen=True)

    lattice: str
    alpha: int
    beta: int
    m: int
    n: int
    value: float
    error_estimate: float = 0.0
    constant: float = 0.0
    terms: Tuple[Tuple[Tuple[int, int], float], ...] = ()


class CatalogEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    spec: LatticeSpec
    # verification group that holds the reference values
    citation: str
    description: str = ""
    reference_laplacian: Callable[[np.ndarray], np.ndarray]


class CheckStatus(str, Enum):
    PENDING = "pending"
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"


class CheckResult(BaseModel):
    name: str
    group: str
    citation: str = ""
    expected: Optional[float] = None
    observed: Optional[float] = None
    tolerance: Optional[float] = None
    status: CheckStatus = CheckStatus.PENDING
    error_message: Optional[str] = None


class VerificationReport(BaseModel):
    format: int = 1
    profile: str
    started_at: datetime = Field(default_factory=datetime.now)
    checks: List[CheckResult] = []

    @property
    def passed(self) -> int:
        return sum(1 for c in self.checks if c.status == CheckStatus.PASSED)

    @property
    def failed(self) -> int:
        return len(self.checks) - self.passed

    @property
    def ok(self) -> bool:
        return bool(self.checks) and self.failed == 0
