from enum import Enum
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from gridohm.models.results import QuadratureConfig


class Engine(str, Enum):
    SPECTRAL = "spectral"
    TORUS = "torus"
    MAPPING = "mapping"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    TEXT = "text"


class RunRequest(BaseModel):
    """A computation as requested on the command line.

    Sites are 0-based here; the CLI converts from the 1-based labels users type.
    """

    model_config = ConfigDict(frozen=True)

    lattice: Optional[str] = None
    spec_path: Optional[str] = None
    params: Dict[str, float] = {}
    source: Optional[int] = None
    target: Optional[int] = None
    offset: Optional[Tuple[int, ...]] = None
    engine: Engine = Engine.SPECTRAL
    quadrature: QuadratureConfig = QuadratureConfig()
    torus_sizes: Optional[Tuple[int, ...]] = None
    max_offset: int = 0
    orders: Tuple[int, ...] = ()
    sizes: Tuple[int, ...] = ()
    output: OutputFormat = OutputFormat.JSON
    timing: bool = False

    @model_validator(mode="after")
    def _one_lattice_source(self) -> "RunRequest":
        if (self.lattice is None) == (self.spec_path is None):
            raise ValueError("give exactly one of a catalog lattice name or a spec file")
        if self.max_offset < 0:
            raise ValueError("max_offset must not be negative")
        return self

    @property
    def has_query(self) -> bool:
        return None not in (self.source, self.target, self.offset)


class CommandResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    output: str
    exit_code: int = 0
