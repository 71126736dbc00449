from typing import Any, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Bond(BaseModel):
    """One resistor: joins (a, cell c) to (b, cell c + offset)"""

    model_config = ConfigDict(frozen=True)

    a: int
    b: int
    offset: Tuple[int, ...]
    resistance: float = 1.0

    @property
    def conductance(self) -> float:
        return 1.0 / self.resistance


class LatticeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    dimension: int
    sites: Tuple[str, ...]
    bonds: Tuple[Bond, ...] = ()

    @property
    def p(self) -> int:
        return len(self.sites)

    def site_index(self, name: str) -> int:
        return self.sites.index(name)


class NodeRef(BaseModel):
    model_config = ConfigDict(frozen=True)

    site: int
    cell: Tuple[int, ...]


class ResistanceQuery(BaseModel):
    """Ordered pair of nodes; the source is always pinned to cell 0.

    Queries built between arbitrary cells are rebased on construction, so
    `offset` is the cell of the target relative to the source.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    source: NodeRef = Field(alias="from")
    target: NodeRef = Field(alias="to")

    @model_validator(mode="before")
    @classmethod
    def _pin_source_cell(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        src_key = "source" if "source" in data else "from"
        dst_key = "target" if "target" in data else "to"
        if src_key not in data or dst_key not in data:
            return data
        source = NodeRef.model_validate(data[src_key])
        target = NodeRef.model_validate(data[dst_key])
        if len(source.cell) != len(target.cell):
            raise ValueError("source and target cells have different lengths")
        data[src_key] = NodeRef(site=source.site, cell=(0,) * len(source.cell))
        data[dst_key] = NodeRef(
            site=target.site,
            cell=tuple(t - s for t, s in zip(target.cell, source.cell)),
        )
        return data

    @classmethod
    def between(cls, alpha: int, beta: int, offset) -> "ResistanceQuery":
        offset = tuple(int(v) for v in offset)
        return cls(
            source=NodeRef(site=alpha, cell=(0,) * len(offset)),
            target=NodeRef(site=beta, cell=offset),
        )

    @property
    def alpha(self) -> int:
        return self.source.site

    @property
    def beta(self) -> int:
        return self.target.site

    @property
    def offset(self) -> Tuple[int, ...]:
        return self.target.cell

    @property
    def is_trivial(self) -> bool:
        return self.alpha == self.beta and not any(self.offset)

    def reversed(self) -> "ResistanceQuery":
        """(alpha, 0) -> (beta, n) becomes (beta, 0) -> (alpha, -n)"""
        return ResistanceQuery.between(self.beta, self.alpha, tuple(-v for v in self.offset))
