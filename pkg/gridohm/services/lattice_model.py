import json
import math
import logging
from collections import defaultdict
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import networkx as nx
import numpy as np

from gridohm.exceptions import (
    DisconnectedLatticeError,
    InvalidSpecError,
    NonPositiveResistanceError,
    SelfLoopError,
    UnknownSiteError,
)
from gridohm.models.lattice import Bond, LatticeSpec, ResistanceQuery

logger = logging.getLogger(__name__)

DOCUMENT_FORMAT = 1

Offset = Tuple[int, ...]


def validate_and_canonicalize(raw: LatticeSpec) -> LatticeSpec:
    """Validate a lattice and return its canonical form.

    Parallel bonds are merged by adding conductances, each bond is stored in
    one orientation (a < b, or a lexicographically positive offset when
    a == b) and bonds are sorted. The result does not depend on the input
    bond order and canonicalizing it again returns an equal spec.
    """
    return _canonical(raw)


@lru_cache(maxsize=512)
def _canonical(raw: LatticeSpec) -> LatticeSpec:
    _check_header(raw)

    merged: Dict[Tuple[int, int, Offset], List[float]] = defaultdict(list)
    originals: Dict[Tuple[int, int, Offset], float] = {}
    for index, bond in enumerate(raw.bonds):
        _check_bond(raw, index, bond)
        key = _orient(bond.a, bond.b, bond.offset)
        merged[key].append(bond.conductance)
        originals[key] = bond.resistance

    bonds = []
    for key in sorted(merged):
        conductances = merged[key]
        if len(conductances) == 1:
            resistance = originals[key]
        else:
            resistance = 1.0 / math.fsum(conductances)
        a, b, offset = key
        bonds.append(Bond(a=a, b=b, offset=offset, resistance=resistance))

    spec = LatticeSpec(dimension=raw.dimension, sites=raw.sites, bonds=tuple(bonds))
    _check_connected(spec)
    return spec


def _check_header(spec: LatticeSpec) -> None:
    if spec.dimension < 1:
        raise InvalidSpecError(f"dimension must be positive, got {spec.dimension}")
    if spec.p < 1:
        raise InvalidSpecError("a lattice needs at least one site")
    if len(set(spec.sites)) != spec.p:
        raise InvalidSpecError("site names must be unique", {"sites": list(spec.sites)})


def _check_bond(spec: LatticeSpec, index: int, bond: Bond) -> None:
    details = {"bond": index}
    for site in (bond.a, bond.b):
        if not 0 <= site < spec.p:
            raise UnknownSiteError(f"bond {index} references unknown site {site}", details)
    if len(bond.offset) != spec.dimension:
        raise InvalidSpecError(
            f"bond {index} offset has length {len(bond.offset)}, expected {spec.dimension}",
            details,
        )
    positive = math.isfinite(bond.resistance) and bond.resistance > 0
    if not (positive and math.isfinite(bond.conductance)):
        raise NonPositiveResistanceError(
            f"bond {index} has resistance {bond.resistance}; it must be positive with a finite conductance",
            details,
        )
    if bond.a == bond.b and not any(bond.offset):
        raise SelfLoopError(f"bond {index} joins site {bond.a} to itself in the same cell", details)


def _orient(a: int, b: int, offset: Sequence[int]) -> Tuple[int, int, Offset]:
    offset = tuple(int(v) for v in offset)
    if a > b:
        return b, a, tuple(-v for v in offset)
    if a == b:
        leading = next(v for v in offset if v != 0)
        if leading < 0:
            return a, b, tuple(-v for v in offset)
    return a, b, offset


def _check_connected(spec: LatticeSpec) -> None:
    graph = nx.MultiGraph()
    graph.add_nodes_from(range(spec.p))
    for index, bond in enumerate(spec.bonds):
        graph.add_edge(bond.a, bond.b, key=index)

    if not nx.is_connected(graph):
        components = [sorted(c) for c in nx.connected_components(graph)]
        raise DisconnectedLatticeError(
            "the unit-cell sites do not form one connected graph",
            {"components": components},
        )

    # Cell of each site along a BFS spanning tree of the quotient graph
    position = {0: np.zeros(spec.dimension, dtype=np.int64)}
    for u, v in nx.bfs_edges(graph, 0):
        key = next(iter(graph[u][v]))
        bond = spec.bonds[key]
        step = np.asarray(bond.offset, dtype=np.int64)
        position[v] = position[u] + step if bond.a == u else position[u] - step

    cycles = []
    for bond in spec.bonds:
        winding = position[bond.a] + np.asarray(bond.offset, dtype=np.int64) - position[bond.b]
        if winding.any():
            cycles.append([int(v) for v in winding])

    if not _spans_integer_lattice(cycles, spec.dimension):
        raise DisconnectedLatticeError(
            f"bond offsets do not generate the full {spec.dimension}-dimensional integer lattice",
            {"cycles": cycles},
        )


def _spans_integer_lattice(vectors: List[List[int]], dimension: int) -> bool:
    """Row-reduce the integer vectors by gcd steps; they span Z^d iff the
    echelon form has d pivots whose product is one."""
    rows = [list(v) for v in vectors]
    rank = 0
    index = 1
    for col in range(dimension):
        while True:
            candidates = [i for i in range(rank, len(rows)) if rows[i][col] != 0]
            if not candidates:
                return False
            pivot = min(candidates, key=lambda i: abs(rows[i][col]))
            rows[rank], rows[pivot] = rows[pivot], rows[rank]
            reduced = True
            for i in range(rank + 1, len(rows)):
                q = rows[i][col] // rows[rank][col]
                if q:
                    rows[i] = [x - q * y for x, y in zip(rows[i], rows[rank])]
                if rows[i][col] != 0:
                    reduced = False
            if reduced:
                break
        index *= abs(rows[rank][col])
        rank += 1
    return index == 1


def weighted_degree(spec: LatticeSpec, site: int) -> float:
    """Total conductance incident to a site; a bond from a site to its own
    image in another cell counts at both ends."""
    spec = validate_and_canonicalize(spec)
    if not 0 <= site < spec.p:
        raise UnknownSiteError(f"site {site} does not exist (p={spec.p})")
    terms = []
    for bond in spec.bonds:
        if bond.a == site:
            terms.append(bond.conductance)
        if bond.b == site:
            terms.append(bond.conductance)
    return math.fsum(terms)


def real_space_stencil(spec: LatticeSpec) -> Dict[Offset, np.ndarray]:
    """Blocks L(r) of the Kirchhoff operator sum_r' L(r - r') V(r') = -I(r).

    L_ab(r) is the conductance joining (a, cell r) and (b, cell 0); the
    diagonal of L(0) carries minus the weighted degrees, and L(r) == L(-r).T.
    """
    offsets, blocks = stencil_arrays(spec)
    return {tuple(int(v) for v in r): blocks[k].copy() for k, r in enumerate(offsets)}


@lru_cache(maxsize=512)
def stencil_arrays(spec: LatticeSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Stencil as (offsets (K, d) int array, blocks (K, p, p) float array)"""
    spec = validate_and_canonicalize(spec)
    p, d = spec.p, spec.dimension
    zero = (0,) * d
    blocks: Dict[Offset, np.ndarray] = {zero: np.zeros((p, p))}

    def block(r: Offset) -> np.ndarray:
        if r not in blocks:
            blocks[r] = np.zeros((p, p))
        return blocks[r]

    for bond in spec.bonds:
        g = bond.conductance
        s = bond.offset
        minus_s = tuple(-v for v in s)
        block(minus_s)[bond.a, bond.b] += g
        block(s)[bond.b, bond.a] += g
        block(zero)[bond.a, bond.a] -= g
        block(zero)[bond.b, bond.b] -= g

    keys = sorted(blocks)
    offsets = np.array(keys, dtype=np.int64).reshape(len(keys), d)
    stacked = np.stack([blocks[k] for k in keys])
    offsets.setflags(write=False)
    stacked.setflags(write=False)
    return offsets, stacked


def relabel_sites(spec: LatticeSpec, order: Sequence[int]) -> LatticeSpec:
    """New site i is old site order[i]"""
    spec = validate_and_canonicalize(spec)
    if sorted(order) != list(range(spec.p)):
        raise InvalidSpecError(f"{list(order)} is not a permutation of the {spec.p} sites")
    new_index = {old: new for new, old in enumerate(order)}
    bonds = [
        Bond(a=new_index[b.a], b=new_index[b.b], offset=b.offset, resistance=b.resistance)
        for b in spec.bonds
    ]
    sites = tuple(spec.sites[old] for old in order)
    return validate_and_canonicalize(
        LatticeSpec(dimension=spec.dimension, sites=sites, bonds=tuple(bonds))
    )


def relabel_query(query: ResistanceQuery, order: Sequence[int]) -> ResistanceQuery:
    new_index = {old: new for new, old in enumerate(order)}
    return ResistanceQuery.between(new_index[query.alpha], new_index[query.beta], query.offset)


def rebase_sites(spec: LatticeSpec, shifts: Sequence[Sequence[int]]) -> LatticeSpec:
    """Move every site j to another cell: old node (j, c) becomes (j, c - shifts[j])"""
    spec = validate_and_canonicalize(spec)
    t = [np.asarray(s, dtype=np.int64) for s in shifts]
    bonds = []
    for b in spec.bonds:
        offset = np.asarray(b.offset, dtype=np.int64) + t[b.a] - t[b.b]
        bonds.append(Bond(a=b.a, b=b.b, offset=tuple(int(v) for v in offset), resistance=b.resistance))
    return validate_and_canonicalize(
        LatticeSpec(dimension=spec.dimension, sites=spec.sites, bonds=tuple(bonds))
    )


def rebase_query(query: ResistanceQuery, shifts: Sequence[Sequence[int]]) -> ResistanceQuery:
    offset = (
        np.asarray(query.offset, dtype=np.int64)
        + np.asarray(shifts[query.alpha], dtype=np.int64)
        - np.asarray(shifts[query.beta], dtype=np.int64)
    )
    return ResistanceQuery.between(query.alpha, query.beta, offset)


def lattice_to_document(spec: LatticeSpec) -> Dict[str, Any]:
    spec = validate_and_canonicalize(spec)
    return {
        "format": DOCUMENT_FORMAT,
        "dimension": spec.dimension,
        "sites": list(spec.sites),
        "bonds": [
            {
                "from": spec.sites[b.a],
                "to": spec.sites[b.b],
                "offset": list(b.offset),
                "resistance": b.resistance,
            }
            for b in spec.bonds
        ],
    }


def lattice_from_document(doc: Dict[str, Any]) -> LatticeSpec:
    """Build and validate a lattice from its JSON document form.

    Sites are referenced by name; `resistance` defaults to 1.0.
    """
    if not isinstance(doc, dict):
        raise InvalidSpecError("a lattice document must be a JSON object")
    version = doc.get("format", DOCUMENT_FORMAT)
    if version != DOCUMENT_FORMAT:
        raise InvalidSpecError(f"unsupported lattice document format {version!r}")
    try:
        dimension = _as_int(doc["dimension"], "dimension")
        if not isinstance(doc["sites"], list):
            raise TypeError("sites must be a list of names")
        sites = tuple(str(s) for s in doc["sites"])
        raw_bonds = list(doc.get("bonds", []))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidSpecError(f"malformed lattice document: {e}")

    index = {name: i for i, name in enumerate(sites)}
    bonds = []
    for i, entry in enumerate(raw_bonds):
        try:
            a_name, b_name = entry["from"], entry["to"]
            offset = tuple(_as_int(v, "offset component") for v in entry["offset"])
            resistance = float(entry.get("resistance", 1.0))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidSpecError(f"malformed bond {i}: {e}", {"bond": i})
        for name in (a_name, b_name):
            if name not in index:
                raise UnknownSiteError(f"bond {i} references unknown site {name!r}", {"bond": i})
        bonds.append(Bond(a=index[a_name], b=index[b_name], offset=offset, resistance=resistance))

    raw = LatticeSpec(dimension=dimension, sites=sites, bonds=tuple(bonds))
    return validate_and_canonicalize(raw)


def _as_int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not float(value).is_integer():
        raise ValueError(f"{what} {value!r} is not an integer")
    return int(value)


def canonical_json(spec: LatticeSpec) -> str:
    return json.dumps(lattice_to_document(spec), sort_keys=True, separators=(",", ":"))


def load_lattice(path: str) -> LatticeSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidSpecError(f"cannot read lattice document {path}: {e}")
    except UnicodeDecodeError as e:
        raise InvalidSpecError(f"lattice document {path} is not valid UTF-8: {e}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidSpecError(f"lattice document {path} is not valid JSON: {e}")
    logger.info(f"Loaded lattice document {path}")
    return lattice_from_document(doc)


def dump_lattice(spec: LatticeSpec, path: str) -> None:
    Path(path).write_text(canonical_json(spec) + "\n", encoding="utf-8")
