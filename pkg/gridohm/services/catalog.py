"""Built-in lattices.

Site order and bond offsets are fixed so that the generated L(x) equals the
closed-form matrix stored with each entry. Sites are 0-based here; the CLI
shows them 1-based.
"""

import logging
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from gridohm.exceptions import InvalidSpecError, UnknownLatticeError
from gridohm.models.lattice import Bond, LatticeSpec
from gridohm.models.results import CatalogEntry
from gridohm.services.lattice_model import validate_and_canonicalize

logger = logging.getLogger(__name__)

BondRow = Tuple[int, int, Tuple[int, ...]]


def _e(x: np.ndarray, *coefficients: int) -> complex:
    """exp(i sum_j c_j x_j)"""
    return np.exp(1j * np.dot(coefficients, x[: len(coefficients)]))


def _build(dimension: int, sites: Sequence[str], rows: Sequence[BondRow], resistance: float) -> LatticeSpec:
    bonds = tuple(Bond(a=a, b=b, offset=s, resistance=resistance) for a, b, s in rows)
    return validate_and_canonicalize(
        LatticeSpec(dimension=dimension, sites=tuple(sites), bonds=bonds)
    )


def _chain2(r1: float, r2: float) -> CatalogEntry:
    spec = validate_and_canonicalize(
        LatticeSpec(
            dimension=1,
            sites=("1", "2"),
            bonds=(
                Bond(a=0, b=1, offset=(0,), resistance=r1),
                Bond(a=1, b=0, offset=(1,), resistance=r2),
            ),
        )
    )
    g1, g2 = 1.0 / r1, 1.0 / r2

    def reference(x: np.ndarray) -> np.ndarray:
        off = g1 + g2 * _e(x, -1)
        return np.array([[-g1 - g2, off], [np.conj(off), -g1 - g2]])

    return CatalogEntry(
        name="chain2",
        spec=spec,
        citation="chain",
        description="one-dimensional chain of two alternating resistors R1, R2",
        reference_laplacian=reference,
    )


def _square(r: float) -> CatalogEntry:
    spec = _build(2, ["1"], [(0, 0, (1, 0)), (0, 0, (0, 1))], r)

    def reference(x: np.ndarray) -> np.ndarray:
        return np.array([[(-4 + 2 * np.cos(x[0]) + 2 * np.cos(x[1])) / r]], dtype=complex)

    return CatalogEntry(
        name="square",
        spec=spec,
        citation="classics",
        description="square lattice, coordination 4",
        reference_laplacian=reference,
    )


def _triangular(r: float) -> CatalogEntry:
    spec = _build(2, ["1"], [(0, 0, (1, 0)), (0, 0, (0, 1)), (0, 0, (1, -1))], r)

    def reference(x: np.ndarray) -> np.ndarray:
        value = -6 + 2 * (np.cos(x[0]) + np.cos(x[1]) + np.cos(x[0] - x[1]))
        return np.array([[value / r]], dtype=complex)

    return CatalogEntry(
        name="triangular",
        spec=spec,
        citation="classics",
        description="triangular lattice, 60 degree cell, coordination 6",
        reference_laplacian=reference,
    )


def _honeycomb(r: float) -> CatalogEntry:
    spec = _build(2, ["1", "2"], [(0, 1, (0, 0)), (0, 1, (-1, 0)), (0, 1, (0, -1))], r)

    def reference(x: np.ndarray) -> np.ndarray:
        a = 1 + _e(x, 1, 0) + _e(x, 0, 1)
        return np.array([[-3, np.conj(a)], [a, -3]]) / r

    return CatalogEntry(
        name="honeycomb",
        spec=spec,
        citation="classics",
        description="honeycomb lattice, brick-wall cell, coordination 3",
        reference_laplacian=reference,
    )


def _kagome(r: float) -> CatalogEntry:
    rows = [
        (0, 1, (0, 0)), (0, 1, (-1, 0)),
        (0, 2, (0, 0)), (0, 2, (0, -1)),
        (1, 2, (0, 0)), (1, 2, (1, -1)),
    ]
    spec = _build(2, ["1", "2", "3"], rows, r)

    def reference(x: np.ndarray) -> np.ndarray:
        l12 = 1 + _e(x, -1, 0)
        l13 = 1 + _e(x, 0, -1)
        l23 = 1 + _e(x, 1, -1)
        return np.array(
            [
                [-4, l12, l13],
                [np.conj(l12), -4, l23],
                [np.conj(l13), np.conj(l23), -4],
            ]
        ) / r

    return CatalogEntry(
        name="kagome",
        spec=spec,
        citation="kagome",
        description="kagome lattice of corner-sharing triangles, 3 sites per cell",
        reference_laplacian=reference,
    )


def _dice(r: float) -> CatalogEntry:
    rows = [
        (0, 1, (0, 0)), (0, 1, (-1, 0)), (0, 1, (0, -1)),
        (0, 2, (-1, 0)), (0, 2, (0, -1)), (0, 2, (-1, -1)),
    ]
    spec = _build(2, ["1", "2", "3"], rows, r)

    def reference(x: np.ndarray) -> np.ndarray:
        a = 1 + _e(x, 1, 0) + _e(x, 0, 1)
        b = _e(x, 1, 0) + _e(x, 0, 1) + _e(x, 1, 1)
        return np.array(
            [
                [-6, np.conj(a), np.conj(b)],
                [a, -3, 0],
                [b, 0, -3],
            ]
        ) / r

    return CatalogEntry(
        name="dice",
        spec=spec,
        citation="dice",
        description="dice (rhombille) lattice, hub of degree 6 and two rims of degree 3",
        reference_laplacian=reference,
    )


def _decorated(r: float) -> CatalogEntry:
    rows = [(0, 1, (0, 0)), (0, 1, (-1, 0)), (0, 2, (0, 0)), (0, 2, (0, -1))]
    spec = _build(2, ["1", "2", "3"], rows, r)

    def reference(x: np.ndarray) -> np.ndarray:
        l12 = 1 + _e(x, -1, 0)
        l13 = 1 + _e(x, 0, -1)
        return np.array(
            [
                [-4, l12, l13],
                [np.conj(l12), -2, 0],
                [np.conj(l13), 0, -2],
            ]
        ) / r

    return CatalogEntry(
        name="decorated",
        spec=spec,
        citation="decorated",
        description="decorated square lattice, one extra site on every bond",
        reference_laplacian=reference,
    )


def _centered_square(r: float) -> CatalogEntry:
    rows = [
        (0, 0, (1, 0)), (0, 0, (0, 1)),
        (0, 1, (0, 0)), (0, 1, (-1, 0)), (0, 1, (0, -1)), (0, 1, (-1, -1)),
    ]
    spec = _build(2, ["1", "2"], rows, r)

    def reference(x: np.ndarray) -> np.ndarray:
        a = -8 + 2 * (np.cos(x[0]) + np.cos(x[1]))
        b = (1 + _e(x, 1, 0)) * (1 + _e(x, 0, 1))
        return np.array([[a, np.conj(b)], [b, -4]]) / r

    return CatalogEntry(
        name="centered-square",
        spec=spec,
        citation="centered-square",
        description="centered square lattice, corner sites of degree 8 and centers of degree 4",
        reference_laplacian=reference,
    )


def _square_octagon(r: float) -> CatalogEntry:
    rows = [
        (0, 1, (0, 0)), (0, 2, (-1, 0)), (0, 3, (0, 0)),
        (1, 2, (0, 0)), (1, 3, (0, -1)), (2, 3, (0, 0)),
    ]
    spec = _build(2, ["1", "2", "3", "4"], rows, r)

    def reference(x: np.ndarray) -> np.ndarray:
        a = _e(x, 1, 0)
        b = _e(x, 0, 1)
        return np.array(
            [
                [-3, 1, np.conj(a), 1],
                [1, -3, 1, np.conj(b)],
                [a, 1, -3, 1],
                [1, b, 1, -3],
            ]
        ) / r

    return CatalogEntry(
        name="square-octagon",
        spec=spec,
        citation="square-octagon",
        description="square-octagon tiling 4.8.8, 4 sites per cell",
        reference_laplacian=reference,
    )


def _snub_square(r: float) -> CatalogEntry:
    rows = [
        (0, 1, (-1, 0)), (0, 2, (0, 0)), (0, 3, (0, -1)), (0, 4, (0, 0)), (0, 6, (0, -1)),
        (1, 2, (1, 0)), (1, 3, (1, -1)), (1, 4, (0, 0)), (1, 6, (0, -1)),
        (2, 3, (0, 0)), (2, 5, (-1, 0)), (2, 7, (0, 0)),
        (3, 5, (-1, 0)), (3, 7, (0, 0)),
        (4, 5, (0, 0)), (4, 6, (0, -1)), (4, 7, (0, 0)),
        (5, 6, (0, 0)), (5, 7, (0, 0)),
        (6, 7, (0, 0)),
    ]
    spec = _build(2, [str(i) for i in range(1, 9)], rows, r)

    def reference(x: np.ndarray) -> np.ndarray:
        a = _e(x, 1, 0)
        b = _e(x, 0, 1)
        c = _e(x, -1, 1)
        ac, bc, cc = np.conj(a), np.conj(b), np.conj(c)
        return np.array(
            [
                [-5, ac, 1, bc, 1, 0, bc, 0],
                [a, -5, a, cc, 1, 0, bc, 0],
                [1, ac, -5, 1, 0, ac, 0, 1],
                [b, c, 1, -5, 0, ac, 0, 1],
                [1, 1, 0, 0, -5, 1, bc, 1],
                [0, 0, a, a, 1, -5, 1, 1],
                [b, b, 0, 0, b, 1, -5, 1],
                [0, 0, 1, 1, 1, 1, 1, -5],
            ]
        ) / r

    return CatalogEntry(
        name="snub-square",
        spec=spec,
        citation="snub-square",
        description="snub square tiling 3.3.4.3.4, 8 sites per cell",
        reference_laplacian=reference,
    )


def _cubic(r: float) -> CatalogEntry:
    spec = _build(3, ["1"], [(0, 0, (1, 0, 0)), (0, 0, (0, 1, 0)), (0, 0, (0, 0, 1))], r)

    def reference(x: np.ndarray) -> np.ndarray:
        return np.array([[(-6 + 2 * np.cos(x).sum()) / r]], dtype=complex)

    return CatalogEntry(
        name="cubic",
        spec=spec,
        citation="classics",
        description="simple cubic lattice, coordination 6",
        reference_laplacian=reference,
    )


def _bcc(r: float) -> CatalogEntry:
    rows: List[BondRow] = [(0, 0, (1, 0, 0)), (0, 0, (0, 1, 0)), (0, 0, (0, 0, 1))]
    for s1 in (0, 1):
        for s2 in (0, 1):
            for s3 in (0, 1):
                rows.append((0, 1, (-s1, -s2, -s3)))
    spec = _build(3, ["1", "2"], rows, r)

    def reference(x: np.ndarray) -> np.ndarray:
        a = 2 * np.cos(x).sum()
        b = (1 + _e(x, 1, 0, 0)) * (1 + _e(x, 0, 1, 0)) * (1 + _e(x, 0, 0, 1))
        return np.array([[a - 14, np.conj(b)], [b, -8]]) / r

    return CatalogEntry(
        name="bcc",
        spec=spec,
        citation="bcc",
        description="body-centered cubic lattice with cube edges, corners of degree 14 and centers of degree 8",
        reference_laplacian=reference,
    )


# name -> (builder, dimension, p)
_BUILDERS: Dict[str, Tuple[Callable[..., CatalogEntry], int, int]] = {
    "chain2": (_chain2, 1, 2),
    "square": (_square, 2, 1),
    "triangular": (_triangular, 2, 1),
    "honeycomb": (_honeycomb, 2, 2),
    "kagome": (_kagome, 2, 3),
    "dice": (_dice, 2, 3),
    "decorated": (_decorated, 2, 3),
    "centered-square": (_centered_square, 2, 2),
    "square-octagon": (_square_octagon, 2, 4),
    "snub-square": (_snub_square, 2, 8),
    "cubic": (_cubic, 3, 1),
    "bcc": (_bcc, 3, 2),
}


def _resistance(params: Mapping[str, float], key: str) -> float:
    value = float(params.get(key, 1.0))
    if not (np.isfinite(value) and value > 0):
        raise InvalidSpecError(f"parameter {key}={value} must be positive and finite")
    return value


def builtin(name: str, params: Optional[Mapping[str, float]] = None) -> CatalogEntry:
    """Look up a catalog lattice.

    `params` takes `R` (uniform bond resistance) for every lattice, and
    `R1`, `R2` for chain2.
    """
    if name not in _BUILDERS:
        raise UnknownLatticeError(f"unknown lattice {name!r}", {"known": list(_BUILDERS)})
    params = dict(params or {})
    builder = _BUILDERS[name][0]
    allowed = {"R1", "R2"} if name == "chain2" else {"R"}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise InvalidSpecError(
            f"lattice {name!r} does not take parameters {unknown}", {"allowed": sorted(allowed)}
        )
    if name == "chain2":
        return builder(_resistance(params, "R1"), _resistance(params, "R2"))
    return builder(_resistance(params, "R"))


def list_catalog() -> List[Tuple[str, int, int, str]]:
    """(name, d, p, citation) for every entry, in a fixed order"""
    return [(name, d, p, builtin(name).citation) for name, (_, d, p) in _BUILDERS.items()]
