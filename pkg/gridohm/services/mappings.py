import logging
import threading
from typing import Dict, Iterable, List, Optional, Set, Tuple

from gridohm.exceptions import InvalidQueryError, UnknownLatticeError
from gridohm.models.lattice import ResistanceQuery
from gridohm.models.results import MappedResistance, QuadratureConfig, ResistanceResult
from gridohm.services.catalog import builtin
from gridohm.services.spectral_engine import SpectralEngine, spectral_engine

logger = logging.getLogger(__name__)

# Reference resistances feed into linear combinations, so they are computed tighter
REFERENCE_QUADRATURE = QuadratureConfig(target_relative_error=1e-6, max_refinements=4)

Index = Tuple[int, int]
# (alpha, beta) -> (constant in units of R, ((dm, dn), coefficient) terms)
Formula = Tuple[float, Tuple[Tuple[Index, float], ...]]

_KAGOME: Dict[Index, Formula] = {
    (0, 0): (1 / 9, (((0, 0), 7 / 3), ((-1, 1), -1 / 6), ((1, -1), -1 / 6))),
    (0, 1): (1 / 9, (((0, 0), 5 / 6), ((1, 0), 5 / 6), ((1, -1), 1 / 6), ((0, 1), 1 / 6))),
    (0, 2): (1 / 9, (((0, 0), 5 / 6), ((0, 1), 5 / 6), ((1, 0), 1 / 6), ((-1, 1), 1 / 6))),
    (1, 1): (1 / 9, (((0, 0), 7 / 3), ((0, -1), -1 / 6), ((0, 1), -1 / 6))),
    (1, 2): (1 / 9, (((0, 0), 5 / 6), ((-1, 1), 5 / 6), ((-1, 0), 1 / 6), ((0, 1), 1 / 6))),
    (2, 2): (1 / 9, (((0, 0), 7 / 3), ((-1, 0), -1 / 6), ((1, 0), -1 / 6))),
}

# The (1, 1) and (2, 2) constants only apply away from m = n = 0
_DICE: Dict[Index, Formula] = {
    (0, 0): (0.0, (((0, 0), 3 / 2),)),
    (0, 1): (1 / 6, (((0, 0), 1 / 2), ((1, 0), 1 / 2), ((0, 1), 1 / 2))),
    (0, 2): (1 / 6, (((1, 0), 1 / 2), ((0, 1), 1 / 2), ((1, 1), 1 / 2))),
    (1, 1): (1 / 3, (((0, 0), 3 / 2),)),
    (1, 2): (
        1 / 3,
        (
            ((0, 0), 1 / 3), ((1, 0), 1 / 3), ((0, 1), 1 / 3),
            ((-1, 1), 1 / 6), ((1, -1), 1 / 6), ((1, 1), 1 / 6),
        ),
    ),
    (2, 2): (1 / 3, (((0, 0), 3 / 2),)),
}
_DICE_ORIGIN_FREE = {(1, 1), (2, 2)}

_DECORATED: Dict[Index, Formula] = {
    (0, 0): (0.0, (((0, 0), 2.0),)),
    (0, 1): (1 / 4, (((0, 0), 1.0), ((1, 0), 1.0))),
    (0, 2): (1 / 4, (((0, 0), 1.0), ((0, 1), 1.0))),
    (1, 1): (1 / 2, (((0, 0), 3.0), ((0, -1), -1 / 2), ((0, 1), -1 / 2))),
    (1, 2): (1 / 2, (((0, 0), 1 / 2), ((-1, 0), 1 / 2), ((-1, 1), 1 / 2), ((0, 1), 1 / 2))),
    (2, 2): (1 / 2, (((0, 0), 3.0), ((-1, 0), -1 / 2), ((1, 0), -1 / 2))),
}

# lattice -> (reference lattice, formulas)
MAPPINGS: Dict[str, Tuple[str, Dict[Index, Formula]]] = {
    "kagome": ("triangular", _KAGOME),
    "dice": ("triangular", _DICE),
    "decorated": ("square", _DECORATED),
}


def _square_images(m: int, n: int) -> Set[Index]:
    images = set()
    for a, b in ((m, n), (n, m)):
        for sa in (1, -1):
            for sb in (1, -1):
                images.add((sa * a, sb * b))
    return images


def _triangular_images(m: int, n: int) -> Set[Index]:
    """Orbit under the 12-element group generated by swap, negation and
    the shear (m, n) -> (m + n, -n) of the 60 degree cell"""
    orbit = {(m, n)}
    frontier = [(m, n)]
    while frontier:
        a, b = frontier.pop()
        for image in ((b, a), (-a, -b), (a + b, -b)):
            if image not in orbit:
                orbit.add(image)
                frontier.append(image)
    return orbit


SYMMETRY_IMAGES = {"square": _square_images, "triangular": _triangular_images}


class ReferenceTable:
    """Unit-bond square and triangular resistances, memoised per symmetry orbit.

    Lookups of any member of an orbit share one spectral evaluation. The
    table is shared between threads; insertions happen under the lock.
    """

    def __init__(self, engine: Optional[SpectralEngine] = None, cfg: Optional[QuadratureConfig] = None):
        self.engine = engine or spectral_engine
        self.cfg = cfg or REFERENCE_QUADRATURE
        self.values: Dict[Tuple[str, Index], ResistanceResult] = {}
        self.lock = threading.Lock()

    @staticmethod
    def canonical_index(kind: str, m: int, n: int) -> Index:
        if kind not in SYMMETRY_IMAGES:
            raise UnknownLatticeError(f"no reference lattice {kind!r}")
        return min(SYMMETRY_IMAGES[kind](m, n))

    def lookup(self, kind: str, m: int, n: int) -> ResistanceResult:
        key = (kind, self.canonical_index(kind, m, n))
        with self.lock:
            cached = self.values.get(key)
        if cached is not None:
            return cached
        self.prefetch(kind, [(m, n)])
        with self.lock:
            return self.values[key]

    def prefetch(self, kind: str, indices: Iterable[Index]) -> None:
        """Evaluate every missing orbit among `indices` in one batched run"""
        wanted = sorted({self.canonical_index(kind, m, n) for m, n in indices})
        with self.lock:
            missing = [idx for idx in wanted if (kind, idx) not in self.values]
        if not missing:
            return
        logger.info(f"Computing {len(missing)} {kind} reference resistances")
        spec = builtin(kind).spec
        queries = [ResistanceQuery.between(0, 0, idx) for idx in missing]
        results = self.engine.resistances(spec, queries, self.cfg)
        with self.lock:
            for idx, result in zip(missing, results):
                self.values.setdefault((kind, idx), result)

    def clear(self) -> None:
        with self.lock:
            self.values.clear()


reference_table = ReferenceTable()


def chain_resistance(alpha: int, beta: int, m: int, r1: float, r2: float) -> float:
    """Two-resistor chain, site 0 at cell 0 to site beta at cell m"""
    if alpha not in (0, 1) or beta not in (0, 1):
        raise InvalidQueryError(f"chain sites are 0 and 1, got {alpha} and {beta}")
    if alpha == beta:
        return (r1 + r2) * abs(m)
    if alpha == 0:
        return r1 * abs(m + 1) + r2 * abs(m)
    return r1 * abs(m - 1) + r2 * abs(m)


def chain_ring_resistance(alpha: int, beta: int, m: int, r1: float, r2: float, cells: int) -> float:
    """The same chain closed into a ring of `cells` cells: the two arcs in parallel"""
    if alpha not in (0, 1) or beta not in (0, 1):
        raise InvalidQueryError(f"chain sites are 0 and 1, got {alpha} and {beta}")
    if cells < 1:
        raise InvalidQueryError(f"a ring needs at least one cell, got {cells}")
    # Node (site a, cell c) sits at position 2c + a; R1 follows even positions
    start = alpha
    steps = (2 * m + beta - start) % (2 * cells)
    long_half, short_half = (steps + 1) // 2, steps // 2
    if start % 2 == 0:
        arc = long_half * r1 + short_half * r2
    else:
        arc = short_half * r1 + long_half * r2
    total = cells * (r1 + r2)
    return arc * (total - arc) / total


def triangular_resistance(
    m: int, n: int, cfg: Optional[QuadratureConfig] = None, resistance: float = 1.0
) -> float:
    return resistance * _reference(cfg).lookup("triangular", m, n).value


def square_resistance(
    m: int, n: int, cfg: Optional[QuadratureConfig] = None, resistance: float = 1.0
) -> float:
    return resistance * _reference(cfg).lookup("square", m, n).value


_tables: Dict[QuadratureConfig, ReferenceTable] = {}
_tables_lock = threading.Lock()


def _reference(cfg: Optional[QuadratureConfig]) -> ReferenceTable:
    if cfg is None or cfg == REFERENCE_QUADRATURE:
        return reference_table
    with _tables_lock:
        if cfg not in _tables:
            _tables[cfg] = ReferenceTable(cfg=cfg)
        return _tables[cfg]


def symmetry_complete(lattice: str, alpha: int, beta: int, m: int, n: int) -> Tuple[int, int, int, int]:
    """R_ab(m, n) = R_ba(-m, -n) as an index rewrite"""
    if lattice not in MAPPINGS:
        raise UnknownLatticeError(f"no mapping formulas for {lattice!r}", {"known": list(MAPPINGS)})
    return beta, alpha, -m, -n


def mapping_terms(lattice: str, alpha: int, beta: int, m: int, n: int) -> Tuple[float, List[Tuple[Index, float]]]:
    """Constant (units of R) and absolute reference offsets with coefficients"""
    if lattice not in MAPPINGS:
        raise UnknownLatticeError(f"no mapping formulas for {lattice!r}", {"known": list(MAPPINGS)})
    formulas = MAPPINGS[lattice][1]
    if not (0 <= alpha < 3 and 0 <= beta < 3):
        raise InvalidQueryError(f"{lattice} sites are 0, 1 and 2, got {alpha} and {beta}")
    if alpha > beta:
        alpha, beta, m, n = symmetry_complete(lattice, alpha, beta, m, n)
    constant, terms = formulas[(alpha, beta)]
    if lattice == "dice" and (alpha, beta) in _DICE_ORIGIN_FREE and m == 0 and n == 0:
        constant = 0.0
    return constant, [((m + dm, n + dn), coefficient) for (dm, dn), coefficient in terms]


def _mapped(
    lattice: str,
    alpha: int,
    beta: int,
    m: int,
    n: int,
    cfg: Optional[QuadratureConfig],
    resistance: float,
) -> MappedResistance:
    constant, terms = mapping_terms(lattice, alpha, beta, m, n)
    kind = MAPPINGS[lattice][0]
    table = _reference(cfg)
    table.prefetch(kind, [idx for idx, _ in terms])
    value = resistance * constant
    error = 0.0
    for (rm, rn), coefficient in terms:
        ref = table.lookup(kind, rm, rn)
        value += coefficient * resistance * ref.value
        error += abs(coefficient) * resistance * ref.error_estimate
    return MappedResistance(
        lattice=lattice,
        alpha=alpha,
        beta=beta,
        m=m,
        n=n,
        value=value,
        error_estimate=error,
        constant=resistance * constant,
        terms=tuple(terms),
    )


def kagome_via_triangular(
    alpha: int, beta: int, m: int, n: int, cfg: Optional[QuadratureConfig] = None, resistance: float = 1.0
) -> MappedResistance:
    return _mapped("kagome", alpha, beta, m, n, cfg, resistance)


def dice_via_triangular(
    alpha: int, beta: int, m: int, n: int, cfg: Optional[QuadratureConfig] = None, resistance: float = 1.0
) -> MappedResistance:
    return _mapped("dice", alpha, beta, m, n, cfg, resistance)


def decorated_via_square(
    alpha: int, beta: int, m: int, n: int, cfg: Optional[QuadratureConfig] = None, resistance: float = 1.0
) -> MappedResistance:
    return _mapped("decorated", alpha, beta, m, n, cfg, resistance)


def mapped_resistance(
    lattice: str,
    alpha: int,
    beta: int,
    m: int,
    n: int,
    cfg: Optional[QuadratureConfig] = None,
    resistance: float = 1.0,
) -> MappedResistance:
    """Dispatch to the closed-form layer by lattice name"""
    return _mapped(lattice, alpha, beta, m, n, cfg, resistance)
