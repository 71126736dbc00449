import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized

from gridohm.config import Settings, get_settings
from gridohm.exceptions import InvalidTorusError
from gridohm.models.lattice import LatticeSpec, NodeRef, ResistanceQuery
from gridohm.models.results import TorusConfig
from gridohm.services.lattice_model import validate_and_canonicalize
from gridohm.services.spectral_engine import SpectralEngine, check_queries

logger = logging.getLogger(__name__)


def check_torus(spec: LatticeSpec, t: TorusConfig) -> None:
    if len(t.sizes) != spec.dimension:
        raise InvalidTorusError(
            f"torus has {len(t.sizes)} sizes, lattice dimension is {spec.dimension}",
            {"sizes": list(t.sizes)},
        )
    for n in t.sizes:
        if n < 2 or n % 2:
            raise InvalidTorusError(
                f"torus sizes must be even and at least 2, got {list(t.sizes)}",
                {"sizes": list(t.sizes)},
            )


class TorusOracle:
    """Exact resistances on a finite N_1 x ... x N_d torus.

    Two independent routes compute the same finite quantity: a sum over the
    N discrete wave vectors and a direct sparse Kirchhoff solve.
    """

    def __init__(self, settings: Optional[Settings] = None):
        self._settings = settings
        self._engine = SpectralEngine(settings)

    @property
    def settings(self) -> Settings:
        return self._settings or get_settings()

    def torus_resistance_kspace(self, spec: LatticeSpec, q: ResistanceQuery, t: TorusConfig) -> float:
        spec = validate_and_canonicalize(spec)
        check_queries(spec, [q])
        check_torus(spec, t)
        if q.is_trivial:
            return 0.0

        total = t.cells
        chunk = self.settings.chunk_points
        bounds = [(start, min(start + chunk, total)) for start in range(0, total, chunk)]
        offset = np.asarray(q.offset, dtype=float)

        def work(bound: Tuple[int, int]) -> float:
            indices = np.arange(*bound)
            digits = np.unravel_index(indices, t.sizes)
            xs = np.stack([2.0 * np.pi * m / n for m, n in zip(digits, t.sizes)], axis=-1)
            positive = -self._engine.laplacian_batch(spec, xs)
            # x = 0 is only singular along the all-ones vector, which u avoids
            zero = indices == 0
            if zero.any():
                positive[zero] += np.full((spec.p, spec.p), 1.0 / spec.p)
            u = np.zeros((len(xs), spec.p), dtype=complex)
            u[:, q.alpha] += 1.0
            u[:, q.beta] -= np.exp(-1j * (xs @ offset))
            y = np.linalg.solve(positive, u[..., None])[..., 0]
            return float(np.real(np.einsum("ka,ka->", u.conj(), y)))

        threads = min(self.settings.threads, len(bounds))
        if threads <= 1:
            partials = [work(b) for b in bounds]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                partials = list(pool.map(work, bounds))

        summed = 0.0
        for partial in partials:
            summed += partial
        return summed / total

    def laplacian_matrix(self, spec: LatticeSpec, t: TorusConfig) -> sp.csr_matrix:
        """Positive semidefinite (N p) x (N p) Laplacian of the wrapped graph.

        Node (site a, cell c) has index a + p * ravel(c).
        """
        spec = validate_and_canonicalize(spec)
        check_torus(spec, t)
        p = spec.p
        sizes = np.asarray(t.sizes, dtype=np.int64)
        cells = np.stack(np.unravel_index(np.arange(t.cells), t.sizes), axis=-1)
        base = np.arange(t.cells, dtype=np.int64) * p

        rows, cols, data = [], [], []
        for bond in spec.bonds:
            shifted = (cells + np.asarray(bond.offset, dtype=np.int64)) % sizes
            i = bond.a + base
            j = bond.b + p * np.ravel_multi_index(tuple(shifted.T), t.sizes)
            keep = i != j
            i, j = i[keep], j[keep]
            g = np.full(len(i), bond.conductance)
            rows.extend([i, j, i, j])
            cols.extend([j, i, i, j])
            data.extend([-g, -g, g, g])

        size = t.cells * p
        logger.info(f"Assembled torus Laplacian with {size} nodes for sizes {list(t.sizes)}")
        matrix = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        )
        return matrix.tocsr()

    def node_index(self, spec: LatticeSpec, t: TorusConfig, node: NodeRef) -> int:
        cell = np.mod(np.asarray(node.cell, dtype=np.int64), t.sizes)
        return int(node.site + spec.p * np.ravel_multi_index(tuple(cell), t.sizes))

    def potentials(
        self,
        spec: LatticeSpec,
        source: NodeRef,
        sink: NodeRef,
        t: TorusConfig,
        ground: Optional[int] = None,
    ) -> np.ndarray:
        """Node potentials for unit current from source to sink, shape (*sizes, p).

        The grounded node (the sink unless given) sits at potential zero.
        """
        spec = validate_and_canonicalize(spec)
        check_torus(spec, t)
        check_queries(spec, [ResistanceQuery(source=source, target=sink)])
        matrix = self.laplacian_matrix(spec, t)
        size = matrix.shape[0]
        src = self.node_index(spec, t, source)
        snk = self.node_index(spec, t, sink)
        ground = snk if ground is None else int(ground)
        if not 0 <= ground < size:
            raise InvalidTorusError(f"ground node {ground} is outside the torus of {size} nodes")

        current = np.zeros(size)
        current[src] += 1.0
        current[snk] -= 1.0
        voltage = np.zeros(size)
        if src != snk:
            keep = np.flatnonzero(np.arange(size) != ground)
            reduced = matrix[keep][:, keep].tocsc()
            solve = factorized(reduced)
            voltage[keep] = solve(current[keep])
        return voltage.reshape(*t.sizes, spec.p)

    def torus_resistance_realspace(
        self,
        spec: LatticeSpec,
        q: ResistanceQuery,
        t: TorusConfig,
        ground: Optional[int] = None,
    ) -> float:
        voltage = self.potentials(spec, q.source, q.target, t, ground=ground).reshape(-1)
        src = self.node_index(spec, t, q.source)
        snk = self.node_index(spec, t, q.target)
        return float(voltage[src] - voltage[snk])

    def convergence_to_infinite(
        self,
        spec: LatticeSpec,
        q: ResistanceQuery,
        sizes: Sequence[TorusConfig],
        realspace: bool = False,
    ) -> List[Tuple[Tuple[int, ...], float]]:
        sizes = list(sizes)
        if [t.cells for t in sizes] != sorted(t.cells for t in sizes):
            raise InvalidTorusError("torus sizes must be ascending")
        route = self.torus_resistance_realspace if realspace else self.torus_resistance_kspace
        return [(t.sizes, route(spec, q, t)) for t in sizes]


torus_oracle = TorusOracle()
