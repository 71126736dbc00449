import time
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from gridohm.config import Settings, get_settings
from gridohm.exceptions import InvalidQueryError, NoConvergenceError, SingularPointError
from gridohm.models.lattice import LatticeSpec, ResistanceQuery
from gridohm.models.results import QuadratureConfig, ResistanceResult, SpectralSample
from gridohm.services.lattice_model import stencil_arrays, validate_and_canonicalize

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


def midpoint_nodes(order: int, dimension: int) -> np.ndarray:
    """All order**dimension midpoint nodes of [-pi, pi]^d, shape (order**d, d).

    Nodes are (j + 1/2 - order/2) * 2pi/order, so the grid is closed under
    x -> -x bit for bit and never contains x = 0 for even order.
    """
    return _nodes(np.arange(order**dimension), order, dimension)


def _nodes(indices: np.ndarray, order: int, dimension: int) -> np.ndarray:
    step = 2.0 * np.pi / order
    digits = np.unravel_index(indices, (order,) * dimension)
    return np.stack([(d + 0.5 - order / 2) * step for d in digits], axis=-1)


def check_queries(spec: LatticeSpec, queries: Sequence[ResistanceQuery]) -> None:
    for q in queries:
        for site in (q.alpha, q.beta):
            if not 0 <= site < spec.p:
                raise InvalidQueryError(f"site {site} does not exist (p={spec.p})", {"site": site})
        if len(q.offset) != spec.dimension:
            raise InvalidQueryError(
                f"offset {list(q.offset)} has length {len(q.offset)}, expected {spec.dimension}"
            )


class SpectralEngine:
    """Infinite-lattice resistances from the k-space Laplacian.

    Integrals over [-pi, pi]^d are taken with an even-order tensor midpoint
    rule. Nodes are processed in fixed-size chunks on a thread pool and the
    chunk sums are reduced in chunk order, so results do not depend on the
    number of threads.
    """

    def __init__(self, settings: Optional[Settings] = None):
        self._settings = settings

    @property
    def settings(self) -> Settings:
        return self._settings or get_settings()

    def laplacian_at(self, spec: LatticeSpec, x: Sequence[float]) -> np.ndarray:
        """L(x) = sum_r L(r) exp(-i x.r) as a p x p complex matrix"""
        spec = validate_and_canonicalize(spec)
        x = self._point(spec, x)
        return self.laplacian_batch(spec, x[None, :])[0]

    def laplacian_batch(self, spec: LatticeSpec, xs: np.ndarray) -> np.ndarray:
        offsets, blocks = stencil_arrays(spec)
        phases = np.exp(-1j * (np.asarray(xs, dtype=float) @ offsets.T))
        return np.einsum("kr,rab->kab", phases, blocks)

    def sample(self, spec: LatticeSpec, x: Sequence[float]) -> SpectralSample:
        matrix = self.laplacian_at(spec, x)
        return SpectralSample(x=tuple(float(v) for v in x), matrix=matrix)

    def greens_at(self, spec: LatticeSpec, x: Sequence[float]) -> np.ndarray:
        """G(x) = -L(x)^-1; only used for inspection and tests"""
        matrix = self.laplacian_at(spec, x)
        self._check_condition(matrix, x)
        return -np.linalg.inv(matrix)

    def resistance_integrand(
        self, spec: LatticeSpec, q: ResistanceQuery, x: Sequence[float]
    ) -> float:
        """-Re(u^H L(x)^-1 u) with u = e_alpha - e_beta exp(-i n.x), without forming G"""
        spec = validate_and_canonicalize(spec)
        check_queries(spec, [q])
        if q.is_trivial:
            return 0.0
        x = self._point(spec, x)
        matrix = self.laplacian_batch(spec, x[None, :])[0]
        self._check_condition(matrix, x)
        u = np.zeros(spec.p, dtype=complex)
        u[q.alpha] += 1.0
        u[q.beta] -= np.exp(-1j * (x @ np.asarray(q.offset, dtype=float)))
        y = np.linalg.solve(matrix, u)
        return float(-np.real(np.vdot(u, y)))

    def integrand_values(
        self,
        spec: LatticeSpec,
        queries: Sequence[ResistanceQuery],
        xs: np.ndarray,
        phase_sign: int = -1,
    ) -> np.ndarray:
        """Integrand of every query at every point, shape (len(xs), len(queries)).

        phase_sign=+1 attaches exp(+i n.x) to the target site instead, which
        yields the integrand of the query with offset -n.
        """
        spec = validate_and_canonicalize(spec)
        check_queries(spec, queries)
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return self._chunk_values(spec, self._query_arrays(queries), xs, phase_sign)

    def resistance(
        self, spec: LatticeSpec, q: ResistanceQuery, cfg: Optional[QuadratureConfig] = None
    ) -> ResistanceResult:
        cfg = cfg or QuadratureConfig()
        result = self._run(spec, [q], cfg)[0]
        if cfg.strict and not result.converged:
            raise NoConvergenceError(
                f"resistance did not reach relative error {cfg.target_relative_error}",
                result,
                {"error_estimate": result.error_estimate, "order": result.order_used},
            )
        return result

    def resistances(
        self,
        spec: LatticeSpec,
        queries: Sequence[ResistanceQuery],
        cfg: Optional[QuadratureConfig] = None,
    ) -> List[ResistanceResult]:
        """Evaluate many queries on one lattice, sharing each node's factorization.

        Refinement continues until every query meets the target.
        """
        cfg = cfg or QuadratureConfig()
        results = self._run(spec, list(queries), cfg)
        failing = [r for r in results if not r.converged]
        if cfg.strict and failing:
            raise NoConvergenceError(
                f"{len(failing)} of {len(results)} resistances did not converge",
                results,
                {"failing": len(failing)},
            )
        return results

    def convergence_study(
        self, spec: LatticeSpec, q: ResistanceQuery, orders: Sequence[int]
    ) -> List[Tuple[int, float]]:
        """Resistance at each fixed order, without refinement"""
        spec = validate_and_canonicalize(spec)
        check_queries(spec, [q])
        orders = list(orders)
        if any(m < 2 or m % 2 for m in orders):
            raise InvalidQueryError(f"orders must be even and at least 2, got {orders}")
        if orders != sorted(orders):
            raise InvalidQueryError(f"orders must be ascending, got {orders}")
        if q.is_trivial:
            return [(m, 0.0) for m in orders]
        arrays = self._query_arrays([q])
        return [(m, float(self._mean(spec, arrays, m)[0])) for m in orders]

    def mean_at_order(
        self, spec: LatticeSpec, queries: Sequence[ResistanceQuery], order: int
    ) -> np.ndarray:
        """Midpoint-rule resistances of all queries at one fixed order"""
        spec = validate_and_canonicalize(spec)
        check_queries(spec, queries)
        return self._mean(spec, self._query_arrays(queries), order)

    def _run(
        self, spec: LatticeSpec, queries: List[ResistanceQuery], cfg: QuadratureConfig
    ) -> List[ResistanceResult]:
        started = time.perf_counter()
        spec = validate_and_canonicalize(spec)
        check_queries(spec, queries)
        active = [i for i, q in enumerate(queries) if not q.is_trivial]

        values = np.zeros(len(queries))
        errors = np.zeros(len(queries))
        order = 0
        evaluations = 0
        if active:
            arrays = self._query_arrays([queries[i] for i in active])
            order = cfg.initial_order(spec.dimension)
            previous = self._mean(spec, arrays, order)
            evaluations = order**spec.dimension
            for _ in range(cfg.max_refinements):
                finer = order * cfg.refinement_factor
                logger.info(f"Refining midpoint order {order} -> {finer} (d={spec.dimension})")
                current = self._mean(spec, arrays, finer)
                evaluations += finer**spec.dimension
                spread = np.abs(current - previous)
                order, previous = finer, current
                values[active] = current
                errors[active] = spread
                if np.all(spread <= cfg.target_relative_error * np.abs(current)):
                    break

        wall_time = time.perf_counter() - started
        results = []
        for i, q in enumerate(queries):
            converged = bool(errors[i] <= cfg.target_relative_error * abs(values[i]))
            if not converged:
                logger.warning(
                    f"Resistance {q.alpha}->{q.beta} {list(q.offset)} not converged: "
                    f"error {errors[i]:.3g} at order {order}"
                )
            results.append(
                ResistanceResult(
                    value=float(values[i]),
                    error_estimate=float(errors[i]),
                    order_used=order if i in active else 0,
                    evaluations=evaluations if i in active else 0,
                    converged=converged,
                    wall_time=wall_time,
                    query=q,
                )
            )
        return results

    def _mean(self, spec: LatticeSpec, arrays, order: int) -> np.ndarray:
        total = order**spec.dimension
        # Memory per node grows with the number of right-hand sides
        chunk = max(64, self.settings.chunk_points // max(1, len(arrays[0])))
        bounds = [(start, min(start + chunk, total)) for start in range(0, total, chunk)]

        def work(bound: Tuple[int, int]) -> np.ndarray:
            xs = _nodes(np.arange(*bound), order, spec.dimension)
            return self._chunk_values(spec, arrays, xs, -1).sum(axis=0)

        threads = min(self.settings.threads, len(bounds))
        if threads <= 1:
            partials = [work(b) for b in bounds]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                partials = list(pool.map(work, bounds))

        # Fixed chunk boundaries and in-order reduction keep the sum bit-stable
        summed = np.zeros_like(partials[0])
        for partial in partials:
            summed = summed + partial
        return summed / total

    def _chunk_values(self, spec: LatticeSpec, arrays, xs: np.ndarray, phase_sign: int) -> np.ndarray:
        alphas, betas, offsets = arrays
        if not len(alphas):
            return np.zeros((len(xs), 0))
        positive = -self.laplacian_batch(spec, xs)
        try:
            factor = np.linalg.cholesky(positive)
        except np.linalg.LinAlgError:
            raise SingularPointError("-L(x) is not positive definite at a quadrature node")
        pivots = np.abs(np.diagonal(factor, axis1=1, axis2=2))
        condition = (pivots.max(axis=1) / pivots.min(axis=1)) ** 2
        if np.any(~np.isfinite(condition)) or np.any(condition > CONDITION_LIMIT):
            worst = int(np.nanargmax(np.where(np.isfinite(condition), condition, np.inf)))
            raise SingularPointError(
                "L(x) is numerically singular at a quadrature node",
                {"x": [float(v) for v in xs[worst]]},
            )

        count = len(alphas)
        u = np.zeros((len(xs), spec.p, count), dtype=complex)
        phases = np.exp(phase_sign * 1j * (xs @ offsets.T))
        for j in range(count):
            u[:, alphas[j], j] += 1.0
            u[:, betas[j], j] -= phases[:, j]
        # u^H (F F^H)^-1 u is the squared norm of F^-1 u
        w = np.linalg.solve(factor, u)
        return np.einsum("kaj,kaj->kj", w.conj(), w).real

    @staticmethod
    def _query_arrays(queries: Sequence[ResistanceQuery]):
        alphas = np.array([q.alpha for q in queries], dtype=np.int64)
        betas = np.array([q.beta for q in queries], dtype=np.int64)
        if queries:
            offsets = np.array([q.offset for q in queries], dtype=float)
        else:
            offsets = np.zeros((0, 0))
        return alphas, betas, offsets

    @staticmethod
    def _point(spec: LatticeSpec, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != spec.dimension:
            raise InvalidQueryError(f"point has {x.shape[0]} coordinates, expected {spec.dimension}")
        return x

    @staticmethod
    def _check_condition(matrix: np.ndarray, x: Sequence[float]) -> None:
        singular = np.linalg.svd(matrix, compute_uv=False)
        if singular[-1] == 0 or singular[0] > CONDITION_LIMIT * singular[-1]:
            raise SingularPointError(
                "L(x) is singular or too ill-conditioned to invert",
                {"x": [float(v) for v in np.ravel(x)]},
            )


# Shared engine, settings are read on first use
spectral_engine = SpectralEngine()
