"""Tests for :mod:`gridohm.services.spectral_engine`
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import square_lattice, within_estimate
from gridohm.config import Settings
from gridohm.exceptions import InvalidQueryError, NoConvergenceError, SingularPointError
from gridohm.models.lattice import NodeRef, ResistanceQuery
from gridohm.models.results import QuadratureConfig
from gridohm.services.catalog import builtin, list_catalog
from gridohm.services.lattice_model import rebase_query, rebase_sites, relabel_query, relabel_sites
from gridohm.services.mappings import chain_resistance
from gridohm.services.spectral_engine import SpectralEngine, midpoint_nodes

CATALOG = [(name, d, p) for name, d, p, _ in list_catalog()]
TWO_D = [(name, p) for name, d, p in CATALOG if d == 2]

angles = st.floats(-math.pi, math.pi, allow_nan=False)


def _point(d):
    return st.lists(angles, min_size=d, max_size=d).map(np.array)


def _far_from_origin(x):
    assume(np.max(np.abs(x)) > 1e-2)


@pytest.mark.parametrize("order, d", [(2, 1), (8, 2), (6, 3)])
def test_midpoint_nodes_are_symmetric(order, d):
    nodes = midpoint_nodes(order, d)
    assert nodes.shape == (order**d, d)
    assert not np.any(np.all(nodes == 0, axis=1))
    assert {tuple(x) for x in nodes} == {tuple(-x) for x in nodes}
    assert np.all(np.abs(nodes) < math.pi)


@pytest.mark.parametrize("name, d, p", CATALOG)
@settings(max_examples=20, deadline=None)
@given(data=st.data())
def test_laplacian_is_hermitian_and_negative(engine, name, d, p, data):
    spec = builtin(name).spec
    x = data.draw(_point(d))
    matrix = engine.laplacian_at(spec, x)
    assert matrix.shape == (p, p)
    np.testing.assert_allclose(matrix, matrix.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(matrix).max() <= 1e-12


@pytest.mark.parametrize("name, d, p", CATALOG)
def test_laplacian_at_origin_kills_constants(engine, name, d, p):
    matrix = engine.laplacian_at(builtin(name).spec, np.zeros(d))
    np.testing.assert_allclose(matrix @ np.ones(p), 0.0, atol=1e-14)
    with pytest.raises(SingularPointError):
        engine.greens_at(builtin(name).spec, np.zeros(d))


def test_greens_function_inverts_laplacian(engine):
    spec = builtin("square-octagon").spec
    x = np.array([0.4, -1.1])
    g = engine.greens_at(spec, x)
    np.testing.assert_allclose(g @ -engine.laplacian_at(spec, x), np.eye(4), atol=1e-12)
    sample = engine.sample(spec, x)
    np.testing.assert_array_equal(sample.matrix, engine.laplacian_at(spec, x))


def test_quadrature_node_at_origin_is_singular(engine):
    q = ResistanceQuery.between(0, 1, (0, 0))
    with pytest.raises(SingularPointError):
        engine.integrand_values(builtin("honeycomb").spec, [q], np.zeros((1, 2)))


@pytest.mark.parametrize("name, p", TWO_D)
@settings(max_examples=15, deadline=None)
@given(data=st.data())
def test_integrand_symmetries(engine, name, p, data):
    spec = builtin(name).spec
    x = data.draw(_point(2))
    _far_from_origin(x)
    a = data.draw(st.integers(0, p - 1))
    b = data.draw(st.integers(0, p - 1))
    n = tuple(data.draw(st.lists(st.integers(-3, 3), min_size=2, max_size=2)))
    q = ResistanceQuery.between(a, b, n)
    flipped = ResistanceQuery.between(a, b, tuple(-v for v in n))

    values = engine.integrand_values(spec, [q, q.reversed(), flipped], x)[0]
    assert values[0] >= -1e-12
    # exchanging the endpoints multiplies u by a phase
    assert values[1] == pytest.approx(values[0], rel=1e-10, abs=1e-12)
    plus = engine.integrand_values(spec, [q], x, phase_sign=1)[0, 0]
    assert plus == pytest.approx(values[2], rel=1e-10, abs=1e-12)
    assert engine.resistance_integrand(spec, q, x) == pytest.approx(values[0], rel=1e-10, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    x=_point(2),
    shifts=st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=4, max_size=4),
)
def test_integrand_is_gauge_invariant(engine, x, shifts):
    _far_from_origin(x)
    spec = builtin("square-octagon").spec
    rebased = rebase_sites(spec, shifts)
    queries = [ResistanceQuery.between(a, b, (1, -1)) for a in range(4) for b in range(4)]
    moved = [rebase_query(q, shifts) for q in queries]
    np.testing.assert_allclose(
        engine.integrand_values(rebased, moved, x),
        engine.integrand_values(spec, queries, x),
        rtol=1e-9,
        atol=1e-12,
    )


@settings(max_examples=25, deadline=None)
@given(x=_point(2), order=st.permutations([0, 1, 2]))
def test_integrand_ignores_site_labels(engine, x, order):
    _far_from_origin(x)
    spec = builtin("dice").spec
    relabeled = relabel_sites(spec, order)
    queries = [ResistanceQuery.between(a, b, (0, 1)) for a in range(3) for b in range(3)]
    np.testing.assert_allclose(
        engine.integrand_values(relabeled, [relabel_query(q, order) for q in queries], x),
        engine.integrand_values(spec, queries, x),
        rtol=1e-9,
        atol=1e-12,
    )


def test_integrand_scales_with_resistance(engine):
    xs = midpoint_nodes(16, 2)
    q = ResistanceQuery.between(0, 2, (1, 0))
    unit = engine.integrand_values(builtin("kagome").spec, [q], xs)
    tripled = engine.integrand_values(builtin("kagome", {"R": 3.0}).spec, [q], xs)
    np.testing.assert_allclose(tripled, 3.0 * unit, rtol=1e-12)


@pytest.mark.parametrize(
    "name, a, b, n, expected",
    [
        ("square", 0, 0, (1, 0), 0.5),
        ("square", 0, 0, (1, 1), 2 / math.pi),
        ("triangular", 0, 0, (1, 0), 1 / 3),
        ("honeycomb", 0, 1, (0, 0), 2 / 3),
        ("kagome", 2, 2, (1, 0), 4 / 9 + 2 * math.sqrt(3) / (3 * math.pi)),
        ("decorated", 1, 2, (0, 0), 1 + 1 / math.pi),
    ],
)
def test_known_resistances(engine, fast_cfg, name, a, b, n, expected):
    result = engine.resistance(builtin(name).spec, ResistanceQuery.between(a, b, n), fast_cfg)
    assert within_estimate(result, expected)
    assert result.order_used >= 128
    assert result.evaluations > result.order_used**2


@pytest.mark.parametrize("a, b", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_chain_matches_closed_form(engine, a, b):
    spec = builtin("chain2", {"R1": 2.0, "R2": 3.0}).spec
    queries = [ResistanceQuery.between(a, b, (m,)) for m in range(-3, 4)]
    for q, result in zip(queries, engine.resistances(spec, queries)):
        assert result.value == pytest.approx(chain_resistance(a, b, q.offset[0], 2.0, 3.0), abs=1e-6)


def test_resistance_is_symmetric(engine, fast_cfg):
    spec = builtin("centered-square").spec
    q = ResistanceQuery.between(0, 1, (2, -1))
    forward, backward = engine.resistances(spec, [q, q.reversed()], fast_cfg)
    assert forward.value == pytest.approx(backward.value, rel=1e-12)


def test_trivial_query_is_zero(engine):
    result = engine.resistance(square_lattice(), ResistanceQuery.between(0, 0, (0, 0)))
    assert result.value == 0.0
    assert result.order_used == 0
    assert result.converged
    assert engine.resistance_integrand(square_lattice(), ResistanceQuery.between(0, 0, (0, 0)), [0.0, 0.0]) == 0.0


def test_batch_matches_single_queries(engine):
    spec = builtin("kagome").spec
    queries = [ResistanceQuery.between(a, b, (1, -1)) for a in range(3) for b in range(3)]
    batch = engine.mean_at_order(spec, queries, 32)
    single = [engine.mean_at_order(spec, [q], 32)[0] for q in queries]
    np.testing.assert_allclose(batch, single, rtol=1e-13)


def test_thread_count_does_not_change_bits():
    spec = builtin("snub-square").spec
    queries = [ResistanceQuery.between(0, b, (0, 0)) for b in range(1, 8)]
    serial = SpectralEngine(Settings(threads=1, chunk_points=512)).mean_at_order(spec, queries, 48)
    threaded = SpectralEngine(Settings(threads=4, chunk_points=512)).mean_at_order(spec, queries, 48)
    np.testing.assert_array_equal(serial, threaded)


def test_strict_mode_raises_with_result(engine):
    cfg = QuadratureConfig(order=8, max_refinements=1, target_relative_error=1e-12, strict=True)
    with pytest.raises(NoConvergenceError) as exc:
        engine.resistance(square_lattice(), ResistanceQuery.between(0, 0, (3, 1)), cfg)
    assert exc.value.result.order_used == 16
    assert not exc.value.result.converged
    lenient = engine.resistance(square_lattice(), ResistanceQuery.between(0, 0, (3, 1)), cfg.model_copy(update={"strict": False}))
    assert lenient.value == exc.value.result.value


def test_convergence_study_approaches_limit(engine):
    q = ResistanceQuery.between(0, 0, (1, 1))
    study = engine.convergence_study(square_lattice(), q, [16, 64, 256])
    errors = [abs(v - 2 / math.pi) for _, v in study]
    assert [m for m, _ in study] == [16, 64, 256]
    assert errors[0] > errors[1] > errors[2]
    with pytest.raises(InvalidQueryError):
        engine.convergence_study(square_lattice(), q, [64, 16])
    with pytest.raises(InvalidQueryError):
        engine.convergence_study(square_lattice(), q, [15])


@pytest.mark.parametrize(
    "q",
    [
        ResistanceQuery.between(0, 3, (0, 0)),
        ResistanceQuery.between(0, 0, (1, 0, 0)),
    ],
)
def test_rejects_bad_queries(engine, q):
    with pytest.raises(InvalidQueryError):
        engine.resistance(builtin("honeycomb").spec, q)


@pytest.mark.parametrize("fields", [{"order": 7}, {"order": 0}, {"max_refinements": 0}, {"target_relative_error": 0.0}])
def test_rejects_bad_quadrature(fields):
    with pytest.raises(ValueError):
        QuadratureConfig(**fields)


@settings(max_examples=20, deadline=None)
@given(x=_point(2))
def test_batched_values_match_greens_function(engine, x):
    _far_from_origin(x)
    spec = builtin("snub-square").spec
    queries = [ResistanceQuery.between(a, b, (1, -2)) for a in range(8) for b in range(8)]
    values = engine.integrand_values(spec, queries, x[None, :])[0]
    greens = engine.greens_at(spec, x)
    expected = []
    for q in queries:
        u = np.zeros(8, dtype=complex)
        u[q.alpha] += 1.0
        u[q.beta] -= np.exp(-1j * (x @ np.asarray(q.offset, dtype=float)))
        expected.append(np.real(np.vdot(u, greens @ u)))
    np.testing.assert_allclose(values, expected, rtol=1e-9, atol=1e-12)


def test_resistance_obeys_triangle_inequality(engine, fast_cfg):
    spec = builtin("kagome").spec
    a = NodeRef(site=0, cell=(0, 0))
    b = NodeRef(site=1, cell=(1, 0))
    c = NodeRef(site=2, cell=(1, 2))
    ac, ab, bc = engine.resistances(
        spec,
        [
            ResistanceQuery(source=a, target=c),
            ResistanceQuery(source=a, target=b),
            ResistanceQuery(source=b, target=c),
        ],
        fast_cfg,
    )
    slack = ac.error_estimate + ab.error_estimate + bc.error_estimate
    assert ac.value <= ab.value + bc.value + slack
    assert ab.value <= ac.value + bc.value + slack


def test_resistance_scales_with_bond_resistance(engine, fast_cfg):
    q = ResistanceQuery.between(0, 2, (1, -1))
    unit = engine.resistance(builtin("dice").spec, q, fast_cfg)
    scaled = engine.resistance(builtin("dice", {"R": 2.5}).spec, q, fast_cfg)
    assert scaled.order_used == unit.order_used
    assert scaled.value == pytest.approx(2.5 * unit.value, rel=1e-10)
