"""Tests for :mod:`gridohm.services.mappings`
"""

import math

import pytest
from hypothesis import given, strategies as st

from gridohm.exceptions import InvalidQueryError, UnknownLatticeError
from gridohm.models.lattice import ResistanceQuery
from gridohm.models.results import QuadratureConfig
from gridohm.services import mappings
from gridohm.services.catalog import builtin

MAPPING_CFG = QuadratureConfig(order=64, max_refinements=3, target_relative_error=1e-6)

offsets = st.integers(-6, 6)


@pytest.mark.parametrize(
    "a, b, m, expected",
    [(0, 0, 2, 10.0), (0, 1, 0, 2.0), (0, 1, -1, 3.0), (0, 1, 2, 12.0), (1, 0, 1, 3.0), (1, 0, 0, 2.0), (1, 1, -3, 15.0)],
)
def test_chain_closed_form(a, b, m, expected):
    assert mappings.chain_resistance(a, b, m, 2.0, 3.0) == expected


def test_chain_rejects_unknown_sites():
    with pytest.raises(InvalidQueryError):
        mappings.chain_resistance(0, 2, 0, 1.0, 1.0)
    with pytest.raises(InvalidQueryError):
        mappings.chain_ring_resistance(0, 1, 0, 1.0, 1.0, 0)


@given(offsets, offsets, st.floats(0.1, 5.0), st.integers(1, 20))
def test_ring_is_below_open_chain(m, a, r2, cells):
    # an extra parallel path can only lower the resistance
    beta = a % 2
    assert mappings.chain_ring_resistance(0, beta, m, 1.0, r2, cells) <= mappings.chain_resistance(0, beta, m, 1.0, r2) + 1e-12


@pytest.mark.parametrize("m, n, size", [(0, 0, 1), (1, 0, 6), (1, 1, 6), (2, 1, 12), (3, 0, 6)])
def test_triangular_orbits(m, n, size):
    orbit = mappings.SYMMETRY_IMAGES["triangular"](m, n)
    assert len(orbit) == size
    assert {mappings.ReferenceTable.canonical_index("triangular", *idx) for idx in orbit} == {min(orbit)}


@pytest.mark.parametrize("m, n, size", [(0, 0, 1), (1, 0, 4), (1, 1, 4), (2, 1, 8)])
def test_square_orbits(m, n, size):
    assert len(mappings.SYMMETRY_IMAGES["square"](m, n)) == size


def test_reference_table_shares_orbits(engine):
    table = mappings.ReferenceTable(engine=engine, cfg=MAPPING_CFG)
    first = table.lookup("triangular", 1, 0)
    assert table.lookup("triangular", -1, 1) is first
    assert table.lookup("triangular", 0, -1) is first
    assert len(table.values) == 1
    assert abs(first.value - 1 / 3) <= 2 * first.error_estimate + 1e-9

    table.prefetch("square", [(1, 1), (-1, 1), (2, 0), (0, -2)])
    assert len(table.values) == 3
    table.clear()
    assert table.values == {}
    with pytest.raises(UnknownLatticeError):
        table.lookup("honeycomb", 1, 0)


def test_reference_helpers_scale_with_resistance():
    unit = mappings.square_resistance(1, 1, MAPPING_CFG)
    assert unit == pytest.approx(2 / math.pi, abs=1e-5)
    assert mappings.square_resistance(1, 1, MAPPING_CFG, resistance=2.5) == pytest.approx(2.5 * unit, rel=1e-15)
    assert mappings.triangular_resistance(1, 0, MAPPING_CFG, resistance=3.0) == pytest.approx(1.0, abs=1e-5)


@given(st.sampled_from(list(mappings.MAPPINGS)), st.integers(0, 2), st.integers(0, 2), offsets, offsets)
def test_symmetry_complete_is_an_involution(lattice, a, b, m, n):
    once = mappings.symmetry_complete(lattice, a, b, m, n)
    assert once == (b, a, -m, -n)
    assert mappings.symmetry_complete(lattice, *once) == (a, b, m, n)
    if a > b:
        assert mappings.mapping_terms(lattice, a, b, m, n) == mappings.mapping_terms(lattice, b, a, -m, -n)


def test_mapping_terms_use_absolute_offsets():
    constant, terms = mappings.mapping_terms("decorated", 0, 1, 2, 3)
    assert constant == 0.25
    assert terms == [((2, 3), 1.0), ((3, 3), 1.0)]


def test_dice_constant_vanishes_at_origin():
    assert mappings.mapping_terms("dice", 1, 1, 0, 0)[0] == 0.0
    assert mappings.mapping_terms("dice", 2, 2, 0, 0)[0] == 0.0
    assert mappings.mapping_terms("dice", 1, 1, 1, 0)[0] == pytest.approx(1 / 3)


def test_mapping_rejects_bad_input():
    with pytest.raises(UnknownLatticeError):
        mappings.mapped_resistance("square-octagon", 0, 1, 0, 0)
    with pytest.raises(UnknownLatticeError):
        mappings.symmetry_complete("honeycomb", 0, 1, 0, 0)
    with pytest.raises(InvalidQueryError):
        mappings.kagome_via_triangular(0, 3, 0, 0)


@pytest.mark.parametrize(
    "lattice, a, b, m, n",
    [("kagome", 0, 0, 0, 0), ("kagome", 2, 2, 0, 0), ("dice", 1, 1, 0, 0), ("decorated", 1, 1, 0, 0)],
)
def test_same_node_maps_to_zero(lattice, a, b, m, n):
    result = mappings.mapped_resistance(lattice, a, b, m, n, MAPPING_CFG)
    assert abs(result.value) <= 2 * result.error_estimate + 1e-9


@pytest.mark.parametrize(
    "lattice, a, b, m, n, exact",
    [
        ("kagome", 0, 1, 0, 0, 0.5),
        ("kagome", 2, 2, 1, 0, 4 / 9 + 2 * math.sqrt(3) / (3 * math.pi)),
        ("dice", 1, 2, 0, 0, 5 / 9 + math.sqrt(3) / (3 * math.pi)),
        ("dice", 0, 0, 1, 0, 0.5),
        ("decorated", 1, 2, 0, 0, 1 + 1 / math.pi),
        ("decorated", 0, 0, 1, 1, 4 / math.pi),
    ],
)
def test_mapped_exact_values(lattice, a, b, m, n, exact):
    result = mappings.mapped_resistance(lattice, a, b, m, n, MAPPING_CFG)
    assert abs(result.value - exact) <= 2 * result.error_estimate + 1e-6


@pytest.mark.parametrize(
    "lattice, a, b, m, n",
    [
        ("kagome", 1, 0, 2, -1),
        ("kagome", 0, 2, -1, 2),
        ("kagome", 2, 1, 1, 1),
        ("dice", 2, 2, 1, -1),
        ("dice", 1, 1, 2, 0),
        ("dice", 2, 0, 0, 1),
        ("decorated", 1, 1, 1, 0),
        ("decorated", 2, 1, -1, 2),
    ],
)
def test_mapped_matches_direct_quadrature(engine, lattice, a, b, m, n):
    mapped = mappings.mapped_resistance(lattice, a, b, m, n, MAPPING_CFG, resistance=2.0)
    direct = engine.resistance(builtin(lattice, {"R": 2.0}).spec, ResistanceQuery.between(a, b, (m, n)), MAPPING_CFG)
    assert abs(mapped.value - direct.value) <= 2 * (mapped.error_estimate + direct.error_estimate) + 1e-6
    assert mapped.constant == pytest.approx(2.0 * mappings.mapping_terms(lattice, a, b, m, n)[0])


@pytest.mark.slow
@pytest.mark.parametrize("lattice", ["kagome", "dice", "decorated"])
def test_every_mapping_matches_direct_quadrature(engine, lattice):
    keys = [(a, b, m, n) for a in range(3) for b in range(3) for m in range(-2, 3) for n in range(-2, 3)]
    direct = engine.resistances(
        builtin(lattice).spec, [ResistanceQuery.between(a, b, (m, n)) for a, b, m, n in keys], MAPPING_CFG
    )
    mismatches = []
    for key, exact in zip(keys, direct):
        mapped = mappings.mapped_resistance(lattice, *key, MAPPING_CFG)
        if abs(mapped.value - exact.value) > 2 * (mapped.error_estimate + exact.error_estimate) + 1e-6:
            mismatches.append((key, mapped.value, exact.value))
    assert mismatches == []

def test_named_helpers_dispatch():
    kagome = mappings.kagome_via_triangular(0, 1, 0, 0, MAPPING_CFG)
    assert kagome.lattice == "kagome"
    assert mappings.dice_via_triangular(0, 1, 0, 0, MAPPING_CFG).lattice == "dice"
    assert mappings.decorated_via_square(0, 1, 0, 0, MAPPING_CFG).value == pytest.approx(0.75, abs=1e-5)
