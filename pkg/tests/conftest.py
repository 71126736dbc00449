import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from gridohm.config import Settings  # noqa: E402
from gridohm.models.lattice import Bond, LatticeSpec  # noqa: E402
from gridohm.models.results import QuadratureConfig  # noqa: E402
from gridohm.services.spectral_engine import SpectralEngine  # noqa: E402
from gridohm.services.torus_oracle import TorusOracle  # noqa: E402


@pytest.fixture(scope="session")
def settings():
    return Settings(threads=2, chunk_points=4096)


@pytest.fixture(scope="session")
def engine(settings):
    return SpectralEngine(settings)


@pytest.fixture(scope="session")
def oracle(settings):
    return TorusOracle(settings)


@pytest.fixture(scope="session")
def fast_cfg():
    """Coarse start so 2D tests stay quick; accuracy is asserted against error_estimate"""
    return QuadratureConfig(order=64, max_refinements=3, target_relative_error=1e-5)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def within_estimate(result, expected, floor=1e-6):
    """The returned value is the finer estimate, so its error is below the spread"""
    return abs(result.value - expected) <= max(2 * result.error_estimate, floor)


def square_lattice(resistance=1.0):
    return LatticeSpec(
        dimension=2,
        sites=("a",),
        bonds=(
            Bond(a=0, b=0, offset=(1, 0), resistance=resistance),
            Bond(a=0, b=0, offset=(0, 1), resistance=resistance),
        ),
    )
