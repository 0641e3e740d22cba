import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from twistband.bands import sweep_bands, track_branches
from twistband.geometry import GeometrySpec, build_grid
from twistband.operators import assemble_operators


@pytest.fixture(scope="session")
def square24_ops():
    return assemble_operators(build_grid(GeometrySpec.rectangle(1.0, 1.0, 1.0 / 24)))


@pytest.fixture(scope="session")
def rect107_ops():
    return assemble_operators(build_grid(GeometrySpec.rectangle(1.0, 0.7, 1.0 / 20)))


@pytest.fixture(scope="session")
def disc24_ops():
    return assemble_operators(build_grid(GeometrySpec.disc(1.0, 1.0 / 24)))


@pytest.fixture(scope="session")
def disc32_ops():
    return assemble_operators(build_grid(GeometrySpec.disc(1.0, 1.0 / 32)))


@pytest.fixture(scope="session")
def square_table_beta0(square24_ops):
    """Unit square, no twist: E_n(k) = mu_n + k^2 exactly (discrete)."""
    return sweep_bands(square24_ops, 0.0, np.linspace(-1.6, 1.6, 65), nmax=4)


@pytest.fixture(scope="session")
def square_branches_beta0(square_table_beta0):
    return track_branches(square_table_beta0)


@pytest.fixture(scope="session")
def disc_table_02(disc32_ops):
    """Unit disc, beta = 0.2: the standard crossing/stationary testbed."""
    return sweep_bands(disc32_ops, 0.2, np.linspace(-0.8, 0.8, 41), nmax=5)


@pytest.fixture(scope="session")
def disc_branches_02(disc_table_02):
    return track_branches(disc_table_02)


@pytest.fixture(scope="session")
def disc_table_beta2(disc24_ops):
    """Unit disc, beta = 2: hosts a same-sign band crossing at desk scale."""
    return sweep_bands(disc24_ops, 2.0, np.linspace(-4.4, 4.4, 221), nmax=6)


@pytest.fixture(scope="session")
def disc_branches_beta2(disc_table_beta2):
    return track_branches(disc_table_beta2)
