from __future__ import annotations

import pytest

from fracdrift.drift import assemble_drift, constant_field, rotational_field
from fracdrift.fractional import StableParams, assemble_fraclap
from fracdrift.geometry import Domain, build_grid


@pytest.fixture(scope="session")
def params15():
    return StableParams(1.5)


@pytest.fixture(scope="session")
def coarse_grid():
    return build_grid(Domain.disk(), 0.1)


@pytest.fixture(scope="session")
def coarse_diffusion(coarse_grid, params15):
    return assemble_fraclap(coarse_grid, params15)


@pytest.fixture(scope="session")
def coarse_rotational(coarse_grid):
    return assemble_drift(coarse_grid, rotational_field())


@pytest.fixture(scope="session")
def coarse_constant(coarse_grid):
    return assemble_drift(coarse_grid, constant_field((1.0, 0.0)))
