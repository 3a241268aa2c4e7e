"""Shared fixtures for the nominal design point.

Heavy artifacts (the reference kernel table and the closed-loop record)
are session-scoped so unit tests and acceptance tests share one build.
"""

import numpy as np
import pytest

from heatstep.cli import synthesize_gains
from heatstep.gains import DesignParams
from heatstep.kernels import build_kernel_table, restrict_table
from heatstep.plant import Grid1D, PlantConfig, SineChain, ZeroNonlinearity
from heatstep.simulator import SimConfig, run

# nominal design point used throughout: n = 3, c = 8, theta = 0.5, |B1| = 1
NOMINAL_N = 3
NOMINAL_C = 8.0


@pytest.fixture(scope="session")
def nominal_plant():
    return PlantConfig(
        n=NOMINAL_N,
        c=NOMINAL_C,
        B1=(1.0, 0.0, 0.0),
        theta=0.5,
        nonlinearity=SineChain(0.5),
    )


@pytest.fixture(scope="session")
def linear_plant():
    """Same synthesis inputs as nominal_plant but with f identically zero."""
    return PlantConfig(
        n=NOMINAL_N,
        c=NOMINAL_C,
        B1=(1.0, 0.0, 0.0),
        theta=0.5,
        nonlinearity=ZeroNonlinearity(),
    )


@pytest.fixture(scope="session")
def nominal_design():
    return DesignParams()


@pytest.fixture(scope="session")
def nominal_gains(nominal_plant, nominal_design):
    return synthesize_gains(nominal_plant, nominal_design)


@pytest.fixture(scope="session")
def nominal_table(nominal_plant, nominal_gains):
    return build_kernel_table(nominal_plant, nominal_gains, 200)


@pytest.fixture(scope="session")
def table_100(nominal_table):
    return restrict_table(nominal_table, 100)


@pytest.fixture(scope="session")
def table_64(nominal_plant, nominal_gains):
    # 64 does not divide 200, so this table is built directly on its grid
    return build_kernel_table(nominal_plant, nominal_gains, 64)


@pytest.fixture(scope="session")
def table_32(nominal_plant, nominal_gains):
    return build_kernel_table(nominal_plant, nominal_gains, 32)


@pytest.fixture(scope="session")
def closed_record(nominal_plant, nominal_gains, table_100):
    """Closed-loop reference run from X0 = (1,1,1), u0 = 1 over T = 10."""
    config = SimConfig(grid=Grid1D(100), T=10.0, X0=np.ones(3), u0=np.ones(101))
    return run(nominal_plant, nominal_gains, table_100, config)
