import numpy as np
import pytest

from vortexlab.profiles import build_bump, build_phi


@pytest.fixture(scope="session")
def rho02():
    return build_bump(0.2)


@pytest.fixture(scope="session")
def phi02(rho02):
    return build_phi(rho02)


@pytest.fixture(autouse=True)
def _quiet_wraparound_warnings():
    # tests sample profiles on tight grids on purpose; the wrap-around
    # warning is exercised explicitly where it matters
    import warnings
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="wrap-around")
        yield
