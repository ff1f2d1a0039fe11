import math

import pytest

from drawdown_put.model import make_params
from drawdown_put.pricer import build_model

R, SIGMA, LAM, RHO, K, CAP = 0.1, 0.2, 0.2, 3.0, 100.0, 1.2
C = math.log(CAP)


@pytest.fixture(scope="session")
def fig_params():
    return make_params(R, SIGMA, LAM, RHO)


@pytest.fixture(scope="session")
def fig_model(fig_params):
    return build_model(fig_params, K, C)


@pytest.fixture(scope="session")
def bs_model():
    return build_model(make_params(R, SIGMA, 0.0), K, C)
