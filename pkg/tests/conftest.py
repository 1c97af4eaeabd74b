import re

import numpy as np
import pytest

from mixedsobolev.bubbles import default_grid
from mixedsobolev.core import make_params
from mixedsobolev.embedding import assemble_forms

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def params5():
    return make_params(5, 0.5, 0.0, 1.0, 0.25)


@pytest.fixture(scope="session")
def grid5(params5):
    return default_grid(params5)


@pytest.fixture(scope="session")
def forms5(grid5, params5):
    return assemble_forms(grid5, params5)


@pytest.fixture(scope="session")
def kernel5(forms5):
    return forms5.kernel


@pytest.fixture(scope="session")
def minimized5(forms5):
    from mixedsobolev.minimizer import minimize_sgamma

    c = forms5.embedding.c_emb
    p = make_params(5, 0.5, 0.5 * c, 1.0, 0.25)
    return p, minimize_sgamma(forms5, p, tol=1e-8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
