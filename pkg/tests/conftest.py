import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from chaos_sep.pl import PLFunction

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PHI = (1 + math.sqrt(5)) / 2


@st.composite
def pl_functions(draw, lo=-1.0, hi=1.0, max_knots=8, self_map=False):
    """Random continuous PL functions on [lo, hi]."""
    # Knots live on a dyadic grid: with arbitrary doubles a breakpoint can land
    # 1e-10 from a knot, and the slope of the resulting sliver is only known to
    # ulp/width ~ 1e-6, which no double-precision PL representation can beat.
    n = draw(st.integers(2, max_knots))
    steps = int(round((hi - lo) * 128))
    inner = draw(st.lists(st.integers(1, steps - 1), min_size=n - 2, max_size=n - 2, unique=True))
    xs = lo + np.array(sorted([0, steps] + inner)) / 128
    ylo, yhi = (lo, hi) if self_map else (-2.0, 2.0)
    k = int(round((yhi - ylo) * 256))
    ys = ylo + np.array(draw(st.lists(st.integers(0, k), min_size=len(xs), max_size=len(xs)))) / 256
    return PLFunction(xs, ys)


@pytest.fixture
def tent():
    return PLFunction([-1.0, 0.0, 1.0], [1.0, -1.0, 1.0])


@pytest.fixture
def golden():
    return PLFunction([-1.0, 0.0, 1.0], [PHI - 1, -1.0, PHI - 1])


# acceptance results, filled by test_acceptance.py and echoed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
