import math

import numpy as np
import pytest
from hypothesis import settings

from nonlocal_sl.grid import Grid
from nonlocal_sl.problem import ProblemSpec, Term

settings.register_profile("default", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("default")


def worked_problem(n=2, m=3, K=8.0, t1=math.pi / 4, eps=0.0):
    """v'' + n^2 v = eps v^2, v(0) = 1 + eps v(t1)^m, v(pi) = (-1)^n + eps (-1)^n K."""
    sign = (-1) ** n
    return ProblemSpec(float(n * n), "0", 1.0, float(sign), "v^2",
                       (Term(f"v^{m}", t1),), (Term(str(float(sign * K)), 0.0),), eps)


def family(grid, n, c):
    return c * np.sin(n * grid.t) + np.cos(n * grid.t)


@pytest.fixture
def grid256():
    return Grid(256)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
