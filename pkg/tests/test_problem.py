import math

import numpy as np
import pytest

from nonlocal_sl.errors import DisallowedVariable
from nonlocal_sl.grid import Grid, GridFunction
from nonlocal_sl.problem import (
    NonlocalFunctional,
    ProblemSpec,
    Term,
    apply_DF,
    apply_F,
    eval_functional,
    eval_functional_derivative,
    interpolation_row,
    off_node_points,
    suggest_grid,
)

from conftest import family, worked_problem


def test_eval_functional_worked_family():
    eta = NonlocalFunctional((Term("v^3", math.pi / 4),))
    g = Grid(256)
    assert abs(eval_functional(eta, GridFunction(g, family(g, 2, 2.0))) - 8.0) <= 1e-12
    g_off = Grid(250)  # pi/4 is not a node
    assert off_node_points(ProblemSpec(0, "0", 0, 0, "0", eta), g_off)
    assert abs(eval_functional(eta, GridFunction(g_off, family(g_off, 2, 2.0))) - 8.0) <= 2e-3


def test_eval_functional_trivial_cases():
    g = Grid(16)
    v = GridFunction(g, np.cos(g.t) + 3)
    assert eval_functional(NonlocalFunctional(), v) == 0.0
    assert eval_functional(NonlocalFunctional((Term("v", 0.0),)), v) == v.values[0]
    assert eval_functional(NonlocalFunctional((Term("v", math.pi),)), v) == v.values[-1]


def test_interpolation_row_is_linear_interpolation():
    g = Grid(16)
    v = np.exp(g.t)
    for pt in (0.0, 0.3, 1.0, math.pi / 2, 3.0, math.pi):
        assert interpolation_row(g, pt) @ v == pytest.approx(np.interp(pt, g.t, v), abs=1e-14)


def test_functional_derivative_worked_case():
    g = Grid(256)
    n, t1 = 2, math.pi / 4
    for c in (-1.0, 0.5, 2.0):
        v = GridFunction(g, family(g, n, c))
        w = GridFunction(g, np.sin(n * g.t))
        eta = NonlocalFunctional((Term("v^3", t1),))
        expected = 3 * (c * math.sin(n * t1) + math.cos(n * t1)) ** 2 * math.sin(n * t1)
        assert eval_functional_derivative(eta, v, w) == pytest.approx(expected, abs=1e-12)


def test_functional_derivative_constant_and_linear(rng):
    g = Grid(64)
    v = GridFunction(g, rng.normal(size=g.size))
    const = NonlocalFunctional((Term("8", 1.0), Term("pi", 0.0)))
    w1 = GridFunction(g, rng.normal(size=g.size))
    w2 = GridFunction(g, rng.normal(size=g.size))
    assert eval_functional_derivative(const, v, w1) == 0.0
    eta = NonlocalFunctional((Term("v^3 - sin(v)", 0.7), Term("exp(v)", 2.2)))
    a = eval_functional_derivative(eta, v, w1 + w2)
    b = eval_functional_derivative(eta, v, w1) + eval_functional_derivative(eta, v, w2)
    assert abs(a - b) <= 1e-12 * (1 + abs(a))


def test_term_validation():
    with pytest.raises(ValueError):
        Term("v", 4.0)
    with pytest.raises(ValueError):
        Term("v", -0.1)
    with pytest.raises(DisallowedVariable):
        Term("x*v", 1.0)


def test_problem_spec_validation():
    with pytest.raises(DisallowedVariable):
        ProblemSpec(1.0, "v", 0, 0, "0")
    with pytest.raises(ValueError):
        ProblemSpec(1.0, "0", 0, 0, "0", epsilon=math.inf)
    p = ProblemSpec(1.0, "sin(x)", 0, 1, "v^2", [("v", 1.0)], [], 0.1)
    assert isinstance(p.eta1, NonlocalFunctional)
    assert p.with_epsilon(0.2).epsilon == 0.2
    assert p.with_epsilon(0.2).f == p.f


def test_apply_F_examples():
    g = Grid(64)
    p = ProblemSpec(0.5, "0", 0, 0, "v^2", [("v^3 + v", 1.0)], [("2*v", 2.0)])
    s = GridFunction(g, np.sin(g.t))
    np.testing.assert_allclose(apply_F(p, s).h.values, np.sin(g.t) ** 2, rtol=0, atol=1e-15)
    z = apply_F(p, GridFunction.zeros(g))
    assert np.all(z.h.values == 0) and z.h1 == 0 and z.h2 == 0


def test_apply_F_worked_instance_probes():
    g = Grid(256)
    p = worked_problem(eps=0.0)
    v = GridFunction(g, family(g, 2, 1.3) + 0.1 * g.t)
    F = apply_F(p, v)
    for i in (0, 17, 64, 200, 256):
        assert F.h.values[i] == v.values[i] ** 2
    assert F.h1 == pytest.approx(v.values[64] ** 3, rel=1e-15)
    assert F.h2 == 8.0


def test_apply_DF_examples(rng):
    g = Grid(64)
    p = ProblemSpec(0.5, "0", 0, 0, "v^2", [("v^3", 1.0)], [])
    v = GridFunction(g, rng.normal(size=g.size))
    w = GridFunction(g, rng.normal(size=g.size))
    np.testing.assert_allclose(apply_DF(p, v, w).h.values, 2 * v.values * w.values, atol=1e-15)
    z = apply_DF(p, v, GridFunction.zeros(g))
    assert np.all(z.h.values == 0) and z.h1 == 0 and z.h2 == 0


def _fd_check(p, v, w, h=1e-5):
    plus, minus = apply_F(p, v + w * h), apply_F(p, v - w * h)
    dF = apply_DF(p, v, w)
    fd_h = (plus.h.values - minus.h.values) / (2 * h)
    err_h = np.max(np.abs(fd_h - dF.h.values) / (1 + np.abs(dF.h.values)))
    err_1 = abs((plus.h1 - minus.h1) / (2 * h) - dF.h1) / (1 + abs(dF.h1))
    err_2 = abs((plus.h2 - minus.h2) / (2 * h) - dF.h2) / (1 + abs(dF.h2))
    return max(err_h, err_1, err_2)


def test_apply_DF_finite_difference(rng):
    g = Grid(64)
    p = ProblemSpec(0.5, "0", 0, 0, "x*v^3 - sin(v) + exp(-v^2)", [("v^3", 0.9), ("cos(v)", 2.0)], [("v^2", 3.1)])
    for _ in range(20):
        a, k = rng.normal(size=2)
        v = GridFunction(g, a * np.sin(g.t + k) + 0.3)
        w = GridFunction(g, np.cos(rng.integers(1, 4) * g.t + rng.normal()))
        assert _fd_check(p, v, w) <= 1e-6


def test_apply_DF_linear_in_w(rng):
    g = Grid(64)
    p = ProblemSpec(0.5, "0", 0, 0, "x*v^3", [("v^3", 0.9)], [("exp(v)", 3.0)])
    v = GridFunction(g, rng.normal(size=g.size))
    w1 = GridFunction(g, rng.normal(size=g.size))
    w2 = GridFunction(g, rng.normal(size=g.size))
    lhs = apply_DF(p, v, w1 * 2.0 + w2)
    a, b = apply_DF(p, v, w1), apply_DF(p, v, w2)
    scale = 1 + np.max(np.abs(lhs.h.values))
    assert np.max(np.abs(lhs.h.values - 2 * a.h.values - b.h.values)) <= 1e-12 * scale
    assert abs(lhs.h1 - 2 * a.h1 - b.h1) <= 1e-12 * (1 + abs(lhs.h1))
    assert abs(lhs.h2 - 2 * a.h2 - b.h2) <= 1e-12 * (1 + abs(lhs.h2))


def test_apply_F_refinement_order():
    # v(1) is linearly interpolated: |g(v_I) - g(v)| <= max|g'| * step^2/8 * max|v''|
    p = ProblemSpec(0.5, "0", 0, 0, "v^2", [("v^3", 1.0)], [])
    exact = math.exp(3 * math.sin(1.0))
    fine = Grid(4096)
    vf = np.exp(np.sin(fine.t))
    curvature = np.max(np.abs(np.gradient(np.gradient(vf, fine.t), fine.t)))
    slope = 3 * np.max(vf) ** 2
    for N in (32, 64, 128, 256):
        g = Grid(N)
        v = GridFunction(g, np.exp(np.sin(g.t)))
        F = apply_F(p, v)
        np.testing.assert_array_equal(F.h.values, v.values ** 2)
        assert abs(F.h1 - exact) <= slope * g.step ** 2 / 8 * curvature * 1.01


def test_suggest_grid():
    p = ProblemSpec(0, "0", 0, 0, "0", [("v", math.pi / 4)], [("v", math.pi / 3)])
    assert off_node_points(p, Grid(256)) == [math.pi / 3]
    N = suggest_grid(p, 256)
    assert N is not None and N >= 256 and N % 12 == 0
    assert not off_node_points(p, Grid(N))
    assert suggest_grid(ProblemSpec(0, "0", 0, 0, "0", [("v", 1.0)]), 16, 64) is None
