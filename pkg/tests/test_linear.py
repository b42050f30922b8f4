import math

import numpy as np
import pytest

from nonlocal_sl.errors import ResonantLambda, SingularBoundarySystem
from nonlocal_sl.grid import BoundaryTriple, Grid, sample, second_derivative
from nonlocal_sl.linear import inverse_norm_estimate, is_resonant, solve_linear
from nonlocal_sl.oracle import fd_solve
from nonlocal_sl.problem import ProblemSpec


def test_is_resonant_examples():
    assert is_resonant(4.0, 1e-9) == 2
    assert is_resonant(0.5, 1e-9) is None
    assert is_resonant(9 + 1e-12, 1e-9) == 3
    assert is_resonant(0.0, 1e-9) is None
    assert is_resonant(-1.0, 1e-9) is None
    assert is_resonant(1 - 1e-10, 1e-9) == 1
    with pytest.raises(ValueError):
        is_resonant(1.0, 0.0)


def _rhs(grid, h, h1, h2):
    return BoundaryTriple(sample(h, grid) if isinstance(h, str) else h, h1, h2)


def test_lambda_zero_linear():
    g = Grid(256)
    v = solve_linear(0.0, _rhs(g, "0", 0.0, math.pi)).solution
    assert np.max(np.abs(v.values - g.t)) <= 1e-12


def test_lambda_quarter():
    g = Grid(256)
    v = solve_linear(0.25, _rhs(g, "0", 0.0, 1.0)).solution
    assert np.max(np.abs(v.values - np.sin(g.t / 2))) <= 1e-10


def test_lambda_two_sine():
    g = Grid(256)
    res = solve_linear(2.0, _rhs(g, "sin(x)", 0.0, 0.0))
    assert np.max(np.abs(res.solution.values - np.sin(g.t))) <= 1e-8
    assert res.bc_defect[0] <= 1e-12 and res.bc_defect[1] <= 1e-12


def test_negative_lambda_closed_form():
    # v'' - 9 v = 0, v(0) = 1, v(pi) = 0  ->  v = sinh(3(pi - t)) / sinh(3 pi)
    g = Grid(256)
    v = solve_linear(-9.0, _rhs(g, "0", 1.0, 0.0)).solution
    assert np.max(np.abs(v.values - np.sinh(3 * (math.pi - g.t)) / math.sinh(3 * math.pi))) <= 1e-12


def test_strongly_negative_lambda_stays_finite():
    g = Grid(512)
    res = solve_linear(-400.0, _rhs(g, "1", 2.0, -1.0))
    v = res.solution.values
    assert np.all(np.isfinite(v))
    # away from the boundary layers v ~ h/lam
    mid = g.size // 2
    assert abs(v[mid] + 1 / 400) <= 1e-10


def test_resonant_lambda_rejected():
    g = Grid(64)
    with pytest.raises(ResonantLambda) as info:
        solve_linear(4.0, _rhs(g, "1", 0.0, 0.0))
    assert info.value.n == 2


def test_singular_boundary_system():
    g = Grid(64)
    with pytest.raises(SingularBoundarySystem):
        solve_linear(4.0 + 1e-13, _rhs(g, "1", 0.0, 0.0), resonance_tol=1e-15)


def _random_h(rng):
    a = [float(c) for c in rng.normal(size=3)]
    k = [int(j) for j in rng.integers(1, 5, size=3)]
    ph = [float(q) for q in rng.uniform(0, 2 * math.pi, size=3)]
    text = " + ".join(f"({a[i]!r})*sin({k[i]}*x + {ph[i]!r})" for i in range(3))
    second = " + ".join(f"({-a[i] * k[i] ** 2!r})*sin({k[i]}*x + {ph[i]!r})" for i in range(3))
    return text, second


def _random_lambda(rng):
    while True:
        lam = rng.uniform(-4, 20)
        n = max(1, round(math.sqrt(max(lam, 0))))
        if abs(lam - n * n) > 0.3:
            return lam


def test_substitution_random(rng):
    N = 256
    g = Grid(N)
    for _ in range(25):
        lam = _random_lambda(rng)
        h_text, h2_text = _random_h(rng)
        h = sample(h_text, g)
        res = solve_linear(lam, BoundaryTriple(h, rng.normal(), rng.normal()))
        v = res.solution.values
        sup_h = np.max(np.abs(h.values))
        # 3-point residual is h^2/12 v'''' + O(h^4), with v'''' = h'' - lam h + lam^2 v
        v4 = sample(h2_text, g).values - lam * h.values + lam ** 2 * v
        bound = g.step ** 2 / 12 * np.max(np.abs(v4)) * 1.05 + 1e-9
        assert res.residual_ode <= bound
        assert res.residual_ode <= max(1e-6, 20.0 * (1 + lam * lam) / N ** 2) * sup_h * 10
        # with the high-order stencil the residual is near rounding
        hi = second_derivative(v, g.step) + lam * v - h.values
        assert np.max(np.abs(hi[1:-1])) <= 1e-6 * max(1.0, sup_h)


def test_linearity(rng):
    g = Grid(256)
    for _ in range(10):
        lam = _random_lambda(rng)
        a = BoundaryTriple(sample(_random_h(rng)[0], g), rng.normal(), rng.normal())
        b = BoundaryTriple(sample(_random_h(rng)[0], g), rng.normal(), rng.normal())
        al, be = rng.normal(), rng.normal()
        lhs = solve_linear(lam, al * a + be * b).solution.values
        rhs = al * solve_linear(lam, a).solution.values + be * solve_linear(lam, b).solution.values
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_against_fd_oracle():
    # the oracle is second order, so at N=512 it carries O(1e-5) truncation error;
    # its error must shrink 4x per doubling and Richardson extrapolation must agree closely
    g = Grid(512)
    for lam, h, h1, h2 in [(0.5, "1", 0.0, 0.0), (-1.0, "exp(x)", 1.0, 2.0), (0.0, "x^2", 0.0, 1.0)]:
        v = solve_linear(lam, _rhs(g, h, h1, h2)).solution
        p = ProblemSpec(lam, h, h1, h2, "0")
        u512 = fd_solve(p, 512)
        u1024 = fd_solve(p, 1024)
        e512 = np.max(np.abs(u512.values - v.values))
        e1024 = np.max(np.abs(u1024.values[::2] - v.values))
        assert e512 <= 1e-4
        assert 3.5 <= e512 / e1024 <= 4.5
        rich = (4 * u1024.values[::2] - u512.values) / 3
        assert np.max(np.abs(rich - v.values)) <= 1e-6


def test_norm_estimate_blows_up_near_resonance():
    g = Grid(256)
    values = [inverse_norm_estimate(lam, g) for lam in (0.9, 0.99, 0.999)]
    assert values[0] < values[1] < values[2]
    assert values[2] > 5 * values[0]


def test_norm_estimate_negative_lambda():
    est = inverse_norm_estimate(-1.0, Grid(256))
    assert math.isfinite(est) and est > 0


def test_norm_estimate_mesh_stable():
    a = inverse_norm_estimate(0.5, Grid(128))
    b = inverse_norm_estimate(0.5, Grid(256))
    assert abs(a - b) <= 0.05 * b


def test_norm_estimate_bounds_responses(rng):
    # the estimate should dominate sup|v| / max(sup|h|, |h1|, |h2|) for random data
    g = Grid(256)
    for lam in (-2.0, 0.5, 3.0, 10.0):
        est = inverse_norm_estimate(lam, g)
        for _ in range(5):
            rhs = BoundaryTriple(sample(_random_h(rng)[0], g), rng.normal(), rng.normal())
            v = solve_linear(lam, rhs).solution
            assert np.max(np.abs(v.values)) <= est * rhs.norm() * 1.01


def test_norm_estimate_rejects_resonance():
    with pytest.raises(ResonantLambda):
        inverse_norm_estimate(9.0, Grid(64))
