import math
import warnings

import numpy as np
import pytest

from nonlocal_sl.errors import DegenerateRoot, NoConvergence, NotInImage, ResonantLambda
from nonlocal_sl.grid import Grid, GridFunction
from nonlocal_sl.linear import solve_linear
from nonlocal_sl.oracle import fd_solve
from nonlocal_sl.problem import ProblemSpec, Term
from nonlocal_sl.resonance import make_basis
from nonlocal_sl.solvers import (
    BifurcationRoot,
    ContractionWarning,
    bifurcation_function,
    continue_in_epsilon,
    family_member,
    find_bifurcation_roots,
    make_root,
    newton_solve,
    picard_solve,
    resonant_solve,
    transversality,
    verify_solution,
)

from conftest import family, worked_problem

PICARD = ProblemSpec(0.5, "1", 0.0, 0.0, "v^2", (), (), 0.01)


def _linear(p, grid):
    return solve_linear(p.lam, p.forcing(grid)).solution.values


def _richardson(p, initial=None, N=512):
    a = fd_solve(p, N, initial=initial)
    b = fd_solve(p, 2 * N, initial=initial)
    return a, b, GridFunction(a.grid, (4 * b.values[::2] - a.values) / 3)


# ---------------------------------------------------------------------------
# Picard and Newton


def test_picard_eps_zero_is_linear_solve():
    g = Grid(256)
    r = picard_solve(PICARD.with_epsilon(0.0), grid=g)
    assert r.iterations == 1 and r.method == "picard"
    assert np.max(np.abs(r.solution.values - _linear(PICARD, g))) <= 1e-14


def test_picard_example_converges_and_matches_oracle():
    r = picard_solve(PICARD, grid=Grid(512))
    assert r.contraction_estimate < 1 and r.contraction_ratio < 1
    assert not r.warnings
    fd512, fd1024, rich = _richardson(PICARD)
    # the three-point oracle is second order: at N=512 it sits at ~1e-5, its
    # extrapolation must match within the 1e-6 cross-method tolerance
    e512 = np.max(np.abs(fd512.values - r.solution.values))
    e1024 = np.max(np.abs(fd1024.values[::2] - r.solution.values))
    assert 3.5 <= e512 / e1024 <= 4.5
    assert np.max(np.abs(rich.values - r.solution.values)) <= 1e-6


def test_picard_warning_path_never_silent():
    p = PICARD.with_epsilon(0.5)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            r = picard_solve(p)
        except NoConvergence as exc:
            assert exc.iterations is not None
        else:
            assert r.warnings and max(r.ode_residual, *r.bc_residual) <= 1e-6
    assert any(issubclass(w.category, ContractionWarning) for w in caught)


def test_picard_rejects_resonance():
    with pytest.raises(ResonantLambda):
        picard_solve(ProblemSpec(4.0, "1", 0, 0, "v^2"))


def test_newton_eps_zero_one_step():
    g = Grid(256)
    r = newton_solve(PICARD.with_epsilon(0.0), grid=g)
    assert r.iterations == 1
    assert np.max(np.abs(r.solution.values - _linear(PICARD, g))) <= 1e-13


def test_newton_matches_picard():
    g = Grid(256)
    a = picard_solve(PICARD, grid=g).solution.values
    b = newton_solve(PICARD, grid=g).solution.values
    assert np.max(np.abs(a - b)) <= 1e-8


def test_newton_quadratic_convergence():
    r = newton_solve(ProblemSpec(0.5, "1", 0, 0, "v^3", (), (), 0.3))
    steps = r.diagnostics
    ratios = [math.log(b) / math.log(a) for a, b in zip(steps, steps[1:]) if a < 0.1 and b > 1e-13]
    assert ratios and min(ratios[-2:]) >= 1.7


def test_newton_with_nonlocal_conditions():
    p = ProblemSpec(2.0, "sin(x)", 0.5, -1.0, "v^3 - x*v", (("v", 1.0), ("v^2", 2.0)), (("sin(v)", math.pi / 2),), 0.05)
    r = newton_solve(p)
    ode, bc = verify_solution(p, r.solution)
    assert ode <= 1e-8 and max(bc) <= 1e-12
    assert (ode, bc) == (r.ode_residual, r.bc_residual)


def test_newton_rejects_resonance():
    with pytest.raises(ResonantLambda):
        newton_solve(ProblemSpec(9.0, "1", 0, 0, "v^2"))


def test_solve_report_summary():
    r = newton_solve(PICARD)
    text = r.summary()
    assert "method=newton\n" in text
    assert f"ode_residual={r.ode_residual:.17g}" in text
    assert text.endswith("\n")
    assert isinstance(r.bc_residual[0], float)


# ---------------------------------------------------------------------------
# bifurcation function and transversality


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("c", [-1.5, 0.0, 0.7, 2.0])
def test_bifurcation_no_eta(n, c):
    g = Grid(256)
    p = ProblemSpec(float(n * n), "0", 1.0, float((-1) ** n), "v^2")
    b = make_basis(n, g)
    odd = 1 + (-1) ** (n + 1)
    assert abs(bifurcation_function(p, b, c) + (2 * c * c + 1) * odd / (3 * n)) <= 1e-9
    assert abs(transversality(p, b, c) + 4 * c * odd / (3 * n)) <= 1e-9


def test_bifurcation_n1_c1():
    p = ProblemSpec(1.0, "0", 1.0, -1.0, "v^2")
    assert abs(bifurcation_function(p, make_basis(1, Grid(256)), 1.0) + 2.0) <= 1e-8


def test_family_is_c_sin_plus_cos():
    g = Grid(256)
    p = worked_problem()
    u = family_member(p, make_basis(2, g), 1.25)
    assert np.max(np.abs(u.values - family(g, 2, 1.25))) <= 1e-12


@pytest.mark.parametrize("m", [3, 4])
@pytest.mark.parametrize("c", [-1.0, 0.5, 2.0])
def test_transversality_worked_family(m, c):
    g = Grid(256)
    n, t1 = 2, math.pi / 4
    p = worked_problem(n=n, m=m, K=8.0, t1=t1)
    s, co = math.sin(n * t1), math.cos(n * t1)
    expected = n * m * (c * s + co) ** (m - 1) * s
    assert abs(transversality(p, make_basis(n, g), c) - expected) <= 1e-8


def test_transversality_vanishes_for_linear_data():
    g = Grid(128)
    p = ProblemSpec(4.0, "0", 1.0, 1.0, "sin(x)", (("3", 1.0),), (("-2", 0.5),))
    b = make_basis(2, g)
    for c in (-2.0, 0.0, 3.0):
        assert transversality(p, b, c) == 0.0


def test_bifurcation_requires_solvable_linear_problem():
    p = ProblemSpec(4.0, "0", 1.0, 0.0, "v^2")
    with pytest.raises(NotInImage):
        bifurcation_function(p, make_basis(2, Grid(64)), 0.0)
    with pytest.raises(NotInImage):
        find_bifurcation_roots(p, make_basis(2, Grid(64)))


def test_worked_roots():
    g = Grid(256)
    roots = find_bifurcation_roots(worked_problem(), make_basis(2, g))
    assert len(roots) == 1
    assert abs(roots[0].c_bar - 2.0) <= 1e-10
    assert abs(roots[0].transversality - 24.0) <= 1e-6
    assert not roots[0].degenerate
    assert abs(roots[0].defect) <= 1e-9


def test_no_sign_change_gives_no_roots():
    p = ProblemSpec(1.0, "0", 1.0, -1.0, "v^2")  # B(c) = -2(2c^2+1)/3 < 0
    assert find_bifurcation_roots(p, make_basis(1, Grid(128))) == []


def test_tangent_root_missed_or_flagged():
    # B(c) = 2 c^2 touches zero at c = 0 without a sign change
    p = ProblemSpec(4.0, "0", 1.0, 1.0, "0", (("v^2", math.pi / 4),), ())
    roots = find_bifurcation_roots(p, make_basis(2, Grid(256)), scan_points=400)
    assert all(r.degenerate for r in roots if abs(r.c_bar) < 1e-3)
    roots = find_bifurcation_roots(p, make_basis(2, Grid(256)), c_range=(-1.0, 1.0), scan_points=3)
    assert all(r.degenerate for r in roots)


@pytest.mark.parametrize("m", [3, 4, 5])
@pytest.mark.parametrize("K", [1.0, 8.0, 27.0])
@pytest.mark.parametrize("t1", [math.pi / 4, math.pi / 3])
def test_closed_form_roots(m, K, t1):
    n = 2
    g = Grid(384)  # both pi/4 and pi/3 are nodes
    roots = find_bifurcation_roots(worked_problem(n=n, m=m, K=K, t1=t1), make_basis(n, g))
    c_cf = (K ** (1 / m) - math.cos(n * t1)) / math.sin(n * t1)
    assert min(abs(r.c_bar - c_cf) for r in roots) <= 1e-10


def test_common_scaling_of_f_and_eta():
    g = Grid(256)
    b = make_basis(2, g)
    p = worked_problem()
    q = ProblemSpec(4.0, "0", 1.0, 1.0, "3*(v^2)", (Term("3*(v^3)", math.pi / 4),), (Term("24", 0.0),))
    for c in (-1.0, 0.3, 2.5):
        assert abs(bifurcation_function(q, b, c) - 3 * bifurcation_function(p, b, c)) <= 1e-10 * (1 + abs(bifurcation_function(q, b, c)))
        assert abs(transversality(q, b, c) - 3 * transversality(p, b, c)) <= 1e-10 * (1 + abs(transversality(q, b, c)))
    rp = [r.c_bar for r in find_bifurcation_roots(p, b)]
    rq = [r.c_bar for r in find_bifurcation_roots(q, b)]
    assert len(rp) == len(rq) and all(abs(a - c) <= 1e-10 for a, c in zip(rp, rq))


# ---------------------------------------------------------------------------
# resonant solve


def _worked_root(grid):
    return find_bifurcation_roots(worked_problem(), make_basis(2, grid))[0]


def test_resonant_eps_zero_returns_family_member():
    g = Grid(256)
    root = _worked_root(g)
    r = resonant_solve(worked_problem(eps=0.0), root, grid=g)
    assert np.max(np.abs(r.solution.values - family(g, 2, root.c_bar))) <= 1e-10


def test_resonant_worked_instance():
    g = Grid(256)
    root = _worked_root(g)
    p = worked_problem(eps=1e-3)
    r = resonant_solve(p, root, grid=g)
    v = r.solution.values
    assert r.ode_residual <= 1e-8
    assert abs(v[0] - 1 - 1e-3 * v[64] ** 3) <= 1e-8
    assert abs(v[-1] - 1 - 1e-3 * 8) <= 1e-8
    assert r.c_bar == root.c_bar and r.transversality == root.transversality
    dist = np.max(np.abs(v - family(g, 2, 2.0)))
    assert 1e-4 <= dist <= 1e-2


def test_resonant_against_oracle():
    g = Grid(256)
    root = _worked_root(g)
    p = worked_problem(eps=1e-3)
    r = resonant_solve(p, root, grid=g)
    seed = GridFunction(g, family(g, 2, root.c_bar))
    fd512, fd1024, rich = _richardson(p, initial=seed)
    main = np.interp(rich.grid.t, g.t, r.solution.values)
    # plain N=512 differences are O(h^2)/eps here; the extrapolated oracle meets 1e-5
    assert np.max(np.abs(rich.values[::2] - r.solution.values)) <= 1e-5
    assert np.max(np.abs(fd512.values - main)) <= 1e-2


def test_resonant_degenerate_root():
    g = Grid(128)
    p = worked_problem(eps=1e-3)
    with pytest.raises(DegenerateRoot):
        resonant_solve(p, BifurcationRoot(2.0, 0.0, 1e-9), grid=g)


def test_resonant_epsilon_ceiling():
    g = Grid(128)
    with pytest.raises(ValueError):
        resonant_solve(worked_problem(eps=0.5), _worked_root(g), grid=g)


def test_resonant_linear_data_returns_family_member():
    g = Grid(256)
    b = make_basis(2, g)
    for eps in (0.0, 0.05):
        p = ProblemSpec(4.0, "0", 1.0, 1.0, "0", (), (), eps)
        root = make_root(p, b, 0.7)
        assert root.degenerate
        r = resonant_solve(p, root, basis=b, transversality_floor=-1.0)
        assert np.max(np.abs(r.solution.values - family(g, 2, 0.7))) <= 1e-15


# ---------------------------------------------------------------------------
# continuation


def test_continuation_single_step_equals_direct():
    g = Grid(256)
    a = continue_in_epsilon(PICARD, 0.01, 1, grid=g)
    b = newton_solve(PICARD, grid=g)
    assert len(a) == 1 and a.failed_at is None
    assert np.max(np.abs(a[0].solution.values - b.solution.values)) <= 1e-13


def test_continuation_zero_target_is_linear():
    g = Grid(256)
    run = continue_in_epsilon(PICARD, 0.0, 3, grid=g)
    for r in run:
        assert np.max(np.abs(r.solution.values - _linear(PICARD, g))) <= 1e-13


def test_continuation_resonant_is_lipschitz_in_eps():
    g = Grid(256)
    root = _worked_root(g)
    run = continue_in_epsilon(worked_problem(), 0.01, 10, root=root, grid=g)
    assert run.failed_at is None and len(run) == 10
    prev = family(g, 2, root.c_bar)
    gaps = []
    for r in run:
        gaps.append(np.max(np.abs(r.solution.values - prev)) / 1e-3)
        prev = r.solution.values
    assert max(gaps) <= 10.0
    assert max(gaps) <= 1.5 * min(gaps)


def test_continuation_reports_failure_point():
    # v'' = -eps e^v with zero boundary values has no solution past the fold near eps = 0.356
    p = ProblemSpec(0.0, "0", 0.0, 0.0, "-exp(v)", (), (), 1.0)
    run = continue_in_epsilon(p, 1.0, 10)
    assert run.failed_at is not None and 0.3 < run.failed_at <= 0.5
    assert len(run) == round(run.failed_at * 10) - 1
    assert run.error


def test_continuation_needs_root_at_resonance():
    with pytest.raises(ValueError):
        continue_in_epsilon(worked_problem(), 0.01, 2)
