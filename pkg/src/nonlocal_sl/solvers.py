"""Nonlinear solvers: Picard and Newton away from resonance, Lyapunov-Schmidt at lam = n^2.

All solvers work on the node values of a `Grid`.  Linear operators
(L_lam^{-1}, M_n, the projections) are assembled once as dense matrices by
applying them to unit vectors; N <= 1024 keeps this cheap.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from ._dense import solve_checked
from .errors import (
    DegenerateRoot,
    DomainError,
    NoConvergence,
    NotInImage,
    ResonantLambda,
    SingularJacobian,
)
from .grid import DEFAULT_N, Grid, GridFunction, integrate, quadrature_weights, second_derivative, sup_norm
from .linear import RESONANCE_TOL, apply_inverse, inverse_matrices, inverse_norm_estimate, is_resonant
from .problem import apply_F, derivative_blocks, eval_functional, f_values, functional_gradient, df_values
from .resonance import (
    generalized_inverse,
    generalized_inverse_values,
    make_basis,
)

log = logging.getLogger(__name__)

TRANSVERSALITY_FLOOR = 1e-8
EPSILON_CEILING = 0.1
RESIDUAL_TOL = 1e-6
MAX_JACOBIAN_COND = 1e13


class ContractionWarning(UserWarning):
    pass


@dataclass
class SolveReport:
    solution: GridFunction
    iterations: int
    ode_residual: float
    bc_residual: tuple
    method: str
    diagnostics: list = field(default_factory=list)
    epsilon: float = 0.0
    warnings: list = field(default_factory=list)
    contraction_ratio: float | None = None
    contraction_estimate: float | None = None
    c_bar: float | None = None
    transversality: float | None = None

    def summary(self):
        """key=value lines, floats with 17 significant digits."""
        lines = [
            f"method={self.method}",
            f"epsilon={self.epsilon:.17g}",
            f"iterations={self.iterations}",
            f"N={self.solution.grid.N}",
            f"ode_residual={self.ode_residual:.17g}",
            f"bc_residual_left={self.bc_residual[0]:.17g}",
            f"bc_residual_right={self.bc_residual[1]:.17g}",
        ]
        for key in ("contraction_ratio", "contraction_estimate", "c_bar", "transversality"):
            value = getattr(self, key)
            if value is not None:
                lines.append(f"{key}={value:.17g}")
        if self.diagnostics:
            lines.append("step_norms=" + ",".join(f"{s:.17g}" for s in self.diagnostics))
        for w in self.warnings:
            lines.append(f"warning={w}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BifurcationRoot:
    c_bar: float
    defect: float
    transversality: float
    degenerate: bool = False


def _grid(grid):
    return grid if grid is not None else Grid(DEFAULT_N)


def verify_solution(p, v):
    """Residuals of the full nonlinear problem, independent of how v was found.

    The ODE residual is the sup over interior nodes of
    |v'' + lam v - h - eps f(x, v)| with v'' from the high-order stencil; the
    boundary residuals evaluate the nonlocal conditions directly.
    """
    grid = v.grid
    vals = v.values
    h = p.forcing(grid).h.values
    r = second_derivative(vals, grid.step) + p.lam * vals - h - p.epsilon * f_values(p, v)
    ode = float(np.max(np.abs(r[1:-1]))) if grid.N > 1 else 0.0
    bc1 = abs(vals[0] - p.h1 - p.epsilon * eval_functional(p.eta1, v))
    bc2 = abs(vals[-1] - p.h2 - p.epsilon * eval_functional(p.eta2, v))
    return ode, (float(bc1), float(bc2))


def _finish(p, v, iterations, method, steps, residual_tol, **extra):
    ode, bc = verify_solution(p, v)
    report = SolveReport(v, iterations, ode, bc, method, list(steps), p.epsilon, **extra)
    if max(ode, *bc) > residual_tol:
        raise NoConvergence(
            f"{method}: iteration stopped but the residual check failed "
            f"(ode={ode:.3e}, bc={bc[0]:.3e},{bc[1]:.3e} > {residual_tol:.1e})",
            iterations,
        )
    return report


def _F_array(p, v):
    F = apply_F(p, v)
    return F.h.values, F.h1, F.h2


def _derivative_norm(p, v):
    """Operator norm of DF(v) for the max(sup, |.|, |.|) norm on triples."""
    d, r1, r2 = derivative_blocks(p, v)
    return max(float(np.max(np.abs(d))), float(np.sum(np.abs(r1))), float(np.sum(np.abs(r2))))


def lipschitz_estimate(p, v0, radius=None, samples=16, seed=0):
    """Sampled Lipschitz constant of F near v0 (max of |DF| over a ball)."""
    grid = v0.grid
    if radius is None:
        radius = 0.1 * (1.0 + sup_norm(v0))
    rng = np.random.default_rng(seed)
    t = grid.t
    best = _derivative_norm(p, v0)
    for _ in range(samples):
        coef = rng.uniform(-1.0, 1.0, 4)
        shape = sum(c * np.sin((j + 1) * t + j) for j, c in enumerate(coef))
        shape /= max(np.max(np.abs(shape)), 1e-300)
        scale = rng.uniform(0.0, radius)
        try:
            best = max(best, _derivative_norm(p, v0 + GridFunction(grid, scale * shape)))
        except DomainError:
            continue
    return best


def _require_nonresonant(p):
    n = is_resonant(p.lam, RESONANCE_TOL)
    if n is not None:
        raise ResonantLambda(p.lam, n)


# ---------------------------------------------------------------------------
# nonresonant solvers


def picard_solve(p, grid=None, tol=1e-12, max_iter=500, residual_tol=RESIDUAL_TOL):
    """Fixed-point iteration v <- L^{-1}(h + eps F(v)) started at L^{-1} h.

    Converges when |eps| ||L^{-1}|| Lip(F) < 1.  That product is estimated
    up front and a `ContractionWarning` is issued when it is >= 1; the
    iteration still runs, and either converges or raises `NoConvergence`.
    """
    _require_nonresonant(p)
    grid = _grid(grid)
    G, w1, w2 = inverse_matrices(p.lam, grid)
    rhs = p.forcing(grid)

    def H(v):
        f, e1, e2 = _F_array(p, v)
        eps = p.epsilon
        return GridFunction(grid, G @ (rhs.h.values + eps * f) + (p.h1 + eps * e1) * w1 + (p.h2 + eps * e2) * w2)

    v = GridFunction(grid, G @ rhs.h.values + p.h1 * w1 + p.h2 * w2)
    if p.epsilon == 0.0:
        return _finish(p, v, 1, "picard", [], residual_tol)

    notes = []
    estimate = abs(p.epsilon) * inverse_norm_estimate(p.lam, grid) * lipschitz_estimate(p, v)
    if estimate >= 1.0:
        msg = f"contraction estimate |eps|*||L^-1||*Lip(F) = {estimate:.3g} >= 1; convergence not guaranteed"
        warnings.warn(msg, ContractionWarning, stacklevel=2)
        notes.append(msg)

    steps = []
    ratio = None
    for k in range(1, max_iter + 1):
        try:
            v_new = H(v)
        except (DomainError, ValueError) as exc:
            raise NoConvergence(f"picard: iterate left the domain of F ({exc})", k, ratio) from exc
        step = sup_norm(v_new - v)
        if steps and steps[-1] > 0:
            ratio = step / steps[-1]
        steps.append(step)
        v = v_new
        if step <= tol * max(1.0, sup_norm(v)):
            return _finish(p, v, k, "picard", steps, residual_tol, warnings=notes,
                           contraction_ratio=ratio, contraction_estimate=estimate)
        if not math.isfinite(step) or step > 1e12 * (1.0 + steps[0]):
            break
    raise NoConvergence(f"picard: no convergence after {len(steps)} iterations (last ratio {ratio})",
                        len(steps), ratio)


def newton_solve(p, initial=None, grid=None, tol=1e-12, max_iter=50, residual_tol=RESIDUAL_TOL):
    """Newton's method on G(v) = v - L^{-1} h - eps L^{-1} F(v).

    The Jacobian I - eps L^{-1} DF(v) is assembled densely on the grid.
    """
    _require_nonresonant(p)
    if initial is not None:
        grid = initial.grid
    grid = _grid(grid)
    G, w1, w2 = inverse_matrices(p.lam, grid)
    rhs = p.forcing(grid)
    base = G @ rhs.h.values + p.h1 * w1 + p.h2 * w2
    eps = p.epsilon
    v = initial.values.copy() if initial is not None else np.zeros(grid.size)

    def residual(vals):
        f, e1, e2 = _F_array(p, GridFunction(grid, vals))
        return vals - base - eps * (G @ f + e1 * w1 + e2 * w2)

    steps = []
    try:
        r = residual(v)
        for k in range(1, max_iter + 1):
            d, r1, r2 = derivative_blocks(p, GridFunction(grid, v))
            J = np.eye(grid.size) - eps * (G * d[None, :] + np.outer(w1, r1) + np.outer(w2, r2))
            delta = _solve(J, -r)
            v = v + delta
            steps.append(float(np.max(np.abs(delta))))
            r = residual(v)
            scale = max(1.0, float(np.max(np.abs(v))))
            if steps[-1] <= tol * scale or float(np.max(np.abs(r))) <= tol * scale * 1e-2:
                return _finish(p, GridFunction(grid, v), k, "newton", steps, residual_tol)
            if not np.all(np.isfinite(v)):
                break
    except (DomainError, ValueError) as exc:
        raise NoConvergence(f"newton: iterate left the domain of F ({exc})", len(steps)) from exc
    raise NoConvergence(f"newton: no convergence after {len(steps)} iterations", len(steps))


def _solve(J, rhs):
    return solve_checked(J, rhs, MAX_JACOBIAN_COND)


# ---------------------------------------------------------------------------
# resonance: bifurcation equation


def _basis_for(p, basis, grid):
    if basis is not None:
        return basis
    n = is_resonant(p.lam, RESONANCE_TOL)
    if n is None:
        raise ValueError(f"lambda={p.lam!r} is not resonant")
    return make_basis(n, _grid(grid))


def particular_solution(p, basis):
    """The particular solution u0 = M_n h orthogonal to the kernel (NotInImage if none)."""
    return generalized_inverse(basis, p.forcing(basis.grid))


def family_member(p, basis, c, u0=None):
    """u_c = u0 + c sin(n t), the one-parameter family of linear solutions."""
    if u0 is None:
        u0 = particular_solution(p, basis)
    return u0 + GridFunction(basis.grid, c * np.sin(basis.n * basis.grid.t))


def _bifurcation_value(p, basis, u):
    n = basis.n
    sin_n = np.sin(n * basis.grid.t)
    left = n * (eval_functional(p.eta1, u) + basis.sign * eval_functional(p.eta2, u))
    return left - integrate(GridFunction(basis.grid, f_values(p, u) * sin_n))


def _transversality_value(p, basis, u):
    n = basis.n
    grid = basis.grid
    sin_n = np.sin(n * grid.t)
    left = n * (functional_gradient(p.eta1, u) @ sin_n + basis.sign * (functional_gradient(p.eta2, u) @ sin_n))
    return left - integrate(GridFunction(grid, df_values(p, u) * sin_n ** 2))


def bifurcation_function(p, basis, c, u0=None):
    """B(c) = n[eta1(u_c) + (-1)^(n+1) eta2(u_c)] - int f(s, u_c(s)) sin(ns) ds."""
    return _bifurcation_value(p, basis, family_member(p, basis, c, u0))


def transversality(p, basis, c, u0=None):
    """T(c) = n[eta1'(u_c) sin(n.) + (-1)^(n+1) eta2'(u_c) sin(n.)] - int f_v(s, u_c) sin^2(ns) ds."""
    return _transversality_value(p, basis, family_member(p, basis, c, u0))


def scan_bifurcation(p, basis, c_range, scan_points, u0=None):
    """Uniform scan of (c, B(c), T(c))."""
    if scan_points < 2:
        raise ValueError("scan_points must be >= 2")
    if u0 is None:
        u0 = particular_solution(p, basis)
    cs = np.linspace(c_range[0], c_range[1], scan_points)
    B = np.array([bifurcation_function(p, basis, c, u0) for c in cs])
    T = np.array([transversality(p, basis, c, u0) for c in cs])
    return cs, B, T


def find_bifurcation_roots(p, basis, c_range=(-10.0, 10.0), scan_points=401,
                           transversality_floor=TRANSVERSALITY_FLOOR, xtol=1e-12):
    """Roots of B on `c_range`, bracketed by sign changes on a uniform scan.

    Each bracket is refined by bisection.  Roots with |T| <= floor are
    returned flagged ``degenerate``.  Roots where B touches zero without
    changing sign (even multiplicity) are not detected.
    """
    u0 = particular_solution(p, basis)
    cs, B, _ = scan_bifurcation(p, basis, c_range, scan_points, u0=u0)
    roots = []
    for i in range(scan_points):
        if B[i] == 0.0:
            roots.append(float(cs[i]))
        elif i + 1 < scan_points and B[i + 1] != 0.0 and np.sign(B[i]) != np.sign(B[i + 1]):
            roots.append(bisect(lambda c: bifurcation_function(p, basis, c, u0), cs[i], cs[i + 1],
                                xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500))
    out = []
    for c in roots:
        T = transversality(p, basis, c, u0)
        out.append(BifurcationRoot(float(c), float(bifurcation_function(p, basis, c, u0)), float(T),
                                   bool(abs(T) <= transversality_floor)))
    return out


def make_root(p, basis, c, transversality_floor=TRANSVERSALITY_FLOOR):
    """BifurcationRoot record for a known parameter value c."""
    T = transversality(p, basis, c)
    return BifurcationRoot(float(c), float(bifurcation_function(p, basis, c)), float(T),
                           bool(abs(T) <= transversality_floor))


# ---------------------------------------------------------------------------
# resonance: reduced system


class _ReducedSystem:
    """Discretized G_n(eps, u) folded into one square system.

    The first component (I-P)u - M h - eps M(I-Q)F(u) is orthogonal to psi
    and the second, <F(u), psi_vec>, is a scalar, so
        Phi(u) = (I-P)u - M h - eps M(I-Q)F(u) + <F(u), psi_vec> psi
    vanishes exactly when both components do.
    """

    def __init__(self, p, basis):
        self.p = p
        self.basis = basis
        grid = basis.grid
        n1 = grid.size
        self.grid = grid
        self.psi = basis.psi.values
        wq = quadrature_weights(grid.N)
        self.kernel_row = self.psi * wq  # <., psi> as a row
        # M on (h, h1, h2) as an (N+1) x (N+3) matrix
        eye = np.eye(n1)
        Mh = generalized_inverse_values(basis, eye, np.zeros(n1), np.zeros(n1))
        m1 = generalized_inverse_values(basis, np.zeros(n1), 1.0, 0.0)
        m2 = generalized_inverse_values(basis, np.zeros(n1), 0.0, 1.0)
        M = np.column_stack([Mh, m1, m2])
        # weighted product with psi_vec as a row over (h, h1, h2)
        pv = basis.psi_vec
        self.coimage_row = basis.weight * np.concatenate([pv.h.values * wq, [pv.h1, pv.h2]])
        psi_vec_col = np.concatenate([pv.h.values, [pv.h1, pv.h2]])
        I_minus_Q = np.eye(n1 + 2) - np.outer(psi_vec_col, self.coimage_row)
        self.A = M @ I_minus_Q
        self.u0 = particular_solution(p, basis).values

    def F(self, u):
        f, e1, e2 = _F_array(self.p, GridFunction(self.grid, u))
        return np.concatenate([f, [e1, e2]])

    def DF(self, u):
        d, r1, r2 = derivative_blocks(self.p, GridFunction(self.grid, u))
        return np.vstack([np.diag(d), r1, r2])

    def residual(self, u):
        Fu = self.F(u)
        eps = self.p.epsilon
        Pu = (self.kernel_row @ u) * self.psi
        return u - Pu - self.u0 - eps * (self.A @ Fu) + (self.coimage_row @ Fu) * self.psi

    def jacobian(self, u):
        DF = self.DF(u)
        eps = self.p.epsilon
        J = np.eye(self.grid.size) - np.outer(self.psi, self.kernel_row)
        J -= eps * (self.A @ DF)
        J += np.outer(self.psi, self.coimage_row @ DF)
        return J


def resonant_solve(p, root, basis=None, grid=None, tol=1e-12, max_iter=50, initial=None,
                   eps_ceiling=EPSILON_CEILING, transversality_floor=TRANSVERSALITY_FLOOR,
                   residual_tol=RESIDUAL_TOL):
    """Solve the resonant problem near the branch point u_{c_bar} by Newton on the reduced system.

    Requires a nondegenerate root (|T(c_bar)| > floor), otherwise
    `DegenerateRoot`; |eps| must not exceed `eps_ceiling`.
    """
    if abs(root.transversality) <= transversality_floor:
        raise DegenerateRoot(f"transversality {root.transversality:.3e} at c={root.c_bar!r} "
                             f"is below the floor {transversality_floor:.1e}")
    if abs(p.epsilon) > eps_ceiling:
        raise ValueError(f"|epsilon|={abs(p.epsilon)!r} exceeds the ceiling {eps_ceiling!r}")
    if initial is not None:
        grid = initial.grid
    basis = _basis_for(p, basis, grid)
    grid = basis.grid
    system = _ReducedSystem(p, basis)
    if initial is None:
        u = system.u0 + root.c_bar * np.sin(basis.n * grid.t)
    else:
        u = initial.values.copy()

    steps = []
    try:
        r = system.residual(u)
        if float(np.max(np.abs(r))) <= tol * max(1.0, float(np.max(np.abs(u)))) * 1e-2:
            # the seed already solves the reduced system (e.g. eps = 0, or F linear and absent)
            return _finish(p, GridFunction(grid, u), 0, "resonant", steps, residual_tol,
                           c_bar=root.c_bar, transversality=root.transversality)
        for k in range(1, max_iter + 1):
            delta = _solve(system.jacobian(u), -r)
            u = u + delta
            steps.append(float(np.max(np.abs(delta))))
            r = system.residual(u)
            scale = max(1.0, float(np.max(np.abs(u))))
            if steps[-1] <= tol * scale or float(np.max(np.abs(r))) <= tol * scale * 1e-2:
                return _finish(p, GridFunction(grid, u), k, "resonant", steps, residual_tol,
                               c_bar=root.c_bar, transversality=root.transversality)
            if not np.all(np.isfinite(u)):
                break
    except (DomainError, ValueError) as exc:
        raise NoConvergence(f"resonant: iterate left the domain of F ({exc})", len(steps)) from exc
    raise NoConvergence(f"resonant: no convergence after {len(steps)} iterations", len(steps))


# ---------------------------------------------------------------------------
# continuation


@dataclass
class Continuation:
    """Reports of a continuation run; `failed_at` is the first eps that failed, if any."""

    reports: list
    failed_at: float | None = None
    error: str | None = None

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)

    def __getitem__(self, i):
        return self.reports[i]


def continue_in_epsilon(p, eps_target, steps, root=None, grid=None, tol=1e-12, max_iter=50,
                        eps_ceiling=math.inf, residual_tol=RESIDUAL_TOL):
    """Solve at eps_k = k*eps_target/steps, k = 1..steps, warm starting each solve.

    Resonant problems need `root`.  Stops at the first failure and returns the
    reports gathered so far with the failing eps recorded.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    grid = _grid(grid)
    resonant = is_resonant(p.lam, RESONANCE_TOL) is not None
    if resonant and root is None:
        raise ValueError("a bifurcation root is required at resonance")
    basis = make_basis(is_resonant(p.lam, RESONANCE_TOL), grid) if resonant else None
    result = Continuation([])
    previous = None
    for k in range(1, steps + 1):
        eps = k * eps_target / steps
        pk = p.with_epsilon(eps)
        try:
            if resonant:
                report = resonant_solve(pk, root, basis=basis, tol=tol, max_iter=max_iter, initial=previous,
                                        eps_ceiling=eps_ceiling, residual_tol=residual_tol)
            else:
                report = newton_solve(pk, initial=previous, grid=grid, tol=tol, max_iter=max_iter,
                                      residual_tol=residual_tol)
        except (NoConvergence, SingularJacobian, NotInImage, DegenerateRoot, DomainError, ValueError) as exc:
            log.info("continuation stopped at eps=%g: %s", eps, exc)
            result.failed_at = eps
            result.error = f"{type(exc).__name__}: {exc}"
            break
        result.reports.append(report)
        previous = report.solution
    return result


def linear_solution(p, grid=None):
    """Solution at eps = 0 for nonresonant lam."""
    _require_nonresonant(p)
    grid = _grid(grid)
    rhs = p.forcing(grid)
    return GridFunction(grid, apply_inverse(p.lam, grid.N, rhs.h.values, rhs.h1, rhs.h2))
