"""Brute-force check: three-point finite differences plus damped Newton.

Shares nothing with the solvers beyond expression evaluation and the
interpolation used for point values, so agreement between the two is
meaningful.
"""

from __future__ import annotations

import math

import numpy as np

from ._dense import solve_checked
from .errors import DomainError, NoConvergence
from .grid import Grid, GridFunction, resample
from .problem import df_values, eval_functional, f_values, functional_gradient

MAX_HALVINGS = 30
MAX_COND = 1e14


def fd_residual(p, u, h_vals):
    """Residual of the discrete system at node values `u` (a GridFunction)."""
    vals = u.values
    step = u.grid.step
    eps = p.epsilon
    R = np.empty_like(vals)
    R[1:-1] = (vals[:-2] - 2 * vals[1:-1] + vals[2:]) / step ** 2 + p.lam * vals[1:-1] - h_vals[1:-1] \
        - eps * f_values(p, u)[1:-1]
    R[0] = vals[0] - p.h1 - eps * eval_functional(p.eta1, u)
    R[-1] = vals[-1] - p.h2 - eps * eval_functional(p.eta2, u)
    return R


def fd_jacobian(p, u):
    grid = u.grid
    n = grid.size
    inv = 1.0 / grid.step ** 2
    eps = p.epsilon
    J = np.zeros((n, n))
    i = np.arange(1, n - 1)
    J[i, i - 1] = inv
    J[i, i + 1] = inv
    J[i, i] = -2 * inv + p.lam - eps * df_values(p, u)[1:-1]
    J[0] = -eps * functional_gradient(p.eta1, u)
    J[0, 0] += 1.0
    J[-1] = -eps * functional_gradient(p.eta2, u)
    J[-1, -1] += 1.0
    return J


def fd_solve(p, N, initial=None, tol=1e-12, max_iter=50):
    """Solve the finite-difference system on N panels by damped Newton.

    Each step halves its length (at most 30 times) until the residual
    2-norm decreases.  `initial` is interpolated onto the grid if needed.
    """
    grid = Grid(N)
    h_vals = p.forcing(grid).h.values
    if initial is None:
        u = GridFunction.zeros(grid)
    else:
        u = resample(initial, grid)
    try:
        R = fd_residual(p, u, h_vals)
    except DomainError as exc:
        raise NoConvergence(f"fd_solve: initial guess outside the domain of f ({exc})", 0) from exc
    norm = float(np.linalg.norm(R))
    for k in range(1, max_iter + 1):
        J = fd_jacobian(p, u)
        delta = solve_checked(J, -R, MAX_COND, "finite-difference Jacobian (discrete resonance?)")
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            try:
                trial = GridFunction(grid, u.values + alpha * delta)
                R_trial = fd_residual(p, trial, h_vals)
                trial_norm = float(np.linalg.norm(R_trial))
            except (DomainError, ValueError):
                trial_norm = math.inf
            if trial_norm < norm or trial_norm <= 1e-13 * (1 + norm):
                break
            alpha *= 0.5
        else:
            # no decrease possible: accept when the full Newton step is already at rounding level
            if float(np.max(np.abs(delta))) <= 1e-9 * max(1.0, float(np.max(np.abs(u.values)))):
                return u
            raise NoConvergence(f"fd_solve: line search failed at iteration {k} (residual {norm:.3e})", k)
        u, R, norm = trial, R_trial, trial_norm
        step = alpha * float(np.max(np.abs(delta)))
        if step <= tol * max(1.0, float(np.max(np.abs(u.values)))):
            return u
    raise NoConvergence(f"fd_solve: no convergence after {max_iter} iterations (residual {norm:.3e})", max_iter)


def fd_refine_study(p, N_list, initial=None, **kwargs):
    """[(N, sup-norm difference to the finest solution at the coarse nodes)] for all but the finest N."""
    N_list = sorted(set(N_list))
    solutions = {N: fd_solve(p, N, initial=initial, **kwargs) for N in N_list}
    finest = solutions[N_list[-1]]
    table = []
    for N in N_list[:-1]:
        coarse = solutions[N]
        ref = np.interp(coarse.grid.t, finest.grid.t, finest.values)
        table.append((N, float(np.max(np.abs(coarse.values - ref)))))
    return table


def observed_order(table):
    """Least-squares slope of -log(diff) against log(N)."""
    if len(table) < 2:
        raise ValueError("need at least two refinement levels")
    N = np.log([row[0] for row in table])
    d = np.log([row[1] for row in table])
    slope = np.polyfit(N, d, 1)[0]
    return float(-slope)
