"""The linear problem v'' + lam*v = h, v(0) = h1, v(pi) = h2 away from resonance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import ResonantLambda, SingularBoundarySystem
from .grid import BoundaryTriple, Grid, GridFunction, cumulative_integral, panel_integrals, second_difference

RESONANCE_TOL = 1e-9
MAX_BOUNDARY_COND = 1e12


@dataclass(frozen=True)
class LinearSolve:
    lam: float
    solution: GridFunction
    residual_ode: float
    bc_defect: tuple


def is_resonant(lam, tol=RESONANCE_TOL):
    """Return n if |lam - n^2| <= tol for some integer n >= 1, else None."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if lam <= 0:
        return None
    n = max(1, int(round(math.sqrt(lam))))
    if abs(lam - n * n) <= tol:
        return n
    return None


def _require_nonresonant(lam, tol=RESONANCE_TOL):
    n = is_resonant(lam, tol)
    if n is not None:
        raise ResonantLambda(lam, n)


def _fundamental(lam, t):
    """Fundamental pair (b1, b2) of v'' + lam*v = 0 sampled at t.

    For lam < 0 the decaying exponentials exp(-kt), exp(-k(pi-t)) are used
    instead of cosh/sinh; they span the same space and keep the boundary
    system well conditioned for any negative lam.
    """
    if lam > 0:
        k = math.sqrt(lam)
        return np.cos(k * t), np.sin(k * t)
    if lam == 0:
        return np.ones_like(t), np.asarray(t, dtype=float).copy()
    k = math.sqrt(-lam)
    return np.exp(-k * t), np.exp(-k * (math.pi - t))


def _particular(lam, N, H):
    """A particular solution of v'' + lam*v = H (columns independent)."""
    t = Grid(N).t
    col = t[:, None] if H.ndim == 2 else t
    if lam > 0:
        k = math.sqrt(lam)
        c = np.cos(k * col)
        s = np.sin(k * col)
        return (s * cumulative_integral(c * H, N) - c * cumulative_integral(s * H, N)) / k
    if lam == 0:
        return col * cumulative_integral(H, N) - cumulative_integral(col * H, N)
    # v_p(t) = -1/(2k) * int_0^pi exp(-k|t-s|) h(s) ds, accumulated as two
    # stable recursions so no exp(+k t) growth appears
    k = math.sqrt(-lam)
    step = math.pi / N
    decay = math.exp(-k * step)
    fwd_panels = panel_integrals(H, N, lambda left, s: np.exp(-k * (left + step - s)))
    bwd_panels = panel_integrals(H, N, lambda left, s: np.exp(-k * (s - left)))
    fwd = np.zeros_like(H)
    fwd[1:] = lfilter([1.0], [1.0, -decay], fwd_panels, axis=0)
    bwd = np.zeros_like(H)
    bwd[:-1] = lfilter([1.0], [1.0, -decay], bwd_panels[::-1], axis=0)[::-1]
    return -(fwd + bwd) / (2.0 * k)


def boundary_matrix(lam):
    b1, b2 = _fundamental(lam, np.array([0.0, math.pi]))
    return np.array([[b1[0], b2[0]], [b1[1], b2[1]]])


def apply_inverse(lam, N, H, h1, h2):
    """Array-level solve of L_lam v = (H, h1, h2); H may hold several columns."""
    H = np.asarray(H, dtype=float)
    M = boundary_matrix(lam)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > MAX_BOUNDARY_COND:
        raise SingularBoundarySystem(cond)
    vp = _particular(lam, N, H)
    rhs = np.array([np.asarray(h1, dtype=float) - vp[0], np.asarray(h2, dtype=float) - vp[-1]])
    coef = np.linalg.solve(M, rhs)
    b1, b2 = _fundamental(lam, Grid(N).t)
    if H.ndim == 2:
        b1, b2 = b1[:, None], b2[:, None]
    v = vp + coef[0] * b1 + coef[1] * b2
    # the boundary values are the data exactly, not up to rounding in the basis
    v[0] = h1
    v[-1] = h2
    return v


def inverse_matrices(lam, grid):
    """(G, w1, w2) with L_lam^{-1}(h, h1, h2) = G @ h + h1*w1 + h2*w2 on `grid`."""
    _require_nonresonant(lam)
    N = grid.N
    n = grid.size
    G = apply_inverse(lam, N, np.eye(n), np.zeros(n), np.zeros(n))
    w1 = apply_inverse(lam, N, np.zeros(n), 1.0, 0.0)
    w2 = apply_inverse(lam, N, np.zeros(n), 0.0, 1.0)
    return G, w1, w2


def ode_residual_2nd(lam, v, h):
    """Sup norm of v'' + lam*v - h at interior nodes, three-point stencil."""
    vals = v.values
    r = second_difference(vals, v.grid.step) + lam * vals[1:-1] - h.values[1:-1]
    return float(np.max(np.abs(r))) if r.size else 0.0


def solve_linear(lam, rhs, resonance_tol=RESONANCE_TOL):
    """Solve v'' + lam*v = h, v(0) = h1, v(pi) = h2 for nonresonant lam.

    The solution is a particular solution from variation of parameters plus a
    combination of the fundamental pair fixed by the 2x2 boundary system.
    Raises `ResonantLambda` when lam is within `resonance_tol` of some n^2
    and `SingularBoundarySystem` when the boundary system is too ill
    conditioned to trust.
    """
    _require_nonresonant(lam, resonance_tol)
    grid = rhs.grid
    v = GridFunction(grid, apply_inverse(lam, grid.N, rhs.h.values, rhs.h1, rhs.h2))
    return LinearSolve(
        lam=float(lam),
        solution=v,
        residual_ode=ode_residual_2nd(lam, v, rhs.h),
        bc_defect=(abs(v.values[0] - rhs.h1), abs(v.values[-1] - rhs.h2)),
    )


def inverse_norm_estimate(lam, grid):
    """Estimate of the sup-norm operator norm of L_lam^{-1}.

    Probes the inverse with unit-mass hat functions at every node (which
    approximate the Green's function columns) and with unit boundary data.
    For data (h, h1, h2) measured in max(sup|h|, |h1|, |h2|) the returned
    value pi*max_j sup|G_j| + sup|w1| + sup|w2| bounds the response up to
    discretization error.  It is an estimate, not a certified bound.
    """
    _require_nonresonant(lam)
    N = grid.N
    n = grid.size
    hats = np.eye(n) / grid.step
    hats[0, 0] *= 2.0
    hats[-1, -1] *= 2.0
    G = apply_inverse(lam, N, hats, np.zeros(n), np.zeros(n))
    w1 = apply_inverse(lam, N, np.zeros(n), 1.0, 0.0)
    w2 = apply_inverse(lam, N, np.zeros(n), 0.0, 1.0)
    green = float(np.max(np.abs(G)))
    return math.pi * green + float(np.max(np.abs(w1))) + float(np.max(np.abs(w2)))


def linear_triple(grid, h, h1, h2):
    return BoundaryTriple(h if isinstance(h, GridFunction) else GridFunction(grid, np.broadcast_to(h, (grid.size,))), h1, h2)
