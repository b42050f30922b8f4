"""Steady-state head of a one-dimensional unconfined aquifer and its mapping onto ProblemSpec.

Physical model on 0 <= x <= L:

    alpha v''(x) = -beta(x, v),   v(0) = h1 + eps eta1(v),   v(L) = h2 + eps eta2(v)

With the recharge split as beta(x, v) = lam v - h(x) - eps f(x, v) this is

    alpha v'' + lam v = h + eps f(x, v).

Sign convention: for constant recharge (lam = 0, eps = 0) we get h = -beta,
so v'' = -beta/alpha and the classical parabola below.

Rescaling: t = pi x / L maps [0, L] onto [0, pi] and d^2/dx^2 = (pi/L)^2 d^2/dt^2.
Dividing by alpha (pi/L)^2 gives v_tt + lam_t v = h_t + eps f_t with

    s = (L/pi)^2 / alpha,   lam_t = s lam,   h_t(t) = s h(L t/pi),   f_t(t, v) = s f(L t/pi, v)

Boundary data and the nonlocal functionals are unchanged apart from their
evaluation points, which map as t_k = pi x_k / L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as E
from .grid import DEFAULT_N, Grid, GridFunction
from .problem import NonlocalFunctional, ProblemSpec, Term


@dataclass(frozen=True)
class AquiferParams:
    alpha: float
    beta: float
    L: float
    h1: float
    h2: float

    def __post_init__(self):
        for name in ("alpha", "beta", "L", "h1", "h2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.L <= 0:
            raise ValueError("L must be positive")


@dataclass(frozen=True)
class SteadyHead:
    """v(x) = c2 x^2 + c1 x + c0 on [0, L]."""

    c2: float
    c1: float
    c0: float
    L: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (self.c2 * x + self.c1) * x + self.c0

    def sample(self, N=DEFAULT_N):
        """Samples at x = L t/pi for the nodes t of Grid(N), returned on that grid."""
        grid = Grid(N)
        return GridFunction(grid, self(self.L * grid.t / math.pi))

    def physical_nodes(self, N=DEFAULT_N):
        return self.L * Grid(N).t / math.pi


def steady_state_head(a):
    """Constant-recharge, constant-head profile of the aquifer."""
    c2 = -a.beta / (2 * a.alpha)
    c1 = (a.h2 - a.h1) / a.L + a.beta * a.L / (2 * a.alpha)
    return SteadyHead(c2, c1, a.h1, a.L)


@dataclass(frozen=True)
class Rescaling:
    """Change of variables t = pi x / L with the factor s = (L/pi)^2 / alpha."""

    L: float
    alpha: float

    @property
    def x_scale(self):
        """dx/dt = L/pi."""
        return self.L / math.pi

    @property
    def factor(self):
        return self.x_scale ** 2 / self.alpha

    @property
    def identity(self):
        return self.L == math.pi and self.alpha == 1.0

    def to_t(self, x):
        return math.pi * float(x) / self.L

    def to_x(self, t):
        return self.L * np.asarray(t, dtype=float) / math.pi

    def lines(self):
        return [
            f"rescaling_x_scale={self.x_scale:.17g}",
            f"rescaling_factor={self.factor:.17g}",
        ]


def rescaling(a):
    return Rescaling(a.L, a.alpha)


def _scaled(e, r):
    if r.identity:
        return e
    e = E.substitute(e, "x", E.simplify_binary("*", E.Const(r.x_scale), E.Var("x")))
    return E.simplify_binary("*", E.Const(r.factor), e)


def _map_functional(eta, r, a):
    if eta is None:
        return NonlocalFunctional()
    if isinstance(eta, NonlocalFunctional):
        eta = eta.terms
    out = []
    for term in eta:
        g, x = (term.g, term.point) if isinstance(term, Term) else term
        x = float(x)
        if not 0.0 <= x <= a.L:
            raise ValueError(f"point {x!r} lies outside [0, L={a.L!r}]")
        out.append(Term(g, x if r.identity else min(r.to_t(x), math.pi)))
    return NonlocalFunctional(tuple(out))


def build_problem(a, lam=0.0, f="0", eta1=None, eta2=None, epsilon=0.0, h=None):
    """ProblemSpec on [0, pi] for the aquifer with recharge beta(x, v) = lam v - h - eps f.

    `f` is an expression in physical x and v; `h` defaults to the constant
    -beta of the aquifer.  `eta1`/`eta2` are sequences of (g, x_k) with x_k in
    [0, L].  See the module docstring for the scaling; `rescaling(a)` returns
    the factors applied.
    """
    r = rescaling(a)
    f = E.parse(f, ("x", "v")) if isinstance(f, str) else f
    if h is None:
        h = E.Const(-a.beta)
    elif isinstance(h, str):
        h = E.parse(h, ("x",))
    elif not isinstance(h, E.Expr):
        h = E.Const(float(h))
    return ProblemSpec(
        lam=float(lam) if r.identity else r.factor * float(lam),
        h=_scaled(h, r),
        h1=a.h1,
        h2=a.h2,
        f=_scaled(f, r),
        eta1=_map_functional(eta1, r, a),
        eta2=_map_functional(eta2, r, a),
        epsilon=epsilon,
    )
