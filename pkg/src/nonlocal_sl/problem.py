"""Problem description and the nonlinear substitution operator F(v) = (f(., v), eta1(v), eta2(v))."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .grid import BoundaryTriple, Grid, GridFunction, sample


@dataclass(frozen=True)
class Term:
    """One summand g(v(point)) of a multi-point functional."""

    g: E.Expr
    point: float
    dg: E.Expr = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = E.parse(self.g, ("v",)) if isinstance(self.g, str) else self.g
        if not E.variables(g) <= {"v"}:
            raise ValueError(f"boundary function {E.to_text(g)!r} may only use v")
        point = float(self.point)
        if not (0.0 <= point <= math.pi):
            raise ValueError(f"point {point!r} lies outside [0, pi]")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "dg", E.diff(g, "v"))


@dataclass(frozen=True)
class NonlocalFunctional:
    """eta(v) = sum_k g_k(v(t_k)), point values by linear interpolation."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple(t if isinstance(t, Term) else Term(*t) for t in self.terms)
        object.__setattr__(self, "terms", terms)

    @property
    def points(self):
        return [t.point for t in self.terms]


def interpolation_row(grid, point):
    """Weights w with w @ v.values == v(point) under linear interpolation."""
    row = np.zeros(grid.size)
    s = point / grid.step
    i = min(int(math.floor(s)), grid.N - 1)
    frac = s - i
    if abs(frac - 1.0) < 1e-12:
        i, frac = i + 1, 0.0
    elif frac < 1e-12:
        frac = 0.0
    if i >= grid.N:
        row[grid.N] = 1.0
        return row
    row[i] += 1.0 - frac
    if frac:
        row[i + 1] += frac
    return row


def eval_functional(eta, v):
    total = 0.0
    for term in eta.terms:
        total += E.evaluate(term.g, {"v": float(interpolation_row(v.grid, term.point) @ v.values)})
    return float(total)


def eval_functional_derivative(eta, v, w):
    """sum_k g_k'(v(t_k)) * w(t_k)."""
    return float(functional_gradient(eta, v) @ w.values)


def functional_gradient(eta, v):
    """Row vector r with eta'(v)(w) = r @ w.values."""
    row = np.zeros(v.grid.size)
    for term in eta.terms:
        weights = interpolation_row(v.grid, term.point)
        row += E.evaluate(term.dg, {"v": float(weights @ v.values)}) * weights
    return row


@dataclass(frozen=True)
class ProblemSpec:
    """v'' + lam v = h(x) + eps f(x, v),  v(0) = h1 + eps eta1(v),  v(pi) = h2 + eps eta2(v)."""

    lam: float
    h: E.Expr
    h1: float
    h2: float
    f: E.Expr
    eta1: NonlocalFunctional = NonlocalFunctional()
    eta2: NonlocalFunctional = NonlocalFunctional()
    epsilon: float = 0.0
    df: E.Expr = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = E.parse(self.h, ("x",)) if isinstance(self.h, str) else self.h
        f = E.parse(self.f, ("x", "v")) if isinstance(self.f, str) else self.f
        if not E.variables(h) <= {"x"}:
            raise ValueError("forcing h may only use x")
        if not E.variables(f) <= {"x", "v"}:
            raise ValueError("nonlinearity f may only use x and v")
        for name in ("lam", "h1", "h2", "epsilon"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        for name in ("eta1", "eta2"):
            eta = getattr(self, name)
            if not isinstance(eta, NonlocalFunctional):
                object.__setattr__(self, name, NonlocalFunctional(tuple(eta)))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "df", E.diff(f, "v"))

    def with_epsilon(self, epsilon):
        return ProblemSpec(self.lam, self.h, self.h1, self.h2, self.f, self.eta1, self.eta2, epsilon)

    def forcing(self, grid):
        """The linear data (h, h1, h2) sampled on `grid`."""
        return BoundaryTriple(sample(self.h, grid), self.h1, self.h2)

    def points(self):
        return self.eta1.points + self.eta2.points


FTriple = BoundaryTriple


def f_values(p, v):
    t = v.grid.t
    return E.evaluate_on(p.f, t, {"x": t, "v": v.values})


def df_values(p, v):
    t = v.grid.t
    return E.evaluate_on(p.df, t, {"x": t, "v": v.values})


def apply_F(p, v):
    """F(v) = (f(x, v(x)), eta1(v), eta2(v))."""
    return BoundaryTriple(GridFunction(v.grid, f_values(p, v)), eval_functional(p.eta1, v), eval_functional(p.eta2, v))


def apply_DF(p, v, w):
    """DF(v) w = (f_v(x, v(x)) w(x), eta1'(v) w, eta2'(v) w)."""
    return BoundaryTriple(
        GridFunction(v.grid, df_values(p, v) * w.values),
        eval_functional_derivative(p.eta1, v, w),
        eval_functional_derivative(p.eta2, v, w),
    )


def derivative_blocks(p, v):
    """(diag, row1, row2): DF(v) w = (diag * w, row1 @ w, row2 @ w)."""
    return df_values(p, v), functional_gradient(p.eta1, v), functional_gradient(p.eta2, v)


def off_node_points(p, grid, tol=1e-12):
    """Nonlocal points farther than `tol` from every node of `grid`."""
    return [pt for pt in p.points() if grid.node_index(pt, tol) is None]


def suggest_grid(p, N_min, N_max=4096):
    """Smallest even N >= N_min placing every nonlocal point on a node, or None."""
    for N in range(N_min + (N_min % 2), N_max + 1, 2):
        if not off_node_points(p, Grid(N)):
            return N
    return None
