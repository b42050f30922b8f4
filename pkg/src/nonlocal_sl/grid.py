"""Uniform mesh on [0, pi], sampled functions, quadrature and inner products."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import expr as _expr
from .errors import GridMismatch

DEFAULT_N = 256
# nodes per local interpolant: cumulative integration / residual second derivatives
STENCIL_POINTS = 8
RESIDUAL_POINTS = 10


@dataclass(frozen=True)
class Grid:
    """Uniform grid t_i = i*pi/N, i = 0..N, with N even."""

    N: int = DEFAULT_N

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N <= 0 or self.N % 2:
            raise ValueError(f"N must be an even positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def step(self):
        return math.pi / self.N

    @property
    def t(self):
        return _nodes(self.N)

    @property
    def size(self):
        return self.N + 1

    def node_index(self, point, tol=1e-12):
        """Index of the node at `point`, or None if no node lies within `tol`."""
        i = int(round(point / self.step))
        if 0 <= i <= self.N and abs(i * self.step - point) <= tol:
            return i
        return None


@lru_cache(maxsize=32)
def _nodes(N):
    t = np.arange(N + 1) * (math.pi / N)
    t[-1] = math.pi
    t.flags.writeable = False
    return t


class GridFunction:
    """Real function sampled at the nodes of a `Grid`.  Immutable."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        if values.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("GridFunction values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def from_callable(cls, grid, func):
        return cls(grid, np.broadcast_to(func(grid.t), (grid.size,)))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.size))

    @property
    def t(self):
        return self.grid.t

    def __len__(self):
        return self.grid.size

    def __repr__(self):
        return f"GridFunction(N={self.grid.N}, sup={sup_norm(self):.6g})"

    def _other(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def at(self, points):
        """Linear interpolation between nodes."""
        return np.interp(points, self.grid.t, self.values)

    def to_csv(self):
        return to_csv(self)


@dataclass(frozen=True)
class BoundaryTriple:
    """Element (h, h1, h2) of L^2 x R^2."""

    h: GridFunction
    h1: float
    h2: float

    def __post_init__(self):
        object.__setattr__(self, "h1", float(self.h1))
        object.__setattr__(self, "h2", float(self.h2))
        if not (math.isfinite(self.h1) and math.isfinite(self.h2)):
            raise ValueError("boundary components must be finite")

    @property
    def grid(self):
        return self.h.grid

    @classmethod
    def zeros(cls, grid):
        return cls(GridFunction.zeros(grid), 0.0, 0.0)

    def __add__(self, other):
        return BoundaryTriple(self.h + other.h, self.h1 + other.h1, self.h2 + other.h2)

    def __sub__(self, other):
        return BoundaryTriple(self.h - other.h, self.h1 - other.h1, self.h2 - other.h2)

    def __mul__(self, alpha):
        return BoundaryTriple(self.h * alpha, self.h1 * alpha, self.h2 * alpha)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def norm(self):
        """max(sup|h|, |h1|, |h2|): the norm used for operator-norm estimates."""
        return max(sup_norm(self.h), abs(self.h1), abs(self.h2))


def _same_grid(f, g):
    if f.grid != g.grid:
        raise GridMismatch(f"grids differ: N={f.grid.N} vs N={g.grid.N}")


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=32)
def simpson_weights(N):
    w = np.full(N + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= (math.pi / N) / 3.0
    w.flags.writeable = False
    return w


@lru_cache(maxsize=32)
def quadrature_weights(N):
    """Node weights of the composite degree-7 rule used by `integrate`.

    Equal to the total of `panel_integrals` over all panels, so integrals and
    running integrals agree to rounding.  Interior weights are exactly h;
    only the seven nodes nearest each end are corrected.
    """
    w = panel_integrals(np.eye(N + 1), N).sum(axis=0)
    w.flags.writeable = False
    return w


def integrate(f):
    """Integral of `f` over [0, pi] (composite rule, error O(N^-8))."""
    return float(quadrature_weights(f.grid.N) @ f.values)


def integrate_simpson(f):
    """Composite Simpson integral, kept for comparison (error O(N^-4))."""
    return float(simpson_weights(f.grid.N) @ f.values)


def inner_l2(f, g):
    _same_grid(f, g)
    return integrate(f * g)


def inner_weighted(a, b, n):
    """Weighted product on L^2 x R^2: pi/(pi+4n^2) * (<h,g> + h1*g1 + h2*g2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _same_grid(a.h, b.h)
    return math.pi / (math.pi + 4 * n * n) * (inner_l2(a.h, b.h) + a.h1 * b.h1 + a.h2 * b.h2)


def _lagrange_basis(m):
    """Exact coefficient lists (ascending powers) of the Lagrange basis on nodes 0..m-1."""
    basis = []
    for j in range(m):
        coeffs = [Fraction(1)]
        denom = Fraction(1)
        for k in range(m):
            if k == j:
                continue
            # multiply by (x - k)
            new = [Fraction(0)] * (len(coeffs) + 1)
            for p, c in enumerate(coeffs):
                new[p + 1] += c
                new[p] -= k * c
            coeffs = new
            denom *= j - k
        basis.append([c / denom for c in coeffs])
    return basis


@lru_cache(maxsize=None)
def _interval_weights(m):
    """w[a, j] = integral over [a, a+1] of the j-th Lagrange basis on nodes 0..m-1."""
    basis = _lagrange_basis(m)
    w = np.empty((m - 1, m))
    for a in range(m - 1):
        for j, coeffs in enumerate(basis):
            total = sum(c * (Fraction(a + 1) ** (p + 1) - Fraction(a) ** (p + 1)) / (p + 1)
                        for p, c in enumerate(coeffs))
            w[a, j] = float(total)
    return w


@lru_cache(maxsize=None)
def _second_derivative_weights(m):
    """d[a, j] = second derivative at node a of the j-th Lagrange basis on nodes 0..m-1."""
    basis = _lagrange_basis(m)
    d = np.empty((m, m))
    for a in range(m):
        for j, coeffs in enumerate(basis):
            d[a, j] = float(sum(c * p * (p - 1) * Fraction(a) ** (p - 2)
                                for p, c in enumerate(coeffs) if p >= 2))
    return d


def panel_integrals(values, N, factor=None):
    """Integrals over each panel [t_i, t_{i+1}] by local degree-7 interpolation.

    `values` has shape (N+1,) or (N+1, k).  Each panel uses the
    STENCIL_POINTS nodes nearest to it, so the error is O(h^9) per panel and
    varies smoothly between panels.  If given, ``factor(left, s)`` multiplies
    the integrand, with `left` the panel's left node (shape (N, 1)) and `s` the
    stencil nodes (shape (N, m)); it lets smooth weights such as exp(-k(t-s))
    be folded in without overflow.
    """
    values = np.asarray(values, dtype=float)
    m = min(STENCIL_POINTS, N + 1)
    w = _interval_weights(m)
    t = _nodes(N)
    starts = np.clip(np.arange(N) - (m // 2 - 1), 0, N + 1 - m)
    idx = starts[:, None] + np.arange(m)[None, :]
    panel_w = w[np.arange(N) - starts] * (math.pi / N)  # (N, m)
    if factor is not None:
        panel_w = panel_w * factor(t[:-1, None], t[idx])
    if values.ndim == 1:
        return np.einsum("ij,ij->i", panel_w, values[idx])
    return np.einsum("ij,ijk->ik", panel_w, values[idx])


@lru_cache(maxsize=None)
def _first_derivative_weights(m):
    basis = _lagrange_basis(m)
    d = np.empty((m, m))
    for a in range(m):
        for j, coeffs in enumerate(basis):
            d[a, j] = float(sum(c * p * Fraction(a) ** (p - 1) for p, c in enumerate(coeffs) if p >= 1))
    return d


def cumulative_integral(values, N):
    """Running integral from 0 to every node (see `panel_integrals`).

    Columns of a 2-D `values` are integrated independently.
    """
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    out[1:] = np.cumsum(panel_integrals(values, N), axis=0)
    return out


def second_difference(values, step):
    """Three-point second difference at interior nodes (second order)."""
    v = np.asarray(values, dtype=float)
    return (v[:-2] - 2.0 * v[1:-1] + v[2:]) / step ** 2


def first_derivative(values, step, points=RESIDUAL_POINTS):
    """High-order first derivative at every node (central in the interior)."""
    return _apply_stencil(_first_derivative_weights, values, points) / step


def second_derivative(values, step, points=RESIDUAL_POINTS):
    """High-order second derivative at every node from a sliding `points` stencil.

    Near the ends the stencil becomes one sided; the order is points - 2.
    """
    return _apply_stencil(_second_derivative_weights, values, points) / step ** 2


def _apply_stencil(weights, values, points):
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    m = min(points, n)
    d = weights(m)
    starts = np.clip(np.arange(n) - (m - 1) // 2, 0, n - m)
    offsets = np.arange(n) - starts
    idx = starts[:, None] + np.arange(m)[None, :]
    return np.einsum("ij,ij->i", d[offsets], v[idx])


# ---------------------------------------------------------------------------
# sampling and norms


def sample(e, grid):
    """Sample an expression in the variable ``x`` at the grid nodes."""
    if isinstance(e, str):
        e = _expr.parse(e, ("x",))
    return GridFunction(grid, _expr.evaluate_on(e, grid.t, {"x": grid.t}))


def sup_norm(f):
    return float(np.max(np.abs(f.values)))


def axpy(alpha, f, g):
    """alpha*f + g."""
    _same_grid(f, g)
    return GridFunction(f.grid, alpha * f.values + g.values)


def resample(f, grid):
    """Linear interpolation of `f` onto another grid."""
    if f.grid == grid:
        return f
    return GridFunction(grid, np.interp(grid.t, f.grid.t, f.values))


def to_csv(f):
    """CSV text with header ``t,value`` and 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "value"])
    for t, v in zip(f.grid.t, f.values):
        writer.writerow([f"{t:.17g}", f"{v:.17g}"])
    return buf.getvalue()


def from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["t", "value"]:
        raise ValueError("expected header 't,value'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    grid = Grid(len(data) - 1)
    if not np.allclose(data[:, 0], grid.t, rtol=0, atol=1e-12):
        raise ValueError("nodes are not the uniform grid on [0, pi]")
    return GridFunction(grid, data[:, 1])
