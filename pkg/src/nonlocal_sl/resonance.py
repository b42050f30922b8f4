"""Algebra of the resonant operator at lam = n^2.

Kernel basis psi_n, its companion phi_n, the Green-type operator K_n, the
solvability functional, the projections P_n / Q_n and the generalized
inverse M_n that maps Im(L_{n^2}) into ker(L_{n^2})^perp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NotInImage
from .grid import (
    BoundaryTriple,
    GridFunction,
    cumulative_integral,
    inner_l2,
    inner_weighted,
    second_derivative,
    quadrature_weights,
    sup_norm,
)


@dataclass(frozen=True)
class ResonanceBasis:
    n: int
    psi: GridFunction
    phi: GridFunction
    v1n: float
    v2n: float
    psi_vec: BoundaryTriple

    @property
    def grid(self):
        return self.psi.grid

    @property
    def sign(self):
        """(-1)^(n+1)."""
        return 1.0 if self.n % 2 else -1.0

    @property
    def weight(self):
        """pi/(pi + 4n^2), the factor of the weighted product."""
        return math.pi / (math.pi + 4 * self.n ** 2)


def make_basis(n, grid):
    if n < 1:
        raise ValueError("n must be >= 1")
    t = grid.t
    psi = GridFunction(grid, math.sqrt(2 / math.pi) * np.sin(n * t))
    phi = GridFunction(grid, -math.sqrt(math.pi / 2) * np.cos(n * t) / n)
    v1n = -math.sqrt(math.pi / (2 * n * n))
    v2n = (-1) ** (n + 1) * math.sqrt(math.pi / (2 * n * n))
    psi_vec = BoundaryTriple(psi, 1.0 / v1n, -1.0 / v2n)
    return ResonanceBasis(n, psi, phi, v1n, v2n, psi_vec)


def _check_grid(basis, f):
    if f.grid != basis.grid:
        raise GridMismatch(f"grids differ: N={basis.grid.N} vs N={f.grid.N}")


def kernel_values(basis, H):
    """Array-level K_n: (K_n h)(t) = phi(t) int_0^t psi h + psi(t) int_t^pi phi h."""
    H = np.asarray(H, dtype=float)
    N = basis.grid.N
    psi = basis.psi.values
    phi = basis.phi.values
    if H.ndim == 2:
        psi, phi = psi[:, None], phi[:, None]
    lower = cumulative_integral(psi * H, N)
    upper_all = cumulative_integral(phi * H, N)
    upper = upper_all[-1] - upper_all
    return phi * lower + psi * upper


def kernel_apply(basis, h):
    _check_grid(basis, h)
    return GridFunction(basis.grid, kernel_values(basis, h.values))


def solvability_defect(basis, rhs):
    """n*(h1 + (-1)^(n+1) h2) - int_0^pi sin(nt) h(t) dt; zero iff rhs is in the image."""
    _check_grid(basis, rhs.h)
    n = basis.n
    sin_n = basis.psi * math.sqrt(math.pi / 2)
    return n * (rhs.h1 + basis.sign * rhs.h2) - inner_l2(sin_n, rhs.h)


def image_tolerance(rhs, rel=1e-8):
    """Scale-invariant acceptance threshold for the solvability defect."""
    return rel * (1.0 + sup_norm(rhs.h) + abs(rhs.h1) + abs(rhs.h2))


def project_kernel(basis, u):
    """P_n u = <u, psi_n> psi_n."""
    _check_grid(basis, u)
    return basis.psi * inner_l2(u, basis.psi)


def project_coimage(basis, rhs):
    """Q_n h = <h, psi_vec> psi_vec in the weighted product."""
    _check_grid(basis, rhs.h)
    return basis.psi_vec * inner_weighted(rhs, basis.psi_vec, basis.n)


def generalized_inverse_values(basis, H, h1, h2):
    """Array-level M_n without the image check; columns of H are independent."""
    H = np.asarray(H, dtype=float)
    psi = basis.psi.values
    phi = basis.phi.values
    if H.ndim == 2:
        psi, phi = psi[:, None], phi[:, None]
    b = np.asarray(h1, dtype=float) / basis.v1n
    u = kernel_values(basis, H) + b * phi
    a = -(quadrature_weights(basis.grid.N) * basis.psi.values) @ u
    return u + a * psi


def generalized_inverse(basis, rhs, rel_tol=1e-8):
    """M_n rhs: the solution of L_{n^2} u = rhs orthogonal to psi_n.

    u = K_n h + a*psi_n + b*phi_n with b = h1/v1n fixing u(0) and a chosen
    so that <u, psi_n> = 0.  Raises `NotInImage` when the solvability defect
    exceeds ``rel_tol * (1 + sup|h| + |h1| + |h2|)``.
    """
    _check_grid(basis, rhs.h)
    defect = solvability_defect(basis, rhs)
    tol = image_tolerance(rhs, rel_tol)
    if abs(defect) > tol:
        raise NotInImage(defect, tol)
    return GridFunction(basis.grid, generalized_inverse_values(basis, rhs.h.values, rhs.h1, rhs.h2))


def apply_operator(basis, u):
    """L_{n^2} u = (u'' + n^2 u, u(0), u(pi)) with u'' from the residual stencil."""
    vals = u.values
    h = second_derivative(vals, u.grid.step) + basis.n ** 2 * vals
    return BoundaryTriple(GridFunction(u.grid, h), vals[0], vals[-1])
