"""Discrete cross-section operators: the Dirichlet Laplacian and the
angular derivative x1 d2 - x2 d1.

The Laplacian uses the 5-point second-order stencil with ghost zeros; the
angular derivative combines diagonal coordinate matrices with centered first
differences.  Because each coordinate matrix commutes with the difference in
the other direction, the angular derivative is antisymmetric to machine
precision, so i*Dtau is exactly Hermitian downstream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .geometry import CrossSectionGrid

DENSE_EIG_LIMIT = 3000
# eigenvalues above half the 5-point stencil top 4/h^2 per direction are
# discretization garbage; the Weyl count refuses to look there
WEYL_CEILING_FRACTION = 0.5


@dataclass
class DiscreteOperators:
    """Sparse L = -Laplacian (symmetric positive definite) and Dtau
    (exactly antisymmetric) over the interior nodes of a grid."""

    grid: CrossSectionGrid
    L: sp.csr_matrix
    Dtau: sp.csr_matrix
    mu: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def nnodes(self) -> int:
        return self.L.shape[0]

    def mu_lowest(self, nev: int) -> np.ndarray:
        """Lowest Dirichlet eigenvalues mu_j, cached across calls."""
        if len(self.mu) >= nev:
            return self.mu[:nev]
        n = self.nnodes
        nev = min(nev, n - 1)
        if n <= DENSE_EIG_LIMIT:
            vals = sla.eigh(self.L.toarray(), eigvals_only=True, subset_by_index=[0, nev - 1])
        else:
            v0 = np.full(n, 1.0 / np.sqrt(n))
            vals = spla.eigsh(
                self.L.tocsc(), k=nev, sigma=0.0, which="LM", v0=v0, return_eigenvectors=False
            )
            vals = np.sort(vals)
        self.mu = np.asarray(vals)
        return self.mu[:nev]


def _neighbor_pairs(index_map, axis):
    """Row/col index arrays for +1 shifts of the lattice along an axis."""
    if axis == 0:
        a, b = index_map[:-1, :], index_map[1:, :]
    else:
        a, b = index_map[:, :-1], index_map[:, 1:]
    ok = (a >= 0) & (b >= 0)
    return a[ok], b[ok]


def assemble_operators(grid: CrossSectionGrid) -> DiscreteOperators:
    """Assemble L (5-point Dirichlet Laplacian) and Dtau = X1 D2 - X2 D1."""
    h = grid.h
    n = grid.nnodes
    x1 = grid.nodes[:, 0]
    x2 = grid.nodes[:, 1]

    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 4.0 / h**2)]
    drows, dcols, dvals = [], [], []

    for axis in (0, 1):
        lo, hi = _neighbor_pairs(grid.index_map, axis)
        rows += [lo, hi]
        cols += [hi, lo]
        vals += [np.full(len(lo), -1.0 / h**2)] * 2
        # centered difference along this axis, weighted by the other coordinate:
        # axis 0 is d/dx1 (enters as -x2 D1), axis 1 is d/dx2 (enters as +x1 D2)
        coeff = x1 if axis == 1 else x2
        sign = 1.0 if axis == 1 else -1.0
        # d(row lo) gets +f(hi)/(2h); d(row hi) gets -f(lo)/(2h)
        drows += [lo, hi]
        dcols += [hi, lo]
        dvals += [sign * coeff[lo] / (2 * h), -sign * coeff[hi] / (2 * h)]

    L = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    Dtau = sp.csr_matrix(
        (np.concatenate(dvals), (np.concatenate(drows), np.concatenate(dcols))), shape=(n, n)
    )
    return DiscreteOperators(grid=grid, L=L, Dtau=Dtau)


def weyl_ceiling(ops: DiscreteOperators) -> float:
    return WEYL_CEILING_FRACTION * 4.0 / ops.grid.h**2


def weyl_check(ops: DiscreteOperators, lambda_max: float, num: int = 12):
    """Eigenvalue counting function against the planar Weyl asymptotics.

    Returns rows (lam, count, count * 4 pi / (|omega| lam)); the last column
    tends to 1 as lam grows.  Counting beyond the discretization trust
    ceiling is refused (clamped) with a warning.
    """
    ceiling = weyl_ceiling(ops)
    if lambda_max > ceiling:
        warnings.warn(
            f"lambda_max {lambda_max:.4g} exceeds trust ceiling {ceiling:.4g}; clamping",
            stacklevel=2,
        )
        lambda_max = ceiling
    n = ops.nnodes
    if n <= 2 * DENSE_EIG_LIMIT:
        if len(ops.mu) < n:
            ops.mu = np.asarray(sla.eigh(ops.L.toarray(), eigvals_only=True))
        mu = ops.mu[ops.mu < lambda_max]
    else:
        # ask for an over-estimate of the count, then trim
        guess = int(ops.grid.area * lambda_max / (4 * np.pi) * 1.6) + 30
        mu = ops.mu_lowest(min(guess, n - 2))
        if mu[-1] < lambda_max:
            mu = ops.mu_lowest(min(2 * guess, n - 2))
        if mu[-1] < lambda_max:
            raise SolverError(
                "could not certify the eigenvalue count below lambda_max; "
                "iterative path returned too few eigenvalues"
            )
        mu = mu[mu < lambda_max]
    lo = lambda_max / num
    if len(mu) and 1.5 * mu[0] < lambda_max:
        lo = max(lo, 1.5 * mu[0])
    lams = np.linspace(lo, lambda_max, num)
    area = ops.grid.area
    rows = []
    for lam in lams:
        count = int(np.count_nonzero(mu < lam))
        ratio = count * 4.0 * np.pi / (area * lam)
        rows.append((float(lam), count, float(ratio)))
    return rows


def counting_function(ops: DiscreteOperators, lam: float) -> int:
    """N(lam): number of Dirichlet eigenvalues strictly below lam."""
    rows = weyl_check(ops, lam, num=1)
    return rows[-1][1]
