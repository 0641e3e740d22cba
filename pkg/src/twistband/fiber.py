"""Fiber operators h(k) of the constant-twist waveguide and their eigendata.

h(k) = L + (k + i*beta*Dtau)^2 expanded as L - beta^2 Dtau^2
+ 2 k beta (i Dtau) + k^2; Hermitian by construction and bounded below by
the lowest Dirichlet eigenvalue of the cross section.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .operators import DENSE_EIG_LIMIT, DiscreteOperators

DEGENERACY_RTOL = 1e-8  # eigenvalues within 1e-8*(1+|E|) form one group
DENSE_RESIDUAL_FACTOR = 1e-10  # residual contract: <= 1e-10 * ||H||_1


@dataclass
class FiberOperator:
    """h(k) for one momentum k, plus the pieces needed for derivatives."""

    ops: DiscreteOperators
    beta: float
    k: float
    H: sp.csr_matrix

    def dk_matrix(self) -> sp.csr_matrix:
        """d/dk h(k) = 2 (k I + i beta Dtau)."""
        n = self.H.shape[0]
        return (2.0 * self.k) * sp.identity(n, format="csr", dtype=complex) + (
            2.0j * self.beta
        ) * self.ops.Dtau


@dataclass
class EigResult:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # orthonormal columns, phase-fixed
    residuals: np.ndarray

    @property
    def nev(self) -> int:
        return len(self.values)


def assemble_fiber(ops: DiscreteOperators, beta: float, k: float) -> FiberOperator:
    """H = L - beta^2 Dtau^2 + 2 k beta (i Dtau) + k^2 I, exactly Hermitian."""
    n = ops.L.shape[0]
    H = ops.L.astype(complex)
    if beta != 0.0:
        D2 = (ops.Dtau @ ops.Dtau).astype(complex)
        H = H - beta * beta * D2 + (2.0j * k * beta) * ops.Dtau
    if k != 0.0:
        H = H + (k * k) * sp.identity(n, format="csr", dtype=complex)
    return FiberOperator(ops=ops, beta=beta, k=k, H=H.tocsr())


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    out = vectors.copy()
    idx = np.argmax(np.abs(out), axis=0)
    for j, i in enumerate(idx):
        z = out[i, j]
        a = abs(z)
        if a > 0:
            out[:, j] *= np.conj(z) / a
    return out


def eig_hermitian(H, nev: int, dense_limit: int = DENSE_EIG_LIMIT) -> EigResult:
    """nev smallest eigenpairs of a Hermitian matrix.

    Dense LAPACK below dense_limit, shift-invert Lanczos above.  The dense
    path guarantees residuals below 1e-10 * ||H||_1; the iterative path
    raises SolverError on non-convergence.
    """
    if sp.issparse(H):
        Hs = H.tocsc()
    else:
        Hs = sp.csc_matrix(H)
    n = Hs.shape[0]
    if nev > n:
        raise ValueError(f"nev={nev} exceeds dimension {n}")
    if n <= dense_limit:
        vals, vecs = sla.eigh(Hs.toarray(), subset_by_index=[0, nev - 1])
    else:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        try:
            vals, vecs = spla.eigsh(Hs, k=nev, sigma=0.0, which="LM", v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"shift-invert Lanczos did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    vecs = fix_phases(np.ascontiguousarray(vecs))
    res = np.linalg.norm(Hs @ vecs - vecs * vals[None, :], axis=0)
    norm1 = spla.norm(Hs, 1)
    if n <= dense_limit and np.any(res > DENSE_RESIDUAL_FACTOR * norm1):
        raise SolverError(
            f"dense eigensolver residual {res.max():.3e} exceeds contract "
            f"{DENSE_RESIDUAL_FACTOR * norm1:.3e}"
        )
    return EigResult(values=np.asarray(vals, dtype=float), vectors=vecs, residuals=res)


def solve_fiber(ops: DiscreteOperators, beta: float, k: float, nev: int) -> EigResult:
    return eig_hermitian(assemble_fiber(ops, beta, k).H, nev)


def eigen_groups(values: np.ndarray, rtol: float = DEGENERACY_RTOL):
    """Partition ascending eigenvalues into near-degenerate groups."""
    groups = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > rtol * (1.0 + abs(values[i])):
            groups.append(list(range(start, i)))
            start = i
    return groups


def fh_velocities(fiber: FiberOperator, eig: EigResult):
    """Band velocities dE/dk via the first-order perturbation identity.

    For a simple eigenvalue the velocity is 2 v^H (k I + i beta Dtau) v,
    the exact derivative of the discrete eigenvalue family.  Inside a
    degenerate group the q x q matrix 2 V^H (k I + i beta Dtau) V is
    diagonalized and its ascending eigenvalues are assigned to ascending
    band indices (the right-derivative convention for sorted bands).

    Returns (velocities, groups, ambiguous) where ambiguous marks groups
    whose velocity matrix has distinct eigenvalues (branch splitting).
    """
    dk = fiber.dk_matrix()
    vals, vecs = eig.values, eig.vectors
    groups = eigen_groups(vals)
    velocities = np.empty(len(vals))
    ambiguous = np.zeros(len(vals), dtype=bool)
    for g in groups:
        V = vecs[:, g]
        W = V.conj().T @ (dk @ V)
        W = 0.5 * (W + W.conj().T)
        if len(g) == 1:
            velocities[g[0]] = W[0, 0].real
        else:
            gv = np.sort(sla.eigvalsh(W))
            velocities[g] = gv
            spread = gv[-1] - gv[0]
            if spread > 1e-7 * (1.0 + np.abs(gv).max()):
                ambiguous[g] = True
    return velocities, groups, ambiguous


def fh_derivative(fiber: FiberOperator, eig: EigResult, n: int):
    """Velocity of band n at this fiber; flags degenerate ambiguity.

    Returns (velocity, ambiguous).  Raises ValueError if the eigenpair
    residual is outside the solver contract.
    """
    if eig.residuals[n] > 1e-6 * (1.0 + abs(eig.values[n])):
        raise ValueError(f"eigenpair {n} residual {eig.residuals[n]:.2e} too large for FH")
    velocities, _, ambiguous = fh_velocities(fiber, eig)
    return float(velocities[n]), bool(ambiguous[n])


def group_velocity_frame(fiber: FiberOperator, eig: EigResult, members):
    """Diagonalize the velocity matrix on a degenerate group.

    Returns (group_velocities ascending, rotated eigenvectors) so that each
    rotated vector is the k-derivative eigen-direction of the group.
    """
    V = eig.vectors[:, members]
    W = V.conj().T @ (fiber.dk_matrix() @ V)
    W = 0.5 * (W + W.conj().T)
    gv, U = sla.eigh(W)
    return gv, fix_phases(V @ U)
