"""Truncated 3D straightened-tube operator for constant and perturbed twist.

The longitudinal part -(d3 + g dtau)^2 is assembled as A^T A with
A = D3 + G Dtau, where D3 is the centered difference including the two
boundary flux rows (ghost zeros at x3 = +-Ltube).  Keeping the flux rows
makes the truncation a form restriction of the infinite lattice, so the
ground energy brackets monotonically from above as Ltube grows.  The
first-order term of the twist perturbation never needs its own stencil: it
emerges from the splitting H_perturbed = H_const + W at the matrix level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .errors import DecayViolationError, MemoryGuardError, SolverError
from .fiber import eig_hermitian
from .operators import DiscreteOperators

MAX_UNKNOWNS = 200_000
EIG_RESIDUAL_REL = 1e-8


def phi_weight(s, alpha: float):
    """(1 + s^2)^(-alpha/2), the polynomial weight scale."""
    return (1.0 + np.asarray(s, dtype=float) ** 2) ** (-alpha / 2.0)


@dataclass
class TwistProfile:
    """Twist rate g(x3) = beta - eps(x3) with eps 'none', 'gaussian' or 'table'."""

    beta: float
    kind: str = "none"
    eps0: float = 0.0
    sigma: float = 1.0
    table_x: np.ndarray | None = None
    table_eps: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "table"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "table":
            if self.table_x is None or self.table_eps is None:
                raise ValueError("table profile needs x3 and eps arrays")
            self._spline = CubicSpline(self.table_x, self.table_eps)

    def eps(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros_like(x)
        if self.kind == "gaussian":
            return self.eps0 * np.exp(-(x**2) / (2.0 * self.sigma**2))
        lo, hi = self.table_x[0], self.table_x[-1]
        out = self._spline(np.clip(x, lo, hi))
        out[(x < lo) | (x > hi)] = 0.0
        return out

    def deps(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros_like(x)
        if self.kind == "gaussian":
            return -x / self.sigma**2 * self.eps(x)
        lo, hi = self.table_x[0], self.table_x[-1]
        out = self._spline.derivative()(np.clip(x, lo, hi))
        out[(x < lo) | (x > hi)] = 0.0
        return out

    def g(self, x):
        return self.beta - self.eps(x)

    def check_decay(self, Ltube: float, samples: int = 4001):
        """The weighted profiles |eps| (1+x^2) and |eps'| (1+x^2) must not
        attain their maximum in the outer tenth of the truncation."""
        x = np.linspace(-Ltube, Ltube, samples)
        for name, vals in (("eps", self.eps(x)), ("eps'", self.deps(x))):
            w = np.abs(vals) * (1.0 + x**2)
            total = float(w.max())
            if total == 0.0:
                continue
            outer = max(1, samples // 10)
            edge = float(max(w[:outer].max(), w[-outer:].max()))
            if edge >= total * (1.0 - 1e-9):
                raise DecayViolationError(
                    f"weighted profile {name} * (1+x3^2) peaks at the truncation edge; "
                    "the decay hypothesis fails on [-Ltube, Ltube]"
                )


@dataclass
class TubeOperator:
    L3: sp.csr_matrix
    Ltube: float
    h3: float
    bc: str
    x3: np.ndarray
    ops2d: DiscreteOperators
    profile: TwistProfile

    @property
    def size(self) -> int:
        return self.L3.shape[0]


@dataclass
class TubeSpectrum:
    values: np.ndarray
    residuals: np.ndarray
    Ltube: float
    band_edge: float
    count_below_edge: int

    def to_dict(self):
        return {
            "schema": "twistband/tube-v1",
            "Ltube": self.Ltube,
            "band_edge": self.band_edge,
            "count_below_edge": self.count_below_edge,
            "values": [float(v) for v in self.values],
            "residuals": [float(r) for r in self.residuals],
        }


def _interior_x3(Ltube: float, h3: float):
    n3 = int(round(2.0 * Ltube / h3)) - 1
    return -Ltube + h3 * np.arange(1, n3 + 1), n3


def _d3_rect(n3: int, h3: float) -> sp.csr_matrix:
    """Centered difference including the two boundary flux rows; columns are
    the interior nodes, ghost values outside are zero."""
    rows, cols, vals = [], [], []
    for j in range(n3 + 2):
        if 1 <= j + 1 <= n3:
            rows.append(j)
            cols.append(j + 1 - 1)
            vals.append(1.0 / (2.0 * h3))
        if 1 <= j - 1 <= n3:
            rows.append(j)
            cols.append(j - 1 - 1)
            vals.append(-1.0 / (2.0 * h3))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n3 + 2, n3))


def d3_core(n3: int, h3: float) -> sp.csr_matrix:
    """Interior centered difference (antisymmetric, Dirichlet ghost zeros)."""
    off = np.full(n3 - 1, 1.0 / (2.0 * h3))
    return sp.diags([off, -off], [1, -1], format="csr")


def _d3_periodic(n3: int, h3: float) -> sp.csr_matrix:
    D = d3_core(n3, h3).tolil()
    D[0, n3 - 1] = -1.0 / (2.0 * h3)
    D[n3 - 1, 0] = 1.0 / (2.0 * h3)
    return D.tocsr()


def assemble_tube(
    ops2d: DiscreteOperators,
    profile: TwistProfile,
    Ltube: float,
    h3: float,
    bc: str = "dirichlet",
) -> TubeOperator:
    """L3 = I (x) L + A^T A on the truncated tube.

    bc='periodic' is a diagnostic mode whose spectrum matches the fiber
    dispersion at the discrete momenta.
    """
    x3, n3 = _interior_x3(Ltube, h3)
    nw = ops2d.nnodes
    if n3 * nw > MAX_UNKNOWNS:
        raise MemoryGuardError(
            f"{n3 * nw} unknowns exceed the guard {MAX_UNKNOWNS}; coarsen h3 or the cross section"
        )
    if profile.kind != "none":
        profile.check_decay(Ltube)
    g = profile.g(x3)
    if bc == "dirichlet":
        D3 = _d3_rect(n3, h3)
        Gr = sp.csr_matrix((g, (np.arange(1, n3 + 1), np.arange(n3))), shape=(n3 + 2, n3))
    elif bc == "periodic":
        D3 = _d3_periodic(n3, h3)
        Gr = sp.diags(g, format="csr")
    else:
        raise ValueError(f"unknown bc {bc!r}")
    A = sp.kron(D3, sp.identity(nw, format="csr"), format="csr") + sp.kron(
        Gr, ops2d.Dtau, format="csr"
    )
    L3 = sp.kron(sp.identity(n3, format="csr"), ops2d.L, format="csr") + (A.T @ A)
    L3 = L3.tocsr()
    return TubeOperator(L3=L3, Ltube=Ltube, h3=h3, bc=bc, x3=x3, ops2d=ops2d, profile=profile)


def assemble_perturbation(ops2d: DiscreteOperators, profile: TwistProfile, Ltube: float, h3: float) -> sp.csr_matrix:
    """The twist-perturbation operator W with H_perturbed = H_const + W
    exactly on matching stencils.

    W = (E D3 + D3 E) (x) Dtau + (2 beta E - E^2) (x) Dtau^2 with
    E = diag eps(x3); the first-order angular term appears through the
    anticommutator E D3 + D3 E rather than its own discretization.
    """
    x3, n3 = _interior_x3(Ltube, h3)
    E = sp.diags(profile.eps(x3), format="csr")
    D3c = d3_core(n3, h3)
    beta = profile.beta
    Dtau = ops2d.Dtau
    Dtau2 = (Dtau @ Dtau).tocsr()
    W = sp.kron(E @ D3c + D3c @ E, Dtau, format="csr") + sp.kron(
        2.0 * beta * E - E @ E, Dtau2, format="csr"
    )
    return W.tocsr()


def decomp_free_correction(ops2d: DiscreteOperators, beta: float, Ltube: float, h3: float) -> sp.csr_matrix:
    """U - W = -beta^2 I (x) Dtau^2 - 2 beta D3 (x) Dtau, so that
    H_perturbed = H_free + U with U = W + this correction."""
    _, n3 = _interior_x3(Ltube, h3)
    D3c = d3_core(n3, h3)
    Dtau = ops2d.Dtau
    Dtau2 = (Dtau @ Dtau).tocsr()
    corr = -(beta**2) * sp.kron(sp.identity(n3, format="csr"), Dtau2, format="csr")
    corr = corr - 2.0 * beta * sp.kron(D3c, Dtau, format="csr")
    return corr.tocsr()


def fiber_band_edge(ops2d: DiscreteOperators, beta: float) -> float:
    """E_1(0) of the constant-twist fiber on the same cross-section grid."""
    H0 = ops2d.L.astype(complex)
    if beta != 0.0:
        H0 = H0 - beta**2 * (ops2d.Dtau @ ops2d.Dtau).astype(complex)
    return float(eig_hermitian(H0, 1).values[0])


def tube_low_spectrum(op: TubeOperator, nev: int) -> TubeSpectrum:
    """Lowest eigenvalues by shift-invert toward the cross-section ground
    energy; eigenvalues below the fiber band edge are flagged as candidate
    discrete spectrum (reported, never asserted)."""
    if nev > 30:
        raise ValueError("nev > 30 is outside the desk-scale contract")
    n = op.size
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        vals, vecs = spla.eigsh(op.L3.tocsc(), k=nev, sigma=0.0, which="LM", v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"tube eigensolve did not converge: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(op.L3 @ vecs - vecs * vals[None, :], axis=0)
    rel = res / (np.abs(vals) + 1.0)
    if np.any(rel > EIG_RESIDUAL_REL):
        raise SolverError(f"tube eigensolver residual {rel.max():.2e} above contract")
    edge = fiber_band_edge(op.ops2d, op.profile.beta)
    tol = 1e-7 * (1.0 + abs(edge))
    return TubeSpectrum(
        values=vals, residuals=res, Ltube=op.Ltube, band_edge=edge,
        count_below_edge=int(np.count_nonzero(vals < edge - tol)),
    )


def hs_diagnostic(
    op: TubeOperator,
    alpha: float,
    seed: int = 0,
    probes: int = 256,
    weight=None,
    method: str = "auto",
    column_budget: int = 12_000,
):
    """Frobenius norm of weight(x3) H^{-1} (default weight phi_alpha).

    Exact column accumulation when the weight decays fast enough to cover
    the mass within the column budget (the tail is bounded through the
    smallest eigenvalue); otherwise a seeded Hutchinson estimate of
    tr(H^{-1} F^2 H^{-1}).  Returns (norm, info dict).
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    x3 = op.x3
    nw = op.ops2d.nnodes
    if weight is None:
        wslice = phi_weight(x3, alpha)
    else:
        wslice = np.asarray(weight(x3), dtype=float)
    w = np.repeat(wslice, nw)  # row weight per unknown
    if not np.any(w != 0.0):
        return 0.0, {"method": "trivial", "solves": 0}

    lu = spla.splu(op.L3.tocsc())
    lam1 = float(spla.eigsh(op.L3.tocsc(), k=1, sigma=0.0, which="LM",
                            v0=np.full(op.size, 1.0 / np.sqrt(op.size)),
                            return_eigenvectors=False)[0])
    w2 = w**2
    order = np.argsort(-w2)
    csum_desc = np.cumsum(w2[order])
    total_w2 = csum_desc[-1]

    use_exact = method == "exact"
    if method == "auto":
        # columns needed so the tail bound sits well under a 0.5% effect
        tail_after = total_w2 - csum_desc
        enough = np.nonzero(tail_after / max(total_w2, 1e-300) < 1e-6)[0]
        use_exact = len(enough) > 0 and enough[0] + 1 <= column_budget
    if use_exact:
        acc = 0.0
        tail_bound = total_w2 / lam1**2
        solves = 0
        batch = 256
        for start in range(0, len(order), batch):
            idx = order[start : start + batch]
            if w2[idx[0]] == 0.0:
                break
            rhs = np.zeros((op.size, len(idx)))
            rhs[idx, np.arange(len(idx))] = 1.0
            cols = lu.solve(rhs)
            acc += float(np.sum(w2[idx] * np.sum(cols**2, axis=0)))
            solves += len(idx)
            tail_bound = float((total_w2 - csum_desc[start + len(idx) - 1]) / lam1**2)
            if tail_bound <= 5e-3 * acc or solves >= column_budget:
                break
        return float(np.sqrt(acc + 0.5 * tail_bound)), {
            "method": "exact-columns", "solves": solves, "tail_bound": tail_bound,
        }

    rng = np.random.default_rng(seed)
    acc = 0.0
    batch = 32
    done = 0
    while done < probes:
        m = min(batch, probes - done)
        Z = rng.integers(0, 2, size=(op.size, m)) * 2.0 - 1.0
        Y = lu.solve(Z)
        acc += float(np.sum((w[:, None] * Y) ** 2))
        done += m
    return float(np.sqrt(acc / probes)), {"method": "hutchinson", "solves": probes, "seed": seed}
