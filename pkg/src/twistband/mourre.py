"""Mourre window construction and fiberwise positivity certification.

For an energy E off the critical set, the preimages of the window
I = (E-delta, E+delta) under each band decompose into intervals Q(j,n),
each containing exactly one solution of E_n(k) = E.  Solutions hit by a
single band are class 0, coincidences of several bands class 1; the merged
J intervals receive a sign from the common slope direction, the bump gamma
equals that sign exactly on each closed J, and the certified constant is
the worst generalized Rayleigh quotient of the commutator sandwich against
the cutoff projection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .bands import BandTable, bkrs_fit
from .bumps import BumpGamma, CutoffChi, Plateau
from .critical import CriticalLevelSet, band_window_bound
from .errors import (
    CoverageError,
    CriticalEnergyError,
    MissingBandError,
    SignConflictError,
)
from .fiber import assemble_fiber, eig_hermitian

CHI_SUPPORT_THRESHOLD = 1e-12
CRITICAL_E_TOL = 1e-5  # times (1 + |E|)
MAX_SHRINK = 20
ROOT_REFINE_TOL = 1e-7


@dataclass
class QInterval:
    a: float
    b: float
    k0: float
    band: int
    cls: int  # 0: single-band preimage, 1: multi-band coincidence
    cluster: int  # id of the K point this interval belongs to


@dataclass
class JInterval:
    a: float
    b: float
    k0: float
    cls: int
    bands: tuple

    @property
    def width(self) -> float:
        return self.b - self.a


@dataclass
class MourreWindow:
    E: float
    delta: float
    eta: float
    interval: tuple
    Bsets: dict
    Qints: list
    J0: list
    J1: list
    N: int
    kR: float
    table: BandTable

    @property
    def Jints(self) -> list:
        return self.J0 + self.J1

    def chi(self) -> CutoffChi:
        return CutoffChi(E=self.E, delta=self.delta, eta=self.eta)


@dataclass
class MourreReport:
    E: float
    delta: float
    eta: float
    c_est: float
    d0: float | None
    d1: float | None
    per_k: list
    passed: bool
    d_scale: float
    crossterm_bound: float | None = None

    def to_dict(self):
        return {
            "schema": "twistband/mourre-v1",
            "E": self.E,
            "delta": self.delta,
            "eta": self.eta,
            "c_est": self.c_est,
            "d0": self.d0,
            "d1": self.d1,
            "pass": self.passed,
            "d_scale": self.d_scale,
            "crossterm_bound": self.crossterm_bound,
            "per_k": [{"k": k, "rho_min": r} for k, r in self.per_k],
        }


def _band_value(table: BandTable, k: float, n: int) -> float:
    nev = min(table.nmax, max(n + 2, 4))
    eig = eig_hermitian(assemble_fiber(table.ops, table.beta, k).H, nev)
    return float(eig.values[n])


def _refine_band_root(table: BandTable, n: int, target: float, lo: float, hi: float) -> float:
    """Bisect the n-th sorted band against a target energy with fresh solves."""
    glo = _band_value(table, lo, n) - target
    ghi = _band_value(table, hi, n) - target
    width = hi - lo
    tries = 0
    while glo * ghi > 0.0 and tries < 4:
        lo, hi = lo - width, hi + width
        glo = _band_value(table, lo, n) - target
        ghi = _band_value(table, hi, n) - target
        tries += 1
    if glo * ghi > 0.0:
        # no sign change: treat the better endpoint as the root (grid kink)
        return lo if abs(glo) < abs(ghi) else hi
    while hi - lo > ROOT_REFINE_TOL:
        mid = 0.5 * (lo + hi)
        gm = _band_value(table, mid, n) - target
        if gm == 0.0:
            return mid
        if glo * gm < 0.0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)


def _band_components(table: BandTable, n: int, E: float, delta: float):
    """Connected components of {k : E_n(k) in (E-delta, E+delta)} and the
    solutions of E_n = E inside each, from the Hermite interpolant."""
    k = table.kgrid
    spl = CubicHermiteSpline(k, table.energies[:, n], table.velocities[:, n])
    fine = np.linspace(k[0], k[-1], 8 * (len(k) - 1) + 1)
    vals = spl(fine)
    inwin = (vals > E - delta) & (vals < E + delta)
    comps = []
    j = 0
    while j < len(fine):
        if not inwin[j]:
            j += 1
            continue
        j0 = j
        while j < len(fine) and inwin[j]:
            j += 1
        j1 = j - 1
        if j0 == 0 or j1 == len(fine) - 1:
            raise CoverageError(
                f"band {n} window preimage touches the sweep boundary; "
                "extend the k range"
            )
        left = _edge_root(spl, fine[j0 - 1], fine[j0], E, delta)
        right = _edge_root(spl, fine[j1], fine[j1 + 1], E, delta)
        roots = [r for r in np.atleast_1d(spl.solve(E, extrapolate=False))
                 if left - 1e-12 <= r <= right + 1e-12]
        comps.append((left, right, sorted(set(float(r) for r in roots))))
    return comps


def _edge_root(spl, klo, khi, E, delta):
    """Window-boundary crossing inside one fine cell."""
    for bound in (E - delta, E + delta):
        flo, fhi = spl(klo) - bound, spl(khi) - bound
        if flo == 0.0:
            return float(klo)
        if fhi == 0.0:
            return float(khi)
        if flo * fhi < 0.0:
            return float(brentq(lambda kk: float(spl(kk)) - bound, klo, khi, xtol=1e-12))
    # cell straddles the window without a boundary crossing of either edge
    return float(0.5 * (klo + khi))


def build_window(
    E: float,
    delta: float,
    branches,
    criticalset: CriticalLevelSet,
    force: bool = False,
    max_shrink: int = MAX_SHRINK,
) -> MourreWindow:
    """Interval decomposition of the window at E, shrinking delta as needed.

    delta is halved (at most max_shrink times) until dist(E, Ec \\ {E})
    exceeds delta and all interval-disjointness conditions hold.  E on a
    critical level raises CriticalEnergyError unless force is set (the
    bypass used by negative controls).
    """
    table = branches[0].table
    crit_tol = CRITICAL_E_TOL * (1.0 + abs(E))
    eset = criticalset.Eset
    if len(eset) and np.min(np.abs(eset - E)) <= crit_tol and not force:
        offender = float(eset[np.argmin(np.abs(eset - E))])
        raise CriticalEnergyError(
            f"E = {E:.8g} lies on the critical level {offender:.8g}", energy=offender
        )

    cfit = bkrs_fit(table)
    bound = band_window_bound(table, E + delta, cfit, branches=branches)
    kmax = float(np.abs(table.kgrid).max())
    if bound.kR > kmax + 1e-12:
        raise CoverageError(
            f"sweep |k| <= {kmax:.4g} does not cover k_R = {bound.kR:.4g} "
            f"for R = {E + delta:.6g}"
        )
    N = bound.NR
    if table.nmax < N - 1:
        raise MissingBandError(f"table holds {table.nmax} bands, window ceiling needs {N - 1}")

    dlt = float(delta)
    last_reason = ""
    for _ in range(max_shrink + 1):
        ok, window, last_reason = _try_build(E, dlt, table, criticalset, N, bound.kR, force)
        if ok:
            return window
        dlt *= 0.5
    raise CriticalEnergyError(
        f"no admissible delta found down to {dlt:.3g} (last obstruction: {last_reason})",
        energy=E,
    )


def _try_build(E, dlt, table, criticalset, N, kR, force):
    if not force and criticalset.nearest_distance(E) <= dlt:
        return False, None, "critical level within delta"
    nbands = min(N - 1, table.nmax) if N >= 1 else table.nmax
    nbands = max(nbands, 1)
    qints, ksolutions = [], []
    bsets = {}
    for n in range(nbands):
        comps = _band_components(table, n, E, dlt)
        bsets[n] = [(left, right) for left, right, _ in comps]
        for left, right, roots in comps:
            if len(roots) != 1:
                if force and len(roots) == 0:
                    # bypass mode keeps rootless dips (stationary value inside I)
                    k0 = 0.5 * (left + right)
                    qints.append(QInterval(left, right, k0, n, 0, -1))
                    ksolutions.append((k0, n, len(qints) - 1))
                    continue
                return False, None, f"band {n} component holds {len(roots)} K points"
            k0 = _refine_band_root(table, n, E, max(roots[0] - 2e-3, left),
                                   min(roots[0] + 2e-3, right))
            qints.append(QInterval(left, right, k0, n, 0, -1))
            ksolutions.append((k0, n, len(qints) - 1))

    clusters = _cluster_k_points(ksolutions, E, table)
    for cid, members in enumerate(clusters):
        cls = 1 if len(members) > 1 else 0
        for (_, _, qidx) in members:
            qints[qidx].cls = cls
            qints[qidx].cluster = cid

    j0list, j1list = [], []
    for cid, members in enumerate(clusters):
        qs = [qints[qidx] for (_, _, qidx) in members]
        a = min(q.a for q in qs)
        b = max(q.b for q in qs)
        k0 = float(np.mean([q.k0 for q in qs]))
        bands = tuple(sorted(q.band for q in qs))
        (j1list if len(qs) > 1 else j0list).append(
            JInterval(a=a, b=b, k0=k0, cls=1 if len(qs) > 1 else 0, bands=bands)
        )

    alljs = j0list + j1list
    for i in range(len(alljs)):
        for j in range(i + 1, len(alljs)):
            if alljs[i].a < alljs[j].b and alljs[j].a < alljs[i].b:
                return False, None, "window intervals overlap"

    window = MourreWindow(
        E=E, delta=dlt, eta=dlt / 2.0, interval=(E - dlt, E + dlt),
        Bsets=bsets, Qints=qints, J0=sorted(j0list, key=lambda J: J.a),
        J1=sorted(j1list, key=lambda J: J.a), N=N, kR=kR, table=table,
    )
    return True, window, ""


def _cluster_k_points(ksolutions, E, table):
    """Group refined K roots that are the same physical point.

    Roots are clustered by k proximity, then each cluster is confirmed by a
    fresh solve: the number of bands passing through E at the cluster center
    decides single-band vs coincidence.
    """
    if not ksolutions:
        return []
    pts = sorted(ksolutions)
    tol = 1e-5 * (1.0 + abs(pts[0][0]))
    clusters = [[pts[0]]]
    for p in pts[1:]:
        if abs(p[0] - clusters[-1][-1][0]) <= tol:
            clusters[-1].append(p)
        else:
            clusters.append([p])
    # confirmation pass: multi-member clusters must really be coincidences
    confirmed = []
    for cl in clusters:
        if len(cl) == 1:
            confirmed.append(cl)
            continue
        kbar = float(np.mean([p[0] for p in cl]))
        eig = eig_hermitian(assemble_fiber(table.ops, table.beta, kbar).H, table.nmax)
        nhit = int(np.count_nonzero(np.abs(eig.values - E) <= 1e-5 * (1.0 + abs(E))))
        if nhit >= 2:
            confirmed.append(cl)
        else:
            confirmed.extend([[p] for p in cl])
    return confirmed


def _j_slope_samples(window: MourreWindow, J: JInterval):
    """FH velocities of the member bands sampled across one J interval."""
    table = window.table
    out = []
    inside = (table.kgrid >= J.a - 1e-12) & (table.kgrid <= J.b + 1e-12)
    for j in np.nonzero(inside)[0]:
        for n in J.bands:
            out.append(float(table.velocities[j, n]))
    for n in J.bands:
        spl = CubicHermiteSpline(table.kgrid, table.energies[:, n], table.velocities[:, n])
        for kk in (J.a, J.k0, J.b):
            out.append(float(spl.derivative()(kk)))
    return out


def build_gamma(window: MourreWindow, branches, force: bool = False) -> BumpGamma:
    """Signed bump: +-1 exactly on each closed J, supported in J widened by
    one third of the gap to the nearest other J interval.

    Slopes of every contributing band must share one sign on each J
    (guaranteed for small delta); a conflict raises SignConflictError unless
    force is set, in which case the dominant sign is used.
    """
    js = sorted(window.Jints, key=lambda J: J.a)
    plateaus = []
    for i, J in enumerate(js):
        slopes = _j_slope_samples(window, J)
        pos = sum(1 for s in slopes if s > 0)
        neg = sum(1 for s in slopes if s < 0)
        if pos and neg and not force:
            raise SignConflictError(
                f"slopes change sign on J = ({J.a:.6g}, {J.b:.6g}); delta too large"
            )
        sign = 1.0 if pos >= neg else -1.0
        gap_left = J.a - js[i - 1].b if i > 0 else np.inf
        gap_right = js[i + 1].a - J.b if i + 1 < len(js) else np.inf
        fallback = max(J.width, window.delta)
        wl = gap_left / 3.0 if np.isfinite(gap_left) else fallback
        wr = gap_right / 3.0 if np.isfinite(gap_right) else fallback
        plateaus.append(Plateau(a=J.a, b=J.b, sign=sign, wl=wl, wr=wr))
    return BumpGamma(plateaus=plateaus)


@dataclass
class FiberCommutator:
    """Commutator sandwich M(k) and cutoff projection P(k) at one fiber,
    held in the window eigenbasis V (columns with chi(E_n) above threshold).

    M_small/P_small are the compressions V^H M V and V^H P V; the range of
    M lies inside the range of P, so these capture the full pair."""

    k: float
    gamma_k: float
    V: np.ndarray
    members: list
    chi_values: np.ndarray
    G: np.ndarray  # V^H (k I + i beta Dtau) V, Hermitian
    M_small: np.ndarray
    P_small: np.ndarray
    dim: int


def fiber_commutator(k: float, window: MourreWindow, gamma, chi, eig) -> FiberCommutator:
    """M(k) = 2 sum_{n,m<=N} chi(E_n) p_n gamma(k)(kI + i beta Dtau) chi(E_m) p_m
    and P(k) = sum_n chi^2(E_n) p_n, in the window eigenbasis."""
    table = window.table
    nbands = min(window.N - 1, len(eig.values)) if window.N >= 1 else len(eig.values)
    if len(eig.values) < nbands:
        raise MissingBandError(f"need {nbands} bands at k={k:.4g}, solver returned {len(eig.values)}")
    chivals = np.asarray(chi(eig.values[:nbands]))
    members = [n for n in range(nbands) if chivals[n] > CHI_SUPPORT_THRESHOLD]
    V = eig.vectors[:, members]
    cv = chivals[members]
    G = V.conj().T @ (k * V + 1j * table.beta * (table.ops.Dtau @ V))
    G = 0.5 * (G + G.conj().T)
    gk = float(gamma(k))
    Msmall = 2.0 * gk * (np.diag(cv) @ G @ np.diag(cv))
    Msmall = 0.5 * (Msmall + Msmall.conj().T)
    return FiberCommutator(
        k=k, gamma_k=gk, V=V, members=members, chi_values=cv, G=G,
        M_small=Msmall, P_small=np.diag(cv**2), dim=table.ops.nnodes,
    )


def _dense_K(table: BandTable, k: float) -> np.ndarray:
    n = table.ops.nnodes
    return k * np.eye(n, dtype=complex) + 1j * table.beta * table.ops.Dtau.toarray()


def commutator_dense(fc: FiberCommutator, table: BandTable):
    """Full (M, P) matrices for small problems (tests, diagnostics)."""
    X = (fc.V * fc.chi_values[None, :]) @ fc.V.conj().T
    K = _dense_K(table, fc.k)
    M = 2.0 * fc.gamma_k * (X @ K @ X)
    M = 0.5 * (M + M.conj().T)
    P = (fc.V * fc.chi_values[None, :] ** 2) @ fc.V.conj().T
    return M, P


def _rho_min(window: MourreWindow, gamma, chi, k: float, values, vectors):
    """Minimum generalized Rayleigh quotient of M over range(P) at one k.

    With P restricted to the window eigenbasis the chi factors cancel, so
    the quotient reduces to the spectrum of 2 gamma(k) V^H K V.
    """
    nbands = min(window.N - 1, len(values)) if window.N >= 1 else len(values)
    chivals = np.asarray(chi(values[:nbands]))
    members = np.nonzero(chivals > CHI_SUPPORT_THRESHOLD)[0]
    if len(members) == 0:
        return None
    V = vectors[:, members]
    table = window.table
    G = V.conj().T @ (k * V + 1j * table.beta * (table.ops.Dtau @ V))
    G = 0.5 * (G + G.conj().T)
    vals = np.linalg.eigvalsh(2.0 * float(gamma(k)) * G)
    return float(vals[0])


def verify_mourre(
    window: MourreWindow,
    gamma,
    chi,
    table: BandTable,
    extra_samples: int = 17,
    crossterm_bound: float | None = None,
) -> MourreReport:
    """Certify the fiberwise positivity over the window.

    Samples every sweep grid point with nonzero cutoff mass plus
    extra_samples fresh solves per J interval; c_est is the worst
    generalized Rayleigh quotient, d0/d1 the infimum slopes on the class
    0/1 intervals.  pass is c_est > 0; a forced window through a critical
    level legitimately fails.
    """
    per_k = []
    c_est = np.inf
    seen = set()
    for j, k in enumerate(table.kgrid):
        rho = _rho_min(window, gamma, chi, float(k), table.energies[j], table.vectors[j])
        if rho is not None:
            per_k.append((float(k), rho))
            c_est = min(c_est, rho)
            seen.add(round(float(k), 12))
    for J in window.Jints:
        for k in np.linspace(J.a, J.b, extra_samples):
            kk = round(float(k), 12)
            if kk in seen:
                continue
            eig = eig_hermitian(assemble_fiber(table.ops, table.beta, float(k)).H, table.nmax)
            rho = _rho_min(window, gamma, chi, float(k), eig.values, eig.vectors)
            if rho is not None:
                per_k.append((float(k), rho))
                c_est = min(c_est, rho)
    per_k.sort(key=lambda t: t[0])
    if not per_k:
        c_est = 0.0

    d0 = d1 = None
    d_scale = 0.0
    for J in window.J0:
        s = np.abs(_j_slope_samples(window, J))
        d0 = float(min(d0, s.min())) if d0 is not None else float(s.min())
        d_scale = max(d_scale, float(s.max()))
    for J in window.J1:
        s = np.abs(_j_slope_samples(window, J))
        d1 = float(min(d1, s.min())) if d1 is not None else float(s.min())
        d_scale = max(d_scale, float(s.max()))

    return MourreReport(
        E=window.E, delta=window.delta, eta=window.eta,
        c_est=float(c_est), d0=d0, d1=d1, per_k=per_k,
        passed=bool(c_est > 0.0), d_scale=d_scale, crossterm_bound=crossterm_bound,
    )


def crossterm_estimate(table: BandTable, branch_a, branch_b, klo: float, khi: float) -> float:
    """Estimate b = max |(d_k psi_a, psi_b)| * max(q_a, q_b) on [klo, khi].

    Eigenvector derivatives are centered differences of the branch frames
    with phases aligned between neighbors; the analytic eigenvector families
    behind the paper's constant are not available exactly.
    """
    k = table.kgrid
    sel = np.nonzero((k >= klo) & (k <= khi))[0]
    best = 0.0
    for j in sel:
        if j == 0 or j == len(k) - 1:
            continue
        va = _aligned(branch_a.vector(j - 1), branch_a.vector(j), branch_a.vector(j + 1))
        dpsi = (va[2] - va[0]) / (k[j + 1] - k[j - 1])
        ov = abs(np.vdot(dpsi, branch_b.vector(j)))
        best = max(best, float(ov))
    q = max(branch_a.multiplicity, branch_b.multiplicity)
    return best * q


def _aligned(vm, v0, vp):
    """Phase-align the neighbors of v0 so differences approximate d_k psi."""
    out = [vm, v0, vp]
    for i in (0, 2):
        z = np.vdot(v0, out[i])
        if abs(z) > 0:
            out[i] = out[i] * (np.conj(z) / abs(z))
    return out


def write_report(path, report: MourreReport):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report.to_dict()
