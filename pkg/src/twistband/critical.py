"""Critical energy levels: band stationary values, opposite-slope crossings,
and the finiteness witnesses (k_R, N_R) for a scan ceiling R.

Stationary points and crossings are bracketed on the sweep grid and refined
by bisection with fresh eigensolves at the midpoints; interpolation is
avoided because it can misread slope signs near near-degeneracies.  A
stationary point sitting exactly on a crossing is numerically ambiguous and
is flagged for manual review instead of classified.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bands import BandTable, Branch, bkrs_fit, track_branches
from .fiber import assemble_fiber, eig_hermitian, eigen_groups, group_velocity_frame
from .errors import RefinementFailureError

REFINE_DK = 1e-6  # bisection stops below this bracket width
STATIONARY_VEL_TOL = 1e-5
CROSSING_VAL_TOL = 1e-6
DEDUPE_TOL = 1e-6  # absolute, on energies
IDENTIFY_MIN_OVERLAP = 0.6


@dataclass
class CriticalPoint:
    kind: str  # 'stationary' | 'crossing'
    E: float
    k0: float
    branches: tuple
    slopes: tuple
    flag: str | None = None  # 'endpoint' | 'ambiguous' | 'refinement-failure'

    def to_dict(self):
        return {
            "kind": self.kind,
            "E": self.E,
            "k0": self.k0,
            "branches": list(self.branches),
            "slopes": list(self.slopes),
            "flag": self.flag,
        }


@dataclass
class CriticalLevelSet:
    """E1 (stationary), E2 (opposite-slope crossings), benign same-sign
    crossings, and the merged critical-level energies below Rceiling."""

    E1set: list
    E2set: list
    benign: list
    Ecset: np.ndarray  # E1 + E2 + benign energies, sorted, deduped
    Rceiling: float
    complete: bool = True

    @property
    def Eset(self) -> np.ndarray:
        """The Mourre-critical levels (stationary union opposite-slope)."""
        return _dedupe([p.E for p in self.E1set] + [p.E for p in self.E2set])

    def nearest_distance(self, E: float, exclude_tol: float | None = None) -> float:
        """dist(E, Ec \\ {E}); entries within exclude_tol of E are treated as E."""
        if exclude_tol is None:
            exclude_tol = 1e-5 * (1.0 + abs(E))
        others = self.Ecset[np.abs(self.Ecset - E) > exclude_tol]
        return float(np.min(np.abs(others - E))) if len(others) else np.inf

    def to_dict(self):
        return {
            "E1": [p.to_dict() for p in self.E1set],
            "E2": [p.to_dict() for p in self.E2set],
            "benign": [p.to_dict() for p in self.benign],
            "Ec": [float(e) for e in self.Ecset],
            "R": self.Rceiling,
            "complete": self.complete,
        }


@dataclass
class WindowBound:
    R: float
    kR: float
    NR: int
    LR: list

    def to_dict(self):
        return {"R": self.R, "kR": self.kR, "NR": self.NR, "LR": list(self.LR)}


def _dedupe(energies, tol: float = DEDUPE_TOL) -> np.ndarray:
    vals = np.sort(np.asarray(energies, dtype=float))
    if len(vals) == 0:
        return vals
    keep = [vals[0]]
    for v in vals[1:]:
        if v - keep[-1] > tol:
            keep.append(v)
    return np.asarray(keep)


def _identify_branch(eig, ref_vector, rtol_groups=None):
    """Index of the eigenvector best aligned with a reference vector.

    Returns (index, overlap, group) where group is the degeneracy group
    containing the index.
    """
    ov = np.abs(eig.vectors.conj().T @ ref_vector)
    idx = int(np.argmax(ov))
    groups = eigen_groups(eig.values)
    group = next(g for g in groups if idx in g)
    if len(group) > 1:
        # overlap with the whole group frame is the meaningful quality
        V = eig.vectors[:, group]
        quality = float(np.linalg.norm(V.conj().T @ ref_vector))
    else:
        quality = float(ov[idx])
    return idx, quality, group


def _branch_state_at(branch: Branch, k: float, nev: int | None = None):
    """Fresh eigensolve at k; returns (value, velocity, vector) of the branch.

    The branch member is identified by eigenvector overlap against the
    stored frame at the nearest grid point; inside a degenerate group the
    velocity matrix is diagonalized and the best-aligned rotated direction
    is taken.
    """
    table = branch.table
    nev = nev or table.nmax
    fib = assemble_fiber(table.ops, table.beta, k)
    eig = eig_hermitian(fib.H, nev)
    ref = branch.vector(table.nearest_index(k))
    idx, quality, group = _identify_branch(eig, ref)
    if quality < IDENTIFY_MIN_OVERLAP:
        raise RefinementFailureError(
            f"branch {branch.label} identification overlap {quality:.3f} at k={k:.6g}"
        )
    gv, rotated = group_velocity_frame(fib, eig, group)
    if len(group) == 1:
        return float(eig.values[idx]), float(gv[0]), rotated[:, 0]
    align = np.abs(rotated.conj().T @ ref)
    pick = int(np.argmax(align))
    return float(eig.values[group[pick]]), float(gv[pick]), rotated[:, pick]


def find_stationary(branches, vel_tol: float = STATIONARY_VEL_TOL):
    """Zeros of the branch velocities, refined by fresh-solve bisection.

    Velocity sign changes between adjacent grid points are bisected until
    the bracket is below REFINE_DK.  Near-zero velocity at a sweep endpoint
    is reported with flag='endpoint' (the zero may lie outside the sweep).
    """
    points = []
    for br in branches:
        k = br.kgrid
        v = br.velocities
        for j in range(len(k) - 1):
            if v[j] == 0.0 and abs(k[j]) <= k.max():
                points.append(
                    CriticalPoint("stationary", float(br.values[j]), float(k[j]),
                                  (br.label,), (0.0,))
                )
                continue
            if v[j] * v[j + 1] < 0.0:
                points.append(_refine_stationary(br, k[j], k[j + 1], v[j], v[j + 1]))
        for j in (0, len(k) - 1):
            interior_hit = any(
                abs(p.k0 - k[j]) < 10 * REFINE_DK for p in points if p.branches == (br.label,)
            )
            if abs(v[j]) < vel_tol and not interior_hit:
                points.append(
                    CriticalPoint("stationary", float(br.values[j]), float(k[j]),
                                  (br.label,), (float(v[j]),), flag="endpoint")
                )
    return _dedupe_points(points)


def _refine_stationary(branch: Branch, ka, kb, va, vb) -> CriticalPoint:
    try:
        while kb - ka > REFINE_DK:
            km = 0.5 * (ka + kb)
            _, vm, _ = _branch_state_at(branch, km)
            if vm == 0.0:
                ka = kb = km
                break
            if va * vm < 0.0:
                kb, vb = km, vm
            else:
                ka, va = km, vm
        k0 = 0.5 * (ka + kb)
        val, vel, _ = _branch_state_at(branch, k0)
        return CriticalPoint("stationary", val, float(k0), (branch.label,), (vel,))
    except RefinementFailureError:
        k0 = 0.5 * (ka + kb)
        j = branch.table.nearest_index(k0)
        return CriticalPoint(
            "stationary", float(branch.values[j]), float(k0), (branch.label,),
            (float(branch.velocities[j]),), flag="refinement-failure",
        )


def _pair_state_at(bra: Branch, brb: Branch, k: float):
    """One fresh solve serving both branches of a crossing bracket."""
    table = bra.table
    fib = assemble_fiber(table.ops, table.beta, k)
    eig = eig_hermitian(fib.H, table.nmax)
    out = []
    for br in (bra, brb):
        ref = br.vector(table.nearest_index(k))
        idx, quality, group = _identify_branch(eig, ref)
        if quality < IDENTIFY_MIN_OVERLAP:
            raise RefinementFailureError(
                f"branch {br.label} identification overlap {quality:.3f} at k={k:.6g}"
            )
        gv, rotated = group_velocity_frame(fib, eig, group)
        align = np.abs(rotated.conj().T @ ref)
        pick = int(np.argmax(align))
        out.append((float(eig.values[group[pick]]), float(gv[pick])))
    return out


def find_crossings(branches, vel_tol: float = STATIONARY_VEL_TOL):
    """Equalities lambda_a(k0) = lambda_b(k0) between distinct branches.

    Opposite-slope crossings are the Mourre-critical ones; same-sign
    crossings are recorded separately as benign.  A crossing whose slopes
    include a (near-)zero is flagged 'ambiguous' (stationary point at a
    crossing cannot be classified numerically).
    Returns (crossings, benign).
    """
    crossings, benign = [], []
    for ia in range(len(branches)):
        for ib in range(ia + 1, len(branches)):
            bra, brb = branches[ia], branches[ib]
            d = bra.values - brb.values
            k = bra.kgrid
            j = 0
            while j < len(k) - 1:
                bracket = None
                if abs(d[j]) <= CROSSING_VAL_TOL * (1.0 + abs(bra.values[j])):
                    lo = max(j - 1, 0)
                    hi = min(j + 1, len(k) - 1)
                    if lo < hi:
                        bracket = (k[lo], k[hi])
                    j = hi
                elif d[j] * d[j + 1] < 0.0:
                    bracket = (k[j], k[j + 1])
                    j += 1
                else:
                    j += 1
                    continue
                if bracket is None:
                    continue
                pt = _refine_crossing(bra, brb, *bracket, vel_tol)
                if pt is None:
                    continue
                if pt.kind == "crossing":
                    crossings.append(pt)
                else:
                    benign.append(pt)
    return _dedupe_points(crossings), _dedupe_points(benign)


def _refine_crossing(bra: Branch, brb: Branch, ka, kb, vel_tol) -> CriticalPoint | None:
    table = bra.table

    def gap(k):
        (va, _), (vb, _) = _pair_state_at(bra, brb, k)
        return va - vb

    try:
        da, db = gap(ka), gap(kb)
        if da * db > 0.0 and min(abs(da), abs(db)) > CROSSING_VAL_TOL:
            return None  # spurious bracket (grid kink without equality)
        while kb - ka > 0.05 * REFINE_DK:
            km = 0.5 * (ka + kb)
            dm = gap(km)
            if dm == 0.0 or (da * dm > 0.0 and db * dm > 0.0):
                # exact touch or lost sign information: stop at midpoint
                ka = kb = km
                break
            if da * dm < 0.0:
                kb, db = km, dm
            else:
                ka, da = km, dm
        k0 = 0.5 * (ka + kb)
        (va, sa), (vb, sb) = _pair_state_at(bra, brb, k0)
    except RefinementFailureError:
        return None
    if abs(va - vb) > 100 * CROSSING_VAL_TOL * (1.0 + abs(va)):
        return None  # never actually equal inside the bracket
    flag = None
    if min(abs(sa), abs(sb)) < vel_tol:
        flag = "ambiguous"
    kind = "crossing" if sa * sb < 0.0 else "benign"
    return CriticalPoint(
        kind, float(0.5 * (va + vb)), float(k0), (bra.label, brb.label), (sa, sb), flag=flag
    )


def _dedupe_points(points):
    out = []
    for p in sorted(points, key=lambda p: (p.E, p.k0)):
        if any(
            abs(p.E - q.E) <= DEDUPE_TOL and abs(p.k0 - q.k0) <= 100 * REFINE_DK
            and p.branches == q.branches
            for q in out
        ):
            continue
        out.append(p)
    return out


def critical_set(stationary, crossings, R: float, benign=(), table: BandTable | None = None):
    """Merge the critical scans below the ceiling R.

    Completeness is relative to (R, kR): if the sweep did not reach kR for
    this R, content beyond the range is unknown and the set is flagged
    incomplete (with a warning), not silently treated as absent.
    """
    e1 = [p for p in stationary if p.E <= R]
    e2 = [p for p in crossings if p.E <= R]
    bn = [p for p in benign if p.E <= R]
    ec = _dedupe([p.E for p in e1] + [p.E for p in e2] + [p.E for p in bn])
    complete = True
    if table is not None:
        c = max(bkrs_fit(table), 1e-12)
        e10 = float(table.energies[table.nearest_index(0.0), 0])
        kR = float(np.sqrt(max(R - e10, 0.0) / c))
        if kR > np.abs(table.kgrid).max() + 1e-12:
            warnings.warn(
                f"sweep range |k| <= {np.abs(table.kgrid).max():.4g} does not reach "
                f"k_R = {kR:.4g} for R = {R:.4g}; critical scan incomplete",
                stacklevel=2,
            )
            complete = False
    return CriticalLevelSet(E1set=e1, E2set=e2, benign=bn, Ecset=ec, Rceiling=R,
                            complete=complete)


def band_window_bound(table: BandTable, R: float, cfit: float, branches=None) -> WindowBound:
    """k_R and the band ceiling N_R for energies up to R.

    k_R = sqrt((R - E1(0)) / c) from the quadratic lower bound; N_R is one
    plus the number of branch slots dipping below R on [-k_R, k_R]
    (multiplicity counted).  R <= E1(0) degenerates to (0, 1).
    """
    e10 = float(table.energies[table.nearest_index(0.0), 0])
    if R <= e10:
        return WindowBound(R=R, kR=0.0, NR=1, LR=[])
    if cfit <= 0:
        raise ValueError("cfit must be positive")
    kR = float(np.sqrt((R - e10) / cfit))
    if branches is None:
        branches = track_branches(table)
    sel = np.abs(table.kgrid) <= kR + 1e-12
    labels, slots = [], 0
    for br in branches:
        vals = br.values[sel] if np.any(sel) else br.values
        if np.min(vals) <= R:
            labels.append(br.label)
            slots += br.multiplicity
    return WindowBound(R=R, kR=kR, NR=1 + slots, LR=labels)


def write_report(path, cset: CriticalLevelSet, bound: WindowBound | None = None):
    doc = {"schema": "twistband/critical-v1"}
    doc.update(cset.to_dict())
    if bound is not None:
        doc.update({"kR": bound.kR, "NR": bound.NR, "LR": bound.LR})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc
