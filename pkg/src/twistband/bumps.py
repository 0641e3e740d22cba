"""Smooth compactly supported bumps and cutoffs.

All profiles are built from the C-infinity ramp based on exp(-1/t):
S(t) = f(t) / (f(t) + f(1-t)) with f(t) = exp(-1/t) for t > 0.  S is 0
below 0, 1 above 1, and flat to all orders at both ends, so plateau values
are exact in floating point even very close to the transition edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _f(t):
    out = np.zeros_like(t)
    pos = t > 1e-4  # exp(-1/t) underflows anyway below ~1/700
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _fprime(t):
    out = np.zeros_like(t)
    pos = t > 1e-4
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def smoothstep(t):
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1, strictly monotone between."""
    t = np.asarray(t, dtype=float)
    lo, hi = t <= 0.0, t >= 1.0
    mid = ~(lo | hi)
    out = np.zeros_like(t)
    out[hi] = 1.0
    tm = t[mid]
    a, b = _f(tm), _f(1.0 - tm)
    out[mid] = a / (a + b)
    return out


def smoothstep_deriv(t):
    t = np.asarray(t, dtype=float)
    mid = (t > 0.0) & (t < 1.0)
    out = np.zeros_like(t)
    tm = t[mid]
    a, b = _f(tm), _f(1.0 - tm)
    ap, bp = _fprime(tm), _fprime(1.0 - tm)
    out[mid] = (ap * b + a * bp) / (a + b) ** 2
    return out


@dataclass(frozen=True)
class Plateau:
    """One signed plateau [a, b] with transition widths (wl, wr)."""

    a: float
    b: float
    sign: float
    wl: float
    wr: float

    def profile(self, k):
        k = np.asarray(k, dtype=float)
        out = np.ones_like(k)
        left = k < self.a
        right = k > self.b
        out[left] = smoothstep((k[left] - (self.a - self.wl)) / self.wl)
        out[right] = smoothstep(((self.b + self.wr) - k[right]) / self.wr)
        return out

    def profile_deriv(self, k):
        k = np.asarray(k, dtype=float)
        out = np.zeros_like(k)
        left = k < self.a
        right = k > self.b
        out[left] = smoothstep_deriv((k[left] - (self.a - self.wl)) / self.wl) / self.wl
        out[right] = -smoothstep_deriv(((self.b + self.wr) - k[right]) / self.wr) / self.wr
        return out


@dataclass
class BumpGamma:
    """Sum of signed smooth bumps, one per window interval.

    Equal to the interval's sign exactly on each closed plateau, supported
    inside the widened intervals, |gamma| <= 1 when the widened supports are
    disjoint (the builder guarantees that).
    """

    plateaus: list

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        out = np.zeros_like(k)
        for p in self.plateaus:
            out += p.sign * p.profile(k)
        return out if out.ndim else float(out)

    def deriv(self, k):
        k = np.asarray(k, dtype=float)
        out = np.zeros_like(k)
        for p in self.plateaus:
            out += p.sign * p.profile_deriv(k)
        return out if out.ndim else float(out)

    def support(self):
        """Union of widened intervals as a list of (lo, hi)."""
        return [(p.a - p.wl, p.b + p.wr) for p in self.plateaus]

    def max_deriv_estimate(self, samples: int = 4001) -> float:
        worst = 0.0
        for p in self.plateaus:
            ks = np.linspace(p.a - p.wl, p.b + p.wr, samples)
            worst = max(worst, float(np.abs(self.deriv(ks)).max()))
        return worst


@dataclass
class CutoffChi:
    """Smooth cutoff: 1 on the eta-shrunken interval, 0 outside (E-d, E+d)."""

    E: float
    delta: float
    eta: float

    def __post_init__(self):
        if not (0.0 < self.eta < self.delta):
            raise ValueError("need 0 < eta < delta for the cutoff margins")
        self._plateau = Plateau(
            a=self.E - self.delta + self.eta,
            b=self.E + self.delta - self.eta,
            sign=1.0,
            wl=self.eta,
            wr=self.eta,
        )

    @property
    def interval(self):
        return (self.E - self.delta, self.E + self.delta)

    @property
    def inner_interval(self):
        return (self._plateau.a, self._plateau.b)

    def __call__(self, r):
        out = self._plateau.profile(r)
        return out if out.ndim else float(out)


class ZeroGamma:
    """gamma identically zero (useful as a null control)."""

    plateaus: list = []

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        out = np.zeros_like(k)
        return out if out.ndim else 0.0

    def deriv(self, k):
        return self(k)

    def support(self):
        return []
