"""Position-space form of the conjugate operator via Fourier duality.

The generator acting in k dualizes to -(Gamma x3 + x3 Gamma)/2 where Gamma
is convolution with the transform of gamma.  Both sides are evaluated by
direct quadrature transforms (gamma and the test function are smooth and
effectively compactly supported, so the rectangle rule is spectrally
accurate); zero padding of the dual grid controls resolution and the tail
mass of the kernel is monitored for aliasing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .flow import SampledFunction, generator_apply

TAIL_WARN_FRACTION = 1e-8


@dataclass
class FourierKernel:
    """Samples of gamma-hat on the x3 grid dual to the k grid."""

    xs: np.ndarray
    values: np.ndarray
    tail_fraction: float

    def parseval_defect(self, gamma, kgrid) -> float:
        """|  ||gamma_hat||^2 - ||gamma||^2 | / ||gamma||^2 on the grids."""
        dx = self.xs[1] - self.xs[0]
        dk = kgrid[1] - kgrid[0]
        nk = float(dk * np.sum(np.abs(np.asarray(gamma(kgrid))) ** 2))
        nx = float(dx * np.sum(np.abs(self.values) ** 2))
        return abs(nx - nk) / max(nk, 1e-300)


def forward_transform(kgrid, values, xs) -> np.ndarray:
    """F1 g at the points xs: (2 pi)^{-1/2} int e^{-i x k} g(k) dk by the
    rectangle rule (spectrally accurate for smooth decaying g)."""
    kgrid = np.asarray(kgrid, dtype=float)
    dk = kgrid[1] - kgrid[0]
    phase = np.exp(-1j * np.outer(xs, kgrid))
    return (dk / np.sqrt(2.0 * np.pi)) * (phase @ np.asarray(values, dtype=complex))


def dual_grid(kgrid, pad: int = 4) -> np.ndarray:
    """Uniform x3 grid dual to the (pad-times refined) k grid."""
    m = pad * len(kgrid)
    dk = kgrid[1] - kgrid[0]
    dx = 2.0 * np.pi / (m * dk)
    return dx * (np.arange(m) - m // 2)


def gamma_kernel(gamma, kgrid, pad: int = 4) -> FourierKernel:
    xs = dual_grid(kgrid, pad)
    vals = forward_transform(kgrid, np.asarray(gamma(kgrid)), xs)
    mass = np.abs(vals)
    total = float(mass.sum())
    outer = len(xs) // 10
    tail = float(mass[:outer].sum() + mass[-outer:].sum()) / max(total, 1e-300)
    if tail > TAIL_WARN_FRACTION:
        warnings.warn(
            f"gamma-hat tail mass fraction {tail:.2e} exceeds {TAIL_WARN_FRACTION:.0e}; "
            "increase padding or the k range", stacklevel=2,
        )
    return FourierKernel(xs=xs, values=vals, tail_fraction=tail)


def convolve_kernel(gamma, kgrid, xs, psi) -> np.ndarray:
    """(Gamma psi)(x) = (2 pi)^{-1/2} int gamma_hat(x - t) psi(t) dt on xs.

    The kernel is evaluated directly at all difference points, so there is
    no circular aliasing.
    """
    m = len(xs)
    dx = xs[1] - xs[0]
    diffs = dx * np.arange(-(m - 1), m)
    kern = forward_transform(kgrid, np.asarray(gamma(kgrid)), diffs)
    full = np.convolve(np.asarray(psi, dtype=complex), kern, mode="full")
    return (dx / np.sqrt(2.0 * np.pi)) * full[m - 1 : 2 * m - 1]


def position_form_check(gamma, f: SampledFunction, pad: int = 4):
    """Compare F1(A f) computed in k against -(Gamma x3 + x3 Gamma)/2 F1 f.

    Returns (residual, kernel): residual is the relative L2 mismatch on the
    dual grid.  A is applied in k-space through the generator formula; A f
    relates to iA f by A = -i (iA).
    """
    xs = dual_grid(f.kgrid, pad)
    kernel = gamma_kernel(gamma, f.kgrid, pad)
    iaf = generator_apply(gamma, f)
    af = -1j * iaf.values
    lhs = forward_transform(f.kgrid, af, xs)

    psi = forward_transform(f.kgrid, f.values, xs)
    rhs = -0.5 * (convolve_kernel(gamma, f.kgrid, xs, xs * psi) + xs * convolve_kernel(gamma, f.kgrid, xs, psi))

    dx = xs[1] - xs[0]
    num = float(np.sqrt(dx * np.sum(np.abs(lhs - rhs) ** 2)))
    den = float(np.sqrt(dx * np.sum(np.abs(lhs) ** 2)))
    return num / max(den, 1e-300), kernel
