"""Independent oracles used to freeze expected values.

Everything here is computed without touching the package's own solution
paths: Bessel zeros by bisection on the special functions, separable
spectra in closed form, lattice counts by enumeration.
"""

import numpy as np
from scipy.special import jv


def bessel_zero(m: int, j: int) -> float:
    """j-th positive zero of J_m by sign-change bisection."""
    f = lambda x: jv(m, x)
    found = []
    x0, step = 0.05, 0.05
    x = x0
    fx = f(x)
    while len(found) < j:
        xn = x + step
        fn = f(xn)
        if fx * fn < 0:
            a, b = x, xn
            for _ in range(90):
                mid = 0.5 * (a + b)
                if f(a) * f(mid) <= 0:
                    b = mid
                else:
                    a = mid
            found.append(0.5 * (a + b))
        x, fx = xn, fn
    return found[j - 1]


def disc_mode_energy(m: int, j: int, beta: float, k: float) -> float:
    """Separable disc fiber: E = j_{|m|,j}^2 + (k - beta m)^2."""
    return bessel_zero(abs(m), j) ** 2 + (k - beta * m) ** 2


def disc_envelope(beta: float, k: float, count: int, mrange=4, jrange=3):
    """Lowest `count` fiber eigenvalues of the unit disc at momentum k."""
    vals = []
    for m in range(-mrange, mrange + 1):
        for j in range(1, jrange + 1):
            vals.append(disc_mode_energy(m, j, beta, k))
    return np.sort(vals)[:count]


def rect_mu(a: float, b: float, p: int, q: int) -> float:
    """Continuum Dirichlet eigenvalue of the (a x b) rectangle."""
    return np.pi**2 * (p**2 / a**2 + q**2 / b**2)


def rect_mu_discrete(a: float, b: float, h: float, p: int, q: int) -> float:
    """Exact eigenvalue of the 5-point scheme on a commensurate rectangle."""
    return (4.0 / h**2) * (
        np.sin(p * np.pi * h / (2.0 * a)) ** 2 + np.sin(q * np.pi * h / (2.0 * b)) ** 2
    )


def rect_spectrum_discrete(a: float, b: float, h: float, count: int):
    nx = int(round(a / h)) - 1
    ny = int(round(b / h)) - 1
    vals = [rect_mu_discrete(a, b, h, p, q) for p in range(1, nx + 1) for q in range(1, ny + 1)]
    return np.sort(vals)[:count]


def lattice_count_continuum(lam: float, a: float = 1.0, b: float = 1.0) -> int:
    """#{(p,q) in N^2 : pi^2 (p^2/a^2 + q^2/b^2) < lam}, exact enumeration."""
    pmax = int(np.ceil(np.sqrt(lam) * a / np.pi)) + 1
    qmax = int(np.ceil(np.sqrt(lam) * b / np.pi)) + 1
    count = 0
    for p in range(1, pmax + 1):
        for q in range(1, qmax + 1):
            if rect_mu(a, b, p, q) < lam:
                count += 1
    return count


def lattice_count_discrete(lam: float, h: float, a: float = 1.0, b: float = 1.0) -> int:
    """Exact count for the 5-point scheme via its sine dispersion."""
    nx = int(round(a / h)) - 1
    ny = int(round(b / h)) - 1
    count = 0
    for p in range(1, nx + 1):
        for q in range(1, ny + 1):
            if rect_mu_discrete(a, b, h, p, q) < lam:
                count += 1
    return count


def disc_benign_crossing(beta: float):
    """Same-sign crossing of the (m=0,j=1) and (m=1,j=1) disc branches:
    solve j01^2 + k^2 = j11^2 + (k-beta)^2 analytically."""
    j01 = bessel_zero(0, 1)
    j11 = bessel_zero(1, 1)
    k = (j11**2 - j01**2 + beta**2) / (2.0 * beta)
    E = j01**2 + k**2
    slopes = (2.0 * k, 2.0 * (k - beta))
    return k, E, slopes
