import numpy as np
import pytest

from oracles import (
    bessel_zero,
    lattice_count_continuum,
    lattice_count_discrete,
    rect_mu,
    rect_mu_discrete,
)
from twistband.fiber import eig_hermitian
from twistband.geometry import GeometrySpec, build_grid
from twistband.operators import assemble_operators, weyl_check


def _ops(spec):
    return assemble_operators(build_grid(spec))


def test_square_mu1_against_analytic():
    ops = _ops(GeometrySpec.rectangle(1.0, 1.0, 1.0 / 64))
    mu1 = float(eig_hermitian(ops.L, 1).values[0])
    assert abs(mu1 - 2 * np.pi**2) / (2 * np.pi**2) < 0.003
    # and the discrete dispersion formula is exact for the scheme
    assert mu1 == pytest.approx(rect_mu_discrete(1, 1, 1 / 64, 1, 1), rel=1e-10)


def test_square_second_order_convergence():
    errs = []
    for h in (1.0 / 32, 1.0 / 64):
        ops = _ops(GeometrySpec.rectangle(1.0, 1.0, h))
        mu1 = float(eig_hermitian(ops.L, 1).values[0])
        errs.append(abs(mu1 - 2 * np.pi**2))
    ratio = errs[0] / errs[1]
    assert 3.5 < ratio < 4.5


def test_dtau_exactly_antisymmetric(square24_ops, disc24_ops):
    for ops in (square24_ops, disc24_ops):
        asym = abs(ops.Dtau + ops.Dtau.T)
        assert asym.max() == 0.0


def test_laplacian_symmetric_positive(square24_ops):
    L = square24_ops.L
    assert abs(L - L.T).max() == 0.0
    mu1 = float(eig_hermitian(L, 1).values[0])
    assert mu1 > 0
    rng = np.random.default_rng(7)
    for _ in range(5):
        v = rng.standard_normal(L.shape[0])
        assert v @ (L @ v) >= (mu1 - 1e-9) * (v @ v)


def test_disc_mu1_against_bessel_bisection_oracle():
    ops = _ops(GeometrySpec.disc(1.0, 1.0 / 50))
    mu1 = float(eig_hermitian(ops.L, 1).values[0])
    j01 = bessel_zero(0, 1)
    assert j01 == pytest.approx(2.404825557695773, abs=1e-9)  # frozen oracle output
    assert abs(mu1 - j01**2) / j01**2 < 0.02


def test_weyl_square_80pi2():
    h = 1.0 / 64
    ops = _ops(GeometrySpec.rectangle(1.0, 1.0, h))
    lam = 80 * np.pi**2
    rows = weyl_check(ops, lam)
    lam_last, count, ratio = rows[-1]
    assert lam_last == pytest.approx(lam)
    assert 0.85 <= ratio <= 1.15
    # the discrete count matches the exact sine-dispersion enumeration
    assert count == lattice_count_discrete(lam, h)
    # and is close to the continuum lattice count (borderline modes aside)
    assert abs(count - lattice_count_continuum(lam)) <= 3


def test_weyl_below_mu1_is_zero(square24_ops):
    mu1 = float(eig_hermitian(square24_ops.L, 1).values[0])
    rows = weyl_check(square24_ops, 0.9 * mu1)
    assert all(c == 0 for _, c, _ in rows)


def test_weyl_rect_first_eigenvalue_count(rect107_ops):
    # mu_11 = pi^2 (1 + 1/0.49) ~ 30.01 is the only level below 30.1
    assert rect_mu(1.0, 0.7, 1, 1) == pytest.approx(30.011654, abs=1e-5)
    rows = weyl_check(rect107_ops, 30.1)
    assert rows[-1][1] == 1


def test_weyl_ceiling_warning(square24_ops):
    with pytest.warns(UserWarning, match="trust ceiling"):
        weyl_check(square24_ops, 1e9)
