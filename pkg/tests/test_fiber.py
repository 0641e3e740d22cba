import numpy as np
import pytest

from oracles import disc_envelope, rect_spectrum_discrete
from twistband.fiber import (
    assemble_fiber,
    eig_hermitian,
    eigen_groups,
    fh_derivative,
    fh_velocities,
    solve_fiber,
)
from twistband.geometry import GeometrySpec, build_grid
from twistband.operators import assemble_operators


def test_beta_zero_is_shifted_laplacian(square24_ops):
    k = 0.7
    fib = assemble_fiber(square24_ops, 0.0, k)
    diff = fib.H - (square24_ops.L + k**2 * np.eye(square24_ops.nnodes)).astype(complex)
    assert abs(diff).max() < 1e-14 * (4 / square24_ops.grid.h**2)


def test_k_zero_real_symmetric(disc24_ops):
    fib = assemble_fiber(disc24_ops, 0.3, 0.0)
    assert abs(fib.H.imag).max() == 0.0
    assert abs(fib.H - fib.H.T).max() == 0.0
    assert eig_hermitian(fib.H, 1).values[0] > 0


def test_hermitian_exactly(disc24_ops):
    fib = assemble_fiber(disc24_ops, 0.2, 0.5)
    assert abs(fib.H - fib.H.conj().T).max() == 0.0


def test_disc_fiber_against_bessel_oracle():
    ops = assemble_operators(build_grid(GeometrySpec.disc(1.0, 1.0 / 48)))
    eig = solve_fiber(ops, 0.2, 0.5, 1)
    expected = disc_envelope(0.2, 0.5, 1)[0]
    assert expected == pytest.approx(6.033, abs=2e-3)  # j01^2 + 0.25
    assert abs(eig.values[0] - expected) / expected < 0.02


def test_eig_identity_and_2x2():
    eye = np.eye(6)
    res = eig_hermitian(eye, 6)
    assert np.allclose(res.values, 1.0)
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = eig_hermitian(flip, 2)
    assert np.allclose(res.values, [-1.0, 1.0])


def test_eig_square_low_modes_sparse_path():
    # h = 1/64 gives 3969 nodes, above the dense limit: exercises shift-invert
    ops = assemble_operators(build_grid(GeometrySpec.rectangle(1.0, 1.0, 1.0 / 64)))
    res = eig_hermitian(ops.L, 5)
    exact = np.pi**2 * np.array([2.0, 5.0, 5.0, 8.0, 10.0])
    assert np.all(np.abs(res.values - exact) / exact < 0.003)
    # orthonormal frame and residual contract
    gram = res.vectors.conj().T @ res.vectors
    assert np.abs(gram - np.eye(5)).max() < 1e-8
    assert np.all(res.residuals < 1e-7 * abs(ops.L).max())


def test_eig_residual_and_orthonormality_dense(square24_ops):
    H = assemble_fiber(square24_ops, 0.4, 0.3).H
    res = eig_hermitian(H, 6)
    gram = res.vectors.conj().T @ res.vectors
    assert np.abs(gram - np.eye(6)).max() < 1e-10
    assert np.all(np.diff(res.values) >= 0)


def test_eig_nev_exceeds_dim():
    with pytest.raises(ValueError):
        eig_hermitian(np.eye(3), 4)


def test_lower_bound_by_cross_section(square24_ops):
    mu1 = float(eig_hermitian(square24_ops.L, 1).values[0])
    for k in (-1.3, 0.0, 0.9):
        vals = solve_fiber(square24_ops, 0.5, k, 3).values
        assert vals[0] >= mu1 - 1e-9


def test_fh_velocity_beta_zero(square24_ops):
    k = 0.37
    fib = assemble_fiber(square24_ops, 0.0, k)
    eig = eig_hermitian(fib.H, 4)
    vel, _, _ = fh_velocities(fib, eig)
    assert np.allclose(vel, 2 * k, atol=1e-10)


def test_fh_matches_central_difference(disc32_ops):
    beta, k, dk = 0.2, 0.45, 1e-3
    fib = assemble_fiber(disc32_ops, beta, k)
    eig = eig_hermitian(fib.H, 4)
    vel, _, _ = fh_velocities(fib, eig)
    plus = solve_fiber(disc32_ops, beta, k + dk, 4).values
    minus = solve_fiber(disc32_ops, beta, k - dk, 4).values
    fd = (plus - minus) / (2 * dk)
    assert np.all(np.abs(vel - fd) <= 1e-4 * np.maximum(1.0, np.abs(vel)))


def test_fh_degenerate_group_velocities(disc32_ops):
    # at k = 0 the m = +-1 modes are exactly degenerate; the group velocity
    # matrix splits them into -2 beta, +2 beta
    beta = 0.2
    fib = assemble_fiber(disc32_ops, beta, 0.0)
    eig = eig_hermitian(fib.H, 4)
    groups = eigen_groups(eig.values)
    assert [len(g) for g in groups][:2] == [1, 2]
    vel, _, amb = fh_velocities(fib, eig)
    assert vel[1] == pytest.approx(-2 * beta, rel=5e-3)
    assert vel[2] == pytest.approx(+2 * beta, rel=5e-3)
    v, flagged = fh_derivative(fib, eig, 1)
    assert flagged  # distinct group velocities: branch splitting
    assert v == pytest.approx(-2 * beta, rel=5e-3)


def test_fh_simple_not_flagged(square24_ops):
    fib = assemble_fiber(square24_ops, 0.0, 0.5)
    eig = eig_hermitian(fib.H, 1)
    v, flagged = fh_derivative(fib, eig, 0)
    assert not flagged
    assert v == pytest.approx(1.0, abs=1e-10)


def test_square_low_spectrum_discrete_formula(square24_ops):
    vals = eig_hermitian(square24_ops.L, 4).values
    exact = rect_spectrum_discrete(1.0, 1.0, 1.0 / 24, 4)
    assert np.allclose(vals, exact, rtol=1e-10)
