import numpy as np
import pytest

from oracles import bessel_zero, disc_envelope, rect_spectrum_discrete
from twistband.bands import (
    bkrs_fit,
    lambda_prime_violation,
    sqrt_lipschitz_violation,
    sweep_bands,
    track_branches,
)


def test_beta0_bands_are_shifted_mus(square_table_beta0):
    t = square_table_beta0
    mus = rect_spectrum_discrete(1.0, 1.0, 1.0 / 24, t.nmax)
    for j, k in enumerate(t.kgrid):
        assert np.allclose(t.energies[j], mus + k**2, rtol=1e-9)
        assert np.allclose(t.velocities[j], 2 * k, atol=1e-9)


def test_symmetry_residual(square_table_beta0, disc_table_02):
    assert square_table_beta0.symmetry_residual() <= 1e-9
    assert disc_table_02.symmetry_residual() <= 1e-9


def test_jobs_parallel_matches_serial(square24_ops):
    kgrid = np.linspace(-0.5, 0.5, 17)
    serial = sweep_bands(square24_ops, 0.3, kgrid, 3, jobs=1)
    parallel = sweep_bands(square24_ops, 0.3, kgrid, 3, jobs=4)
    assert np.array_equal(serial.energies, parallel.energies)
    assert np.array_equal(serial.velocities, parallel.velocities)


def test_disc_envelope_against_bessel_oracle():
    # acceptance uses h=1/48; the module test runs the coarser 1/32 grid
    from twistband.geometry import GeometrySpec, build_grid
    from twistband.operators import assemble_operators

    ops = assemble_operators(build_grid(GeometrySpec.disc(1.0, 1.0 / 32)))
    table = sweep_bands(ops, 0.2, np.linspace(-2.0, 2.0, 21), nmax=6)
    for j, k in enumerate(table.kgrid):
        oracle = disc_envelope(0.2, float(k), 6)
        rel = np.abs(table.energies[j] - oracle) / oracle
        assert rel.max() < 0.025


def test_sweep_requires_ascending(square24_ops):
    with pytest.raises(ValueError):
        sweep_bands(square24_ops, 0.0, [0.0, 0.0, 0.1], 2)


def test_track_beta0_no_exchanges(square_table_beta0, square_branches_beta0):
    # parallel parabolas never cross; branches follow the sorted bands
    for br in square_branches_beta0:
        assert np.all(np.diff(br.band_index) == 0)
    # mu_2 = mu_3 on the square merges into one branch of multiplicity 2
    mults = sorted(br.multiplicity for br in square_branches_beta0)
    assert mults == [1, 1, 2]


def test_track_disc_exchange_at_k0(disc_branches_02):
    # the m = +-1 branches swap sorted positions when crossing at k = 0
    swapped = [br for br in disc_branches_02 if len(np.unique(br.band_index)) > 1]
    assert len(swapped) >= 2
    for br in swapped[:2]:
        assert br.multiplicity == 1
        assert len(br.degenerate_points) >= 1


def test_track_stable_under_refinement(disc32_ops):
    coarse = track_branches(sweep_bands(disc32_ops, 0.2, np.linspace(-0.6, 0.6, 13), 4))
    fine = track_branches(sweep_bands(disc32_ops, 0.2, np.linspace(-0.6, 0.6, 25), 4))
    # same branch values at the shared k points, same crossing structure
    for bc, bf in zip(coarse, fine):
        assert np.allclose(bc.values, bf.values[::2], rtol=1e-9)


def test_lambda_prime_bound(disc_table_02, square_table_beta0):
    assert lambda_prime_violation(disc_table_02) <= 1e-8
    assert lambda_prime_violation(square_table_beta0) <= 1e-8


def test_sqrt_lipschitz(disc_branches_02):
    for br in disc_branches_02:
        assert sqrt_lipschitz_violation(br) <= 1e-8


def test_bkrs_fit_square_is_one(square_table_beta0):
    c = bkrs_fit(square_table_beta0)
    assert c == pytest.approx(1.0, abs=1e-9)
    assert 0 < c <= 1.0


def test_bkrs_fit_disc_in_unit_interval(disc_table_beta2):
    c = bkrs_fit(disc_table_beta2)
    assert 0 < c <= 1.0


def test_disc_beta2_hosts_benign_crossing(disc_table_beta2):
    # the oracle same-sign crossing sits inside the sweep range
    j01, j11 = bessel_zero(0, 1), bessel_zero(1, 1)
    kstar = (j11**2 - j01**2 + 4.0) / 4.0
    assert kstar == pytest.approx(3.2247, abs=2e-4)
    assert disc_table_beta2.kgrid[0] < kstar < disc_table_beta2.kgrid[-1]
