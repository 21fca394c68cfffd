import numpy as np
import pytest
from hypothesis import given, strategies as st

from combdiffusion.bandstructure import (CombParams, band_gap, band_index, energy, kp_residual, lattice_index,
                                         q_derivatives, q_of, quasimomentum, solve_q, theta, zone_decompose)
from combdiffusion.errors import LatticePoint

momenta = st.floats(-100, 100, allow_nan=False).filter(lambda p: abs(2 * p - round(2 * p)) > 1e-6)
alphas = st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0])


@given(momenta, alphas)
def test_kronig_penney_residual(p, a):
    q = q_of(a, p)
    assert kp_residual(a, p, q) <= 1e-10
    assert abs(q - p) <= 0.5 + 1e-12


@given(momenta, alphas)
def test_q_is_odd(p, a):
    assert q_of(a, -p) == pytest.approx(-q_of(a, p), abs=1e-12)


@given(st.floats(0.01, 60), alphas)
def test_q_increasing_within_band(p, a):
    dp = 1e-4
    if band_index(p) == band_index(p + dp) and abs(theta(p)) < 0.2499:
        assert q_of(a, p + dp) > q_of(a, p)


def test_free_particle_is_identity():
    p = np.linspace(-7.3, 9.1, 101)
    assert np.allclose(q_of(0.0, p), p, rtol=0, atol=1e-12)
    assert np.allclose(energy(0.0, p), p**2)


def test_lattice_convention():
    for n in range(1, 12):
        assert q_of(1.0, n / 2) == pytest.approx(n / 2, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_gap_tends_to_alpha_over_pi(alpha):
    assert band_gap(alpha, 50) * np.pi / alpha == pytest.approx(1.0, abs=0.01)


def test_gap_zero_without_comb():
    assert band_gap(0.0, 3) == 0.0


def test_zone_bookkeeping():
    p = np.array([0.1, 0.3, -0.3, 2.74, -5.26])
    th, n = theta(p), lattice_index(p)
    assert np.allclose(p, th + n / 2)
    assert np.all((th >= -0.25) & (th < 0.25))
    assert np.all((quasimomentum(p) >= -0.5) & (quasimomentum(p) < 0.5))
    z = zone_decompose(2.74)
    assert z.n_lat == 5 and z.theta == pytest.approx(0.24) and z.sign == 1


def test_band_index_edges():
    assert band_index(0.5) == 0
    assert band_index(0.5000001) == 1
    assert band_index(-1.2) == 2


def test_solve_q_point():
    d = solve_q(CombParams(1.0), 3.3)
    assert d.E == pytest.approx(d.q**2)
    assert d.band_index == 6


def test_derivatives_by_finite_difference():
    c = CombParams(1.0)
    for p in (0.37, 3.3, -7.1, 10.2):
        h = 1e-6
        q1, q2 = q_derivatives(c, p)
        fd1 = (q_of(c, p + h) - q_of(c, p - h)) / (2 * h)
        fd2 = (q_of(c, p + 1e-4) - 2 * q_of(c, p) + q_of(c, p - 1e-4)) / 1e-8
        assert q1 == pytest.approx(fd1, rel=1e-6)
        assert q2 == pytest.approx(fd2, rel=1e-3, abs=1e-3)


def test_derivative_undefined_on_lattice():
    with pytest.raises(LatticePoint):
        q_derivatives(CombParams(1.0), 2.5)


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        CombParams(-1.0)
