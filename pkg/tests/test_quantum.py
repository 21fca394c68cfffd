import numpy as np
import pytest
from hypothesis import given, strategies as st

from combdiffusion.bandstructure import CombParams, band_gap
from combdiffusion.errors import WindowOverflow
from combdiffusion.noise import gaussian
from combdiffusion.quantum import (UnravelingConfig, adiabatic_populations, eigenstate, fiber_basis, free_flight,
                                   kick, levy_trajectory, momentum_expectation, pendellosung_period,
                                   pendellosung_probe, plane_wave, reflection_band_width, to_qbasis)

C = CombParams(1.0)


@pytest.mark.parametrize("p", [0.2, 2.5, -3.0, 10.2, 0.0])
def test_basis_unitary(p):
    U, labels, E = fiber_basis(plane_wave(p, 32, C))
    assert np.abs(U.conj().T @ U - np.eye(U.shape[0])).max() < 1e-12
    assert np.all(np.isfinite(E))


def test_mid_band_plane_wave_is_nearly_eigenstate():
    b = to_qbasis(plane_wave(10.2, 48, C))
    assert np.abs(b).max() ** 2 > 0.99


@given(st.floats(-20, 20), st.floats(0, 5))
def test_free_flight_preserves_norm(p, dt):
    psi = free_flight(plane_wave(p, 24, C), dt, 0.1)
    assert psi.norm2 == pytest.approx(1.0, abs=1e-10)


def test_eigenstate_is_stationary():
    psi = eigenstate(3.3, 32, C)
    out = free_flight(psi, 7.0)
    assert abs(np.vdot(psi.amps, out.amps)) == pytest.approx(1.0, abs=1e-10)


@given(st.floats(-3, 3))
def test_kick_moves_momenta(v):
    psi = plane_wave(1.2, 24, C)
    out = kick(psi, v)
    p_before = momentum_expectation(psi, lambda p: p)
    assert momentum_expectation(out, lambda p: p) == pytest.approx(p_before + v, abs=1e-9)
    assert out.norm2 == pytest.approx(1.0)


def test_huge_kick_rejected():
    with pytest.raises(WindowOverflow):
        kick(plane_wave(1.0, 16, C), 9.0)


def test_free_particle_levy_matches_classical_kicks():
    cfg = UnravelingConfig(t_end=2.0, p0=1.3, comb=CombParams(0.0), M=16, seed=4)
    psi, kicks = levy_trajectory(cfg)
    w = np.abs(psi.amps) ** 2
    assert np.sum(w * psi.momenta) == pytest.approx(1.3 + sum(v for _, v in kicks))


def test_adiabatic_populations_are_distributions():
    cfg = UnravelingConfig(lam=0.5, varrho=1.0, t_end=1.0, p0=1.3, M=24, noise=gaussian(4.0, 0.5), seed=2)
    labels, pq, pc = adiabatic_populations(cfg)
    assert pq.sum() == pytest.approx(1.0, abs=1e-10)
    assert pc.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(pc >= -1e-15)


def test_pendellosung_two_level():
    scale = 0.1**1.75
    period = 2 * np.pi * scale / band_gap(C, 10)
    t = np.linspace(0, 5 * period, 5001)
    s = pendellosung_probe(C, 5.0, t)
    assert s.max() >= 0.9
    assert pendellosung_period(t, s) / period == pytest.approx(1.0, abs=0.15)
    assert pendellosung_probe(C, 5.3, t).max() <= 0.05


def test_no_reflection_without_comb():
    assert np.all(pendellosung_probe(CombParams(0.0), 5.0, np.linspace(0, 1, 10)) == 0)
    assert reflection_band_width(CombParams(0.0), 8) == 0.0


def test_reflection_width_shrinks_with_n():
    assert reflection_band_width(C, 16) < reflection_band_width(C, 8)


def test_config_validation():
    with pytest.raises(ValueError):
        UnravelingConfig(lam=1.5)
    with pytest.raises(ValueError):
        UnravelingConfig(M=8)
