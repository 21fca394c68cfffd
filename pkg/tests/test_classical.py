import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from combdiffusion.bandstructure import CombParams, energy
from combdiffusion.classical import (JumpEngine, TrajectoryConfig, detect_flips, first_tau_batch,
                                     flip_event_indices, jump_sample, kernel_eval, simulate_batch, simulate_path,
                                     torus_law, torus_marginal_check)
from combdiffusion.noise import gaussian

ENGINE = JumpEngine(CombParams(1.0), gaussian())


@given(st.floats(-40, 40), st.floats(-2, 2))
def test_channel_probabilities_normalized(p, v):
    for _, cand, prob in ENGINE.channel_probs(np.array([p]), np.array([v])):
        assert prob.sum() == pytest.approx(1.0)
        assert cand[0, 0] == 0
        assert np.all(prob >= 0)


def test_free_particle_has_no_diffraction(rng):
    eng = JumpEngine(CombParams(0.0), gaussian())
    v, n = eng.sample(rng.uniform(-10, 10, 1000), rng)
    assert np.all(n == 0)


@pytest.mark.parametrize("p_prev", [3.1, 10.25, -7.4])
def test_kernel_integrates_to_rate(p_prev):
    pts = sorted({p_prev + k * 0.5 for k in range(-8, 9)} | {x / 2 for x in range(int(2 * p_prev) - 8, int(2 * p_prev) + 9)})
    lo, hi = -abs(p_prev) - 5, abs(p_prev) + 5
    total = integrate.quad(kernel_eval, lo, hi, args=(p_prev, ENGINE), points=[x for x in pts if lo < x < hi],
                           limit=800, epsabs=1e-9)[0]
    assert total == pytest.approx(1.0, abs=1e-4)


def test_free_kernel_is_noise_density():
    eng = JumpEngine(CombParams(0.0), gaussian())
    assert kernel_eval(1.7, 1.2, eng) == pytest.approx(float(gaussian().density(0.5)))


def test_mid_band_rarely_diffracts(rng):
    p = np.full(100_000, 10.25)
    v, n = ENGINE.sample(p, rng)
    assert np.mean(n != 0) <= 0.05


def test_jump_sample_consistency(rng):
    v, n, p_new = jump_sample(2.3, ENGINE, rng)
    assert p_new == pytest.approx(2.3 + v + n)


def test_noise_off_is_ballistic():
    st_, log, _ = simulate_path(TrajectoryConfig(noise=gaussian(rate=0.0), K0=3.2, t_end=5.0))
    assert st_.K == 3.2 and st_.Y == pytest.approx(2 * 3.2 * 5.0) and log.count == 0


def test_path_reproducible():
    cfg = TrajectoryConfig(K0=1.7, t_end=20.0, seed=9, record="dense", dense_dt=0.5)
    a = simulate_path(cfg)
    b = simulate_path(cfg)
    assert a[0] == b[0]
    assert np.array_equal(a[1].K_after, b[1].K_after)
    assert a[2][0].size == 41


def test_position_is_integral_of_velocity():
    state, log, _ = simulate_path(TrajectoryConfig(K0=2.2, t_end=10.0, seed=3))
    t = np.concatenate([[0.0], log.t, [10.0]])
    K = np.concatenate([[2.2], log.K_after])
    assert state.Y == pytest.approx(np.sum(2 * K * np.diff(t)))


def test_batch_event_rate(rng):
    res = simulate_batch(ENGINE, np.full(4000, 7.3), 5.0, rng)
    rate = res.events / 5.0
    assert abs(rate.mean() - 1.0) <= 4 * rate.std() / np.sqrt(rate.size)


def test_batch_energy_drift(rng):
    res = simulate_batch(ENGINE, np.full(10_000, 7.3), 4.0, rng, probe_times=[4.0],
                         energy_fn=lambda K: energy(1.0, K))
    d = res.E_at[:, 0] - energy(1.0, 7.3)
    assert abs(d.mean() - 0.25 * 4.0) <= 3 * d.std() / np.sqrt(d.size)


def test_batch_records_logs(rng):
    res = simulate_batch(ENGINE, np.full(5, 1.0), 3.0, rng, record=True)
    assert [len(t) for t, _ in res.logs] == res.events.tolist()


def test_flip_classification_even_excursion():
    # signs +,+,-,+,+ : the lone - is an even-length excursion (two changes)
    K_after = np.array([1.0, -1.0, 1.0, 1.0])
    assert flip_event_indices(1.0, K_after).size == 0


def test_flip_classification_single_change():
    K_after = np.array([1.0, -1.0, -1.0, -1.0])
    assert flip_event_indices(1.0, K_after).tolist() == [1]


def test_last_event_never_flip():
    assert flip_event_indices(1.0, np.array([1.0, -1.0])).size == 0


def test_detect_flips_exit():
    fs = detect_flips(np.array([1.0, 2.0, 3.0]), 10.0, np.array([10.5, 20.0, 20.1]), lam=0.1, eps=0.2)
    assert fs.count == 1 and not fs.is_flip[0] and fs.tau[0] == 2.0
    assert fs.exit_time == 2.0


def test_first_tau_terminates(rng):
    dtau, k, flip, ev = first_tau_batch(ENGINE, np.full(200, 20.2), rng)
    assert np.all(np.isfinite(dtau)) and np.all(dtau > 0)


def test_torus_law_mass_and_uniform_fixed_point():
    f = torus_law(gaussian(), np.full(256, 1 / 256), 1.0)
    assert np.allclose(f, 1 / 256)
    g0 = np.zeros(256)
    g0[10] = 1
    assert torus_law(gaussian(), g0, 1.0).sum() == pytest.approx(1.0)


def test_torus_noise_off_frozen():
    g0 = np.zeros(64)
    g0[5] = 1
    assert np.allclose(torus_law(gaussian(rate=0.0), g0, 3.0), g0)


def test_torus_check_needs_paths():
    with pytest.raises(ValueError):
        torus_marginal_check(np.zeros(10), gaussian(), 0.2, 1.0)


def test_torus_check_uniform(rng):
    rep = torus_marginal_check(rng.uniform(-0.5, 0.5, 20_000), gaussian(), "uniform", 1.0)
    assert rep["tv"] <= 0.02 + 3 * rep["se"]
