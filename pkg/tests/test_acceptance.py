"""Acceptance criteria 1-12, one test each, every tolerance pinned here.

Each test records a one-line PASS/FAIL verdict that is printed in the
terminal summary.
"""
import time

import numpy as np
import pytest

from combdiffusion import checks, harness
from combdiffusion.cli import main
from combdiffusion.stats import ks_two_sample

from conftest import record

SEED = 20261016


def _finish(number, passed, detail, elapsed=None, limit=None):
    if limit is not None:
        detail += f"; runtime {elapsed:.1f}s (limit {limit}s)"
        passed = passed and elapsed < limit
    record(number, passed, detail)
    assert passed, detail


@pytest.fixture(scope="module")
def clt_run():
    t0 = time.perf_counter()
    cfg = harness.CltConfig(lam=0.02, gamma=1.5, p0=1.0, alpha=1.0, T=8.0, n_paths=10_000, seed=SEED)
    res = harness.run_clt(cfg, mean_sigmas=3.0, var_rel_tol=0.20, ks_max=0.05)
    return cfg, res, time.perf_counter() - t0


def test_criterion_01_dispersion():
    t0 = time.perf_counter()
    r = checks.check_bands(SEED, n=1000, alphas=(0.5, 1.0, 2.0), res_tol=1e-10, gap_tol=0.1)
    e = r["estimates"]
    worst = max(e[f"max_residual_a{a:g}"]["value"] for a in (0.5, 1.0, 2.0))
    gaps = [e[f"g50_pi_over_alpha_a{a:g}"]["value"] for a in (0.5, 1.0, 2.0)]
    _finish(1, r["pass"], f"max KP residual {worst:.1e} (<=1e-10), g50*pi/alpha {np.round(gaps, 4).tolist()}",
            time.perf_counter() - t0, 10)


def test_criterion_02_kappa_identities():
    t0 = time.perf_counter()
    r = checks.check_kappa(SEED, n_norm=200, n_quad=50, n_var=100, tol=1e-6, var_slack=1e-4)
    e = r["estimates"]
    _finish(2, r["pass"], f"norm err {e['max_norm_error']['value']:.1e}, sum-vs-quad {e['max_quad_error']['value']:.1e}"
            f" (<=1e-6), variance excess {e['max_variance_excess']['value']:.1e} (<=1e-4)",
            time.perf_counter() - t0, 120)


def test_criterion_03_classical_identities():
    t0 = time.perf_counter()
    r = harness.run_energy_identities(K0=10.2, times=(1.0, 5.0, 20.0), n_paths=10_000, seed=SEED,
                                      sigmas=3.0, rate_sigmas=4.0)
    failed = [k for k, v in r["checks"].items() if not v]
    e = r["estimates"]
    detail = (f"rate {e['event_rate']['value']:.4f}+-{e['event_rate']['se']:.4f}; "
              f"E[E^2] at t=20: {e['second_moment_t20']['value']:.0f}+-{e['second_moment_t20']['se']:.0f} vs bound "
              f"{e['second_moment_bound_t20']['value']:.0f} (free-particle exact "
              f"{e['second_moment_free_particle_t20']['value']:.0f}); failed: {failed or 'none'}")
    _finish(3, r["pass"], detail, time.perf_counter() - t0, 120)


def test_criterion_04_flip_law():
    t0 = time.perf_counter()
    r = harness.run_flip_law(K_abs=50.0, n_paths=6000, seed=SEED, m1_range=(0.9, 1.1), m2_range=(1.7, 2.3))
    e = r["estimates"]
    _finish(4, r["pass"], f"E[nu dtau/|K|] {e['first_moment']['value']:.3f}+-{e['first_moment']['se']:.3f}, "
            f"second moment {e['second_moment']['value']:.3f}+-{e['second_moment']['se']:.3f} over 6000 intervals",
            time.perf_counter() - t0, 120)


def test_criterion_05_classical_clt(clt_run):
    cfg, r, elapsed = clt_run
    e = r["estimates"]
    detail = (f"mean {e['mean']['value']:.2f}+-{e['mean']['se']:.2f}; variance {e['variance']['value']:.1f} vs "
              f"{cfg.T * cfg.vartheta:.0f} (20% tol; growth-corrected renewal prediction "
              f"{e['variance_growth_corrected']['value']:.1f}); KS {e['ks']['value']:.4f} (<=0.05); "
              f"checks {r['checks']}")
    _finish(5, r["pass"], detail, elapsed, 600)


def test_criterion_06_renewal_oracle(clt_run):
    cfg, r, _ = clt_run
    var_1000, z_1000, _ = harness.renewal_oracle(cfg, n_samples=100_000, flips=1000)
    limit_ok = abs(var_1000 / (cfg.T * cfg.vartheta) - 1) <= 0.02
    sampled_ok = abs(np.var(z_1000) / (cfg.T * cfg.vartheta) - 1) <= 0.02
    _, z_oracle, _ = harness.renewal_oracle(cfg, n_samples=cfg.n_paths, seed=SEED + 1)
    ks, p = ks_two_sample(r["data"]["z"], z_oracle)
    agree = p > 0.01
    detail = (f"oracle variance at 1e3 flips {var_1000:.2f} (sampled {np.var(z_1000):.2f}) vs 128 within 2%; "
              f"two-sample KS vs run_clt at {cfg.flips:.1f} flips: D={ks:.4f}, p={p:.2e} (need >0.01)")
    _finish(6, limit_ok and sampled_ok and agree, detail)


def test_criterion_07_ballistic():
    cfg = harness.CltConfig(seed=SEED)
    a = harness.run_ballistic("no_noise", cfg)
    b = harness.run_ballistic("no_comb", cfg, n_traj=4000, t=2.0, probes=(0.1, 0.5, 1.0), sigmas=3.0)
    e = a["estimates"]
    detail = (f"scaled position {e['scaled_position']['value']!r} vs 2p0T=16; group velocity at p=10.2 "
              f"{e['group_velocity_p10.2']['value']:.3f} vs 20.4; Galilean probes {b['checks']}")
    _finish(7, a["pass"] and b["pass"], detail)


def test_criterion_08_pendellosung():
    t0 = time.perf_counter()
    r = checks.check_pendellosung(n=10, off=0.3, peak_min=0.9, period_tol=0.15, off_max=0.05)
    e = r["estimates"]
    _finish(8, r["pass"], f"peak {e['peak']['value']:.4f}, period ratio {e['period_ratio']['value']:.4f}, "
            f"off-Bragg max {e['off_bragg_max']['value']:.4f}", time.perf_counter() - t0, 60)


def test_criterion_09_reflection_scaling():
    r = checks.check_reflection_scaling(ns=(8, 16, 32), threshold=0.5, slope_tol=0.15)
    e = r["estimates"]
    _finish(9, r["pass"], f"log-log slope {e['slope']['value']:.4f} (-1+-0.15); "
            f"widths {[round(e[f'width_n{n}']['value'], 5) for n in (8, 16, 32)]}")


def test_criterion_10_fiber_equivalences():
    h = checks.check_fiber_histogram(SEED, t=2.0, tv_tol=0.02, sigmas=3.0)
    u = checks.check_fiber_unraveling(SEED, n_configs=20, sigmas=3.0)
    f = checks.check_fiber_free(tol=1e-10)
    detail = (f"k=0 TV {h['estimates']['tv']['value']:.4f}+-{h['estimates']['tv']['se']:.4f} (<=0.02+3SE); "
              f"unraveling max |z| {u['estimates']['max_z']['value']:.2f} over 20 configs (<=3); "
              f"alpha=0 distance {f['estimates']['distance_quantum_classical']['value']:.1e} (<=1e-10)")
    _finish(10, h["pass"] and u["pass"] and f["pass"], detail)


def test_criterion_11_adiabatic_trend():
    r = harness.run_adiabatic_sweep(levels=(0.3, 0.1, 0.03), n_traj=3000, seed=SEED, sigmas=2.0)
    e = r["estimates"]
    tv = [f"{e[f'tv_level{lv:g}']['value']:.4f}+-{e[f'tv_level{lv:g}']['se']:.4f}" for lv in (0.3, 0.1, 0.03)]
    steps = [f"{v['value']:.4f}+-{v['se']:.4f}" for k, v in e.items() if k.startswith("decrease")]
    _finish(11, r["pass"], f"TV at lambda^rho=0.3,0.1,0.03: {tv}; paired decreases {steps} (each >2SE)")


def test_criterion_12_reproducibility(tmp_path):
    same = {}
    for command in ("bands", "noise", "classical", "quantum"):
        outs = []
        for run in ("a", "b"):
            d = tmp_path / command / run
            main([command, "--seed", str(SEED), "--out", str(d)])
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        same[command] = outs[0] == outs[1]
    _finish(12, all(same.values()), f"byte-identical reruns: {same}")
