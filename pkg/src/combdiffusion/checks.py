"""Deterministic and oracle-equivalence checks for the band, κ, noise,
quantum and fiber modules.

Each function returns the same dict shape as the experiments in
:mod:`combdiffusion.harness`.
"""
from __future__ import annotations

import numpy as np

from .bandstructure import CombParams, band_gap, kp_residual, q_of
from .blochkappa import kappa_quad, kappa_sum, variance_check
from .classical import JumpEngine, simulate_batch
from .fiber import (MomentumGrid, build_generator, char_value, compare_semigroups, evolve,
                    gaussian_density, weighted_unraveling)
from .noise import gaussian, mixture, moments, uniform_window, validate_assumptions
from .quantum import pendellosung_period, pendellosung_probe, reflection_band_width

__all__ = ["check_bands", "check_kappa", "check_noise", "check_pendellosung", "check_reflection_scaling",
           "check_fiber_histogram", "check_fiber_unraveling", "check_fiber_free", "check_quantum",
           "check_fiber"]


def _est(value, se=None):
    return {"value": value, "se": se}


def _result(name, params, est, checks, seed, data=None):
    out = {"experiment": name, "params": params, "estimates": est, "pass": bool(all(checks.values())),
           "checks": checks, "seed": seed}
    if data is not None:
        out["data"] = data
    return out


def check_bands(seed=0, n=1000, alphas=(0.5, 1.0, 2.0), res_tol=1e-10, gap_tol=0.1):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-100.0, 100.0, n)
    est, checks = {}, {}
    for a in alphas:
        q = q_of(a, p)
        res = float(kp_residual(a, p, q).max())
        dev = float(np.abs(q - p).max())
        gap = band_gap(a, 50) * np.pi / a
        est[f"max_residual_a{a:g}"] = _est(res)
        est[f"max_q_minus_p_a{a:g}"] = _est(dev)
        est[f"g50_pi_over_alpha_a{a:g}"] = _est(gap)
        checks[f"residual_a{a:g}"] = res <= res_tol
        checks[f"q_within_half_a{a:g}"] = dev <= 0.5
        checks[f"gap_a{a:g}"] = abs(gap - 1.0) <= gap_tol
    q1 = q_of(1.0, p)
    data = {"p": p, "q": q1, "energy": q1**2, "residual": kp_residual(1.0, p, q1)}
    return _result("bands", {"n": n, "alphas": list(alphas), "res_tol": res_tol, "gap_tol": gap_tol},
                   est, checks, seed, data)


def check_kappa(seed=0, alpha=1.0, n_norm=200, n_quad=50, n_var=100, tol=1e-6, var_slack=1e-4):
    """Unitarity of κ, sum-versus-quadrature agreement and the variance bound."""
    rng = np.random.default_rng(seed)
    c = CombParams(alpha)
    ps = rng.uniform(-20.0, 20.0, n_norm)
    vs = rng.uniform(-2.0, 2.0, n_norm)
    norm_err = np.array([abs(np.sum(np.abs(kappa_sum(c, p, v).kappa) ** 2) - 1.0) for p, v in zip(ps, vs)])
    quad_err = []
    for _ in range(n_quad):
        p, v = rng.uniform(-10.0, 10.0), rng.uniform(-2.0, 2.0)
        row = kappa_sum(c, p, v)
        for n in (-1, 0, 1):
            quad_err.append(abs(row.kappa[row.M + n] - kappa_quad(c, p, v, n)))
    quad_err = np.array(quad_err)
    var_excess = []
    for _ in range(n_var):
        p, v = rng.uniform(-20.0, 20.0), rng.uniform(-2.0, 2.0)
        var_excess.append(variance_check(c, p, v) - v**2)
    var_excess = np.array(var_excess)
    est = {"max_norm_error": _est(float(norm_err.max())), "max_quad_error": _est(float(quad_err.max())),
           "max_variance_excess": _est(float(var_excess.max()))}
    checks = {"norm": bool(norm_err.max() <= tol), "quadrature": bool(quad_err.max() <= tol),
              "variance": bool(var_excess.max() <= var_slack)}
    data = {"p": ps, "v": vs, "norm_error": norm_err}
    return _result("kappa", {"alpha": alpha, "n_norm": n_norm, "n_quad": n_quad, "n_var": n_var,
                             "tol": tol, "var_slack": var_slack}, est, checks, seed, data)


def check_noise(seed=0):
    """Moments and assumption checks for the three reference laws.

    The mixture with a gap around the origin is expected to fail the
    assumptions; its check passes when the validator says so.
    """
    models = {"gaussian": gaussian(), "uniform": uniform_window(),
              "gap_mixture": mixture(("band", 0.5, -2.0, -1.0), ("band", 0.5, 1.0, 2.0))}
    est, checks = {}, {}
    for name, m in models.items():
        R, s, vs = moments(m)
        rep = validate_assumptions(m).as_dict()
        est[f"{name}_rate"] = _est(R)
        est[f"{name}_sigma"] = _est(s)
        est[f"{name}_varsigma"] = _est(vs)
        est[f"{name}_assumptions"] = _est(bool(rep["pass"]))
        checks[name] = bool(rep["pass"]) == (name != "gap_mixture")
    rng = np.random.default_rng(seed)
    draws = gaussian().sample(rng, 100_000)
    m2 = float(np.mean(draws**2))
    est["gaussian_sample_second_moment"] = _est(m2, float(np.std(draws**2) / np.sqrt(draws.size)))
    checks["sampler"] = abs(m2 - 0.25) <= 4 * est["gaussian_sample_second_moment"]["se"]
    return _result("noise", {"models": list(models)}, est, checks, seed)


def check_pendellosung(alpha=1.0, n=10, lam=0.1, varrho=1.75, off=0.3, peak_min=0.9, period_tol=0.15,
                       off_max=0.05, periods=5, points=5001):
    """Two-level Rabi oscillation at p = n/2: peak, period 2πλ^ϱ/g_n, and the off-Bragg reflection."""
    c = CombParams(alpha)
    scale = lam**varrho
    period = 2 * np.pi * scale / band_gap(c, n)
    t = np.linspace(0.0, periods * period, points)
    on = pendellosung_probe(c, n / 2, t, lam, varrho)
    offs = pendellosung_probe(c, n / 2 + off, t, lam, varrho)
    ratio = pendellosung_period(t, on) / period
    est = {"peak": _est(float(on.max())), "period_ratio": _est(ratio), "off_bragg_max": _est(float(offs.max()))}
    checks = {"peak": bool(on.max() >= peak_min), "period": bool(abs(ratio - 1) <= period_tol),
              "off_bragg": bool(offs.max() <= off_max)}
    return _result("pendellosung", {"alpha": alpha, "n": n, "lam": lam, "varrho": varrho, "off": off},
                   est, checks, None, {"t": t, "reflection": on, "reflection_off": offs})


def check_reflection_scaling(alpha=1.0, ns=(8, 16, 32), threshold=0.5, slope_tol=0.15):
    c = CombParams(alpha)
    w = np.array([reflection_band_width(c, n, threshold) for n in ns])
    x = np.log(np.asarray(ns) / 2)
    slope, icpt = np.polyfit(x, np.log(w), 1)
    est = {"slope": _est(float(slope)), "constant": _est(float(np.exp(icpt))),
           **{f"width_n{n}": _est(float(v)) for n, v in zip(ns, w)}}
    checks = {"slope": bool(abs(slope + 1) <= slope_tol)}
    return _result("reflection_scaling", {"alpha": alpha, "ns": list(ns), "threshold": threshold},
                   est, checks, None, {"n": np.asarray(ns), "width": w})


def check_quantum(seed=0):
    a = check_pendellosung()
    b = check_reflection_scaling()
    return _result("quantum", {"pendellosung": a["params"], "reflection": b["params"]},
                   {**a["estimates"], **b["estimates"]}, {**a["checks"], **b["checks"]}, seed,
                   {"t": a["data"]["t"], "reflection": a["data"]["reflection"]})


def check_fiber_histogram(seed=0, p0=1.3, width=0.05, t=2.0, n_paths=40_000, bin_width=0.1, half_width=5.0,
                          h=0.01, tv_tol=0.02, sigmas=3.0, n_boot=200):
    """k = 0 grid evolution against the classical jump-process histogram at t = 2/ℛ."""
    noise = gaussian()
    t = t / noise.total_rate
    grid = MomentumGrid(0.0, half_width, h)
    f0 = gaussian_density(grid, p0, width)
    ft = evolve(f0, build_generator("classical", 0.0, 0.1, 1.75, grid, noise), t).values.real * h
    rng = np.random.default_rng(seed)
    K0 = rng.normal(p0, width, n_paths)
    K = simulate_batch(JumpEngine(CombParams(), noise), K0, t, rng).K
    edges = np.arange(-half_width, half_width + 1e-9, bin_width)
    grid_hist = np.histogram(grid.points, edges, weights=ft)[0]
    mc = np.histogram(K, edges)[0] / n_paths
    tv = 0.5 * np.abs(grid_hist - mc).sum() + 0.5 * abs(1.0 - grid_hist.sum() - (1.0 - mc.sum()))
    boot = np.empty(n_boot)
    counts = np.histogram(K, edges)[0]
    probs = np.append(counts, n_paths - counts.sum()) / n_paths
    for b in range(n_boot):
        resample = rng.multinomial(n_paths, probs) / n_paths
        boot[b] = 0.5 * np.abs(grid_hist - resample[:-1]).sum()
    se = float(boot.std())
    est = {"tv": _est(float(tv), se), "grid_mass": _est(float(grid_hist.sum()))}
    checks = {"tv": bool(tv <= tv_tol + sigmas * se)}
    return _result("fiber_histogram", {"p0": p0, "width": width, "t": t, "n_paths": n_paths,
                                       "bin_width": bin_width, "tv_tol": tv_tol}, est, checks, seed,
                   {"bin_left": edges[:-1], "grid": grid_hist, "mc": mc})


def check_fiber_unraveling(seed=0, n_configs=20, n_paths=4000, half_width=3.0, h=0.01, sigmas=3.0):
    """Weighted unraveling against grid evolution on random configurations."""
    rng = np.random.default_rng(seed)
    grid = MomentumGrid(0.0, half_width, h)
    noise = gaussian()
    rows, checks = [], {}
    for i in range(n_configs):
        kind = ("classical", "quantum", "hybrid")[i % 3]
        k = float(rng.uniform(0.0, 0.01))
        lam = float(rng.uniform(0.2, 0.5))
        t = float(rng.uniform(0.5, 1.5))
        p0 = float(rng.uniform(0.8, 1.8))
        f0 = gaussian_density(grid, p0, 0.05, k)
        exact = char_value(evolve(f0, build_generator(kind, k, lam, 1.75, grid, noise), t))
        mc = weighted_unraveling(kind, k, lam, 1.75, t, f0, n_paths=n_paths, seed=int(rng.integers(2**31)),
                                 noise=noise)
        z = abs(mc["value"] - exact) / mc["se"]
        rows.append((i, kind, k, lam, t, p0, exact.real, exact.imag, mc["value"].real, mc["value"].imag,
                     mc["se"], z))
        checks[f"config{i}"] = bool(z <= sigmas)
    zs = np.array([r[-1] for r in rows])
    est = {"max_z": _est(float(zs.max())), "mean_z": _est(float(zs.mean()))}
    return _result("fiber_unraveling", {"n_configs": n_configs, "n_paths": n_paths, "sigmas": sigmas},
                   est, checks, seed, {"rows": rows})


def check_fiber_free(k=0.003, lam=0.3, t=1.0, tol=1e-10):
    """With α = 0 the quantum and classical fiber semigroups coincide."""
    grid = MomentumGrid(0.0, 3.0, 0.01)
    f0 = gaussian_density(grid, 1.3, 0.05, k)
    d_qc, d_qh = compare_semigroups(k, lam, 1.75, t, f0, gaussian(), CombParams(0.0))
    est = {"distance_quantum_classical": _est(d_qc), "distance_quantum_hybrid": _est(d_qh)}
    return _result("fiber_free", {"k": k, "lam": lam, "t": t, "tol": tol}, est, {"free": bool(d_qc <= tol)}, None)


def check_fiber(seed=0):
    parts = [check_fiber_histogram(seed), check_fiber_unraveling(seed), check_fiber_free()]
    est, checks = {}, {}
    for p in parts:
        est.update({f"{p['experiment']}.{k}": v for k, v in p["estimates"].items()})
        checks.update({f"{p['experiment']}.{k}": v for k, v in p["checks"].items()})
    return _result("fiber", {p["experiment"]: p["params"] for p in parts}, est, checks, seed,
                   parts[0]["data"])
