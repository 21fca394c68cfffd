"""Experiments: classical CLT, renewal oracle, flip-time law, energy identities,
ballistic limits and the adiabatic sweep.

Every experiment returns a plain dict shaped like the JSON summary
(``experiment``, ``params``, ``estimates`` of ``{value, se}``, ``pass``,
``seed``) plus, where useful, raw samples under ``data`` that the CLI writes
to CSV.  Random streams come from ``numpy.random.SeedSequence(seed)``: batch
``b`` always uses child ``b``, so results do not depend on the worker count.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as _st

from .bandstructure import CombParams, energy, q_derivatives, q_of
from .classical import JumpEngine, first_tau_batch, simulate_batch, torus_marginal_check
from .noise import NoiseModel, gaussian
from .quantum import UnravelingConfig, adiabatic_populations, levy_trajectory
from .stats import ks_test, ks_two_sample, moment_ci

__all__ = [
    "CltConfig",
    "run_clt",
    "renewal_oracle",
    "renewal_variance",
    "run_flip_law",
    "run_energy_identities",
    "run_torus_check",
    "run_ballistic",
    "run_adiabatic_sweep",
    "galilean_char",
]


def _est(value, se=None):
    return {"value": value, "se": se}


def _streams(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def _noise_params(noise: NoiseModel):
    return {"kind": noise.kind, "components": [list(c) for c in noise.components]}


# ---------------------------------------------------------------------------
# CLT
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CltConfig:
    lam: float = 0.02
    gamma: float = 1.5
    p0: float = 1.0
    T: float = 8.0
    n_paths: int = 10_000
    seed: int = 0
    alpha: float = 1.0
    noise: NoiseModel = field(default_factory=gaussian)
    batch: int = 1000
    workers: int = 1
    probes: int = 33

    def __post_init__(self):
        if not 1 < self.gamma < 2:
            raise ValueError("gamma must lie in (1, 2)")
        if not 0 < self.lam < 1:
            raise ValueError("lam must lie in (0, 1)")
        if self.p0 <= 0 or self.T <= 0 or self.n_paths < 1:
            raise ValueError("p0, T and n_paths must be positive")

    @property
    def K0(self):
        return self.p0 / self.lam

    @property
    def horizon(self):
        return self.T / self.lam**self.gamma

    @property
    def scale(self):
        return self.lam ** ((self.gamma + 3) / 2)

    @property
    def nu(self):
        return self.alpha * self.noise.total_rate / 4.0

    @property
    def vartheta(self):
        rate = self.noise.total_rate
        if self.alpha == 0 or rate == 0:
            return 0.0
        return 16.0 * self.p0**3 / (self.alpha * rate)

    @property
    def flips(self):
        """Expected sign-flips over the horizon, ν t / K₀."""
        return self.nu * self.horizon / self.K0

    def params(self):
        d = asdict(self)
        d["noise"] = _noise_params(self.noise)
        d.update(K0=self.K0, horizon=self.horizon, vartheta=self.vartheta, flips=self.flips)
        return d


def _clt_batch(args):
    cfg, b, size = args
    rng = _streams(cfg.seed, b + 1)[b]
    engine = JumpEngine(CombParams(cfg.alpha), cfg.noise)
    probes = np.linspace(0.0, cfg.horizon, cfg.probes)
    res = simulate_batch(engine, np.full(size, cfg.K0), cfg.horizon, rng, probe_times=probes,
                         energy_fn=lambda K: np.abs(K) ** 3)
    return cfg.scale * res.Y, res.E_at.mean(axis=0), res.events


def clt_samples(cfg: CltConfig):
    """Scaled endpoints λ^{(γ+3)/2} Y_{T/λ^γ} for all paths, plus diagnostics."""
    sizes = [min(cfg.batch, cfg.n_paths - s) for s in range(0, cfg.n_paths, cfg.batch)]
    jobs = [(cfg, b, n) for b, n in enumerate(sizes)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_clt_batch, jobs))
    else:
        parts = [_clt_batch(j) for j in jobs]
    z = np.concatenate([p[0] for p in parts])
    weights = np.array(sizes, dtype=float) / cfg.n_paths
    k3 = np.sum([w * p[1] for w, p in zip(weights, parts)], axis=0)
    events = np.concatenate([p[2] for p in parts])
    return z, k3, events


def renewal_variance(vartheta, T, flips):
    """Exact variance of the scaled alternating-renewal sum with a random initial sign.

    A telegraph velocity ±2K with switching rate r has Var ∫₀ᵗ = (4K³/ν)(t - (1 - e^{-2rt})/(2r)),
    which after scaling is ϑT (1 - (1 - e^{-2x}) / (2x)) with x = rt the flip count.
    """
    if flips <= 0:
        return 0.0
    return vartheta * T * (1.0 - (1.0 - np.exp(-2.0 * flips)) / (2.0 * flips))


def run_clt(cfg: CltConfig, mean_sigmas=3.0, var_rel_tol=0.2, ks_max=0.05):
    """Classical CLT at finite λ against N(0, Tϑ)."""
    z, k3, events = clt_samples(cfg)
    target = cfg.T * cfg.vartheta
    mean, mean_se = moment_ci(z, 1)
    var = float(np.var(z, ddof=1))
    # SE of the sample variance from the fourth central moment
    c = z - z.mean()
    var_se = float(np.sqrt(max(np.mean(c**4) - var**2, 0.0) / z.size))
    estimates = {
        "mean": _est(mean, mean_se),
        "variance": _est(var, var_se),
        "vartheta_hat": _est(var / cfg.T, var_se / cfg.T),
        "events_per_path": _est(float(events.mean()), float(events.std() / np.sqrt(events.size))),
    }
    flags = {}
    if target > 0:
        ks, ks_p = ks_test(z, _st.norm(0.0, np.sqrt(target)).cdf)
        estimates["ks"] = _est(ks, None)
        estimates["ks_pvalue"] = _est(ks_p, None)
        # diagnostic: the renewal variance with K replaced by the simulated |K_t|
        growth = float(np.mean(k3) / cfg.K0**3)
        estimates["variance_renewal"] = _est(renewal_variance(cfg.vartheta, cfg.T, cfg.flips), None)
        estimates["cubic_momentum_growth"] = _est(growth, None)
        estimates["variance_growth_corrected"] = _est(growth * renewal_variance(cfg.vartheta, cfg.T, cfg.flips), None)
        flags = {
            "mean": bool(abs(mean) <= mean_sigmas * mean_se),
            "variance": bool(abs(var / target - 1.0) <= var_rel_tol),
            "ks": bool(ks <= ks_max),
        }
    params = cfg.params()
    params.update(mean_sigmas=mean_sigmas, var_rel_tol=var_rel_tol, ks_max=ks_max)
    out = {
        "experiment": "clt",
        "params": params,
        "estimates": estimates,
        "pass": bool(all(flags.values())) if flags else True,
        "checks": flags,
        "seed": cfg.seed,
        "data": {"z": z},
    }
    return out


def renewal_oracle(cfg: CltConfig, n_samples=None, seed=None, flips=None, initial_sign="random"):
    """Sample the alternating-renewal sum behind the diffusion constant.

    Flights have velocity ±2K₀ and exponential durations with mean K₀/ν,
    alternating in sign, over the horizon T/λ^γ; the sum is scaled by
    λ^{(γ+3)/2}.  ``flips`` overrides λ so that the expected flight count
    ν t / K₀ equals it.  Returns ``(analytic_variance, samples, cfg_used)``.
    """
    if flips is not None:
        lam = (flips * cfg.p0 / (cfg.nu * cfg.T)) ** (1.0 / (1.0 - cfg.gamma))
        cfg = CltConfig(**{**asdict(cfg), "lam": lam, "noise": cfg.noise})
    n = cfg.n_paths if n_samples is None else n_samples
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed if seed is None else seed).spawn(1)[0])
    K, t_end = cfg.K0, cfg.horizon
    mean_flight = K / cfg.nu
    sign = rng.choice([-1.0, 1.0], size=n) if initial_sign == "random" else np.ones(n)
    t = np.zeros(n)
    Y = np.zeros(n)
    active = np.arange(n)
    while active.size:
        d = rng.exponential(mean_flight, active.size)
        run = np.minimum(d, t_end - t[active])
        Y[active] += 2.0 * K * sign[active] * run
        t[active] += run
        sign[active] *= -1.0
        active = active[t[active] < t_end]
    var = renewal_variance(cfg.vartheta, cfg.T, cfg.flips) if initial_sign == "random" else None
    return var, cfg.scale * Y, cfg


# ---------------------------------------------------------------------------
# flip-time law
# ---------------------------------------------------------------------------

def run_flip_law(K_abs=50.0, n_paths=6000, seed=0, alpha=1.0, noise: NoiseModel = None,
                 m1_range=(0.9, 1.1), m2_range=(1.7, 2.3)):
    """Moments of ν Δτ / |K| for the first τ from |K₀| ≈ ``K_abs``.

    Starting momenta are uniform over the cell of width 1/2 centred at
    ``K_abs`` (a start exactly on a Bragg point reflects at once with
    probability about 1/2 and is not representative of a flight).  Paths run
    until their first τ, so the intervals are not censored.
    """
    noise = noise if noise is not None else gaussian()
    rng = _streams(seed, 1)[0]
    engine = JumpEngine(CombParams(alpha), noise)
    K0 = K_abs + rng.uniform(-0.25, 0.25, n_paths)
    dtau, k_tau, is_flip, events = first_tau_batch(engine, K0, rng)
    nu = alpha * noise.total_rate / 4.0
    r = nu * dtau / k_tau
    m1, se1 = moment_ci(r, 1)
    m2, se2 = moment_ci(r, 2)
    checks = {"first_moment": bool(m1_range[0] <= m1 <= m1_range[1]),
              "second_moment": bool(m2_range[0] <= m2 <= m2_range[1]),
              "sample_size": bool(r.size >= 5000)}
    return {
        "experiment": "flip_law",
        "params": {"K_abs": K_abs, "n_paths": n_paths, "alpha": alpha, "noise": _noise_params(noise),
                   "nu": nu, "m1_range": list(m1_range), "m2_range": list(m2_range)},
        "estimates": {"first_moment": _est(m1, se1), "second_moment": _est(m2, se2),
                      "flip_fraction": _est(float(is_flip.mean()), None),
                      "mean_flight_over_K_div_nu": _est(float(np.mean(dtau) / K_abs), None),
                      "events_per_interval": _est(float(events.mean()), None)},
        "pass": bool(all(checks.values())),
        "checks": checks,
        "seed": seed,
        "data": {"r": r},
    }


# ---------------------------------------------------------------------------
# energy identities of the classical process
# ---------------------------------------------------------------------------

def run_energy_identities(K0=10.2, times=(1.0, 5.0, 20.0), n_paths=10_000, seed=0, alpha=1.0,
                          noise: NoiseModel = None, sigmas=3.0, rate_sigmas=4.0):
    """Event rate, mean energy growth σt and the second-moment bound."""
    noise = noise if noise is not None else gaussian()
    R, sigma, vs = noise.total_rate, noise.sigma, noise.varsigma
    times = np.asarray(times, dtype=float) / R
    rng = _streams(seed, 1)[0]
    engine = JumpEngine(CombParams(alpha), noise)
    res = simulate_batch(engine, np.full(n_paths, float(K0)), float(times[-1]), rng, probe_times=times,
                         energy_fn=lambda K: energy(alpha, K))
    E0 = float(energy(alpha, K0))
    est, checks = {}, {}
    rate, rate_se = moment_ci(res.events / times[-1], 1)
    est["event_rate"] = _est(rate, rate_se)
    checks["event_rate"] = bool(abs(rate - R) <= rate_sigmas * rate_se)
    for i, t in enumerate(times):
        drift, se = moment_ci(res.E_at[:, i] - E0, 1)
        second, se2 = moment_ci(res.E_at[:, i], 2)
        bound = E0**2 + 3 * sigma * t * E0 + vs * R * t + 1.5 * sigma**2 * t**2
        est[f"energy_drift_t{t:g}"] = _est(drift, se)
        est[f"energy_drift_target_t{t:g}"] = _est(sigma * t, None)
        est[f"second_moment_t{t:g}"] = _est(second, se2)
        est[f"second_moment_bound_t{t:g}"] = _est(bound, None)
        # exact E[(K0 + S_t)^4] for the free particle, S_t the compound-Poisson kick sum
        free = E0**2 + 6 * sigma * t * E0 + vs * R * t + 3 * sigma**2 * t**2
        est[f"second_moment_free_particle_t{t:g}"] = _est(free, None)
        checks[f"drift_t{t:g}"] = bool(abs(drift - sigma * t) <= sigmas * se)
        checks[f"second_moment_t{t:g}"] = bool(second <= bound + sigmas * se2)
    return {
        "experiment": "energy_identities",
        "params": {"K0": K0, "times": times, "n_paths": n_paths, "alpha": alpha,
                   "noise": _noise_params(noise)},
        "estimates": est,
        "pass": bool(all(checks.values())),
        "checks": checks,
        "seed": seed,
    }


def run_torus_check(phi0=0.2, t=2.0, n_paths=10_000, seed=0, alpha=1.0, noise: NoiseModel = None,
                    tv_tol=0.02, sigmas=3.0):
    """K_t mod 1 from the jump process against the torus master equation."""
    noise = noise if noise is not None else gaussian()
    rng = _streams(seed, 1)[0]
    engine = JumpEngine(CombParams(alpha), noise)
    res = simulate_batch(engine, np.full(n_paths, float(phi0)), t, rng)
    rep = torus_marginal_check(res.K, noise, phi0, t, seed=seed)
    ok = rep["tv"] <= tv_tol + sigmas * rep["se"]
    return {
        "experiment": "torus",
        "params": {"phi0": phi0, "t": t, "n_paths": n_paths, "tv_tol": tv_tol},
        "estimates": {"tv": _est(rep["tv"], rep["se"])},
        "pass": bool(ok),
        "seed": seed,
    }


# ---------------------------------------------------------------------------
# ballistic limits
# ---------------------------------------------------------------------------

def galilean_char(noise: NoiseModel, p0, t, q):
    """E[e^{iqP_t}] for the free particle started from the plane wave p0 (u = 0)."""
    q = np.asarray(q, dtype=float)
    v, w = noise.nodes(1e-3)
    phi_hat = np.sum(w[None, :] * np.exp(1j * q[:, None] * v[None, :]), axis=1)
    return np.exp(1j * q * p0) * np.exp(t * (phi_hat - noise.total_rate))


def run_ballistic(mode, cfg: CltConfig = None, n_traj=4000, t=2.0, probes=(0.1, 0.5, 1.0), sigmas=3.0):
    """``no_noise``: ℛ = 0 classical path and mid-band group velocity.
    ``no_comb``: free-particle characteristic function from quantum trajectories
    against the closed form."""
    cfg = cfg or CltConfig()
    if mode == "no_noise":
        from .classical import TrajectoryConfig, simulate_path
        quiet = gaussian(rate=0.0)
        state, _, _ = simulate_path(TrajectoryConfig(comb=CombParams(cfg.alpha), noise=quiet,
                                                     K0=cfg.K0, t_end=cfg.horizon))
        scaled = cfg.lam ** (cfg.gamma + 1) * state.Y
        exact = 2.0 * cfg.p0 * cfg.T
        q1, _ = q_derivatives(CombParams(cfg.alpha), 10.2)
        group = 2.0 * float(q_of(cfg.alpha, 10.2)) * q1
        checks = {"position": bool(abs(scaled - exact) <= 1e-12 * exact),
                  "group_velocity": bool(abs(group / (2 * 10.2) - 1) <= 0.01)}
        est = {"scaled_position": _est(scaled, 0.0), "target": _est(exact, None),
               "group_velocity_p10.2": _est(group, None)}
    elif mode == "no_comb":
        probes = np.asarray(probes, dtype=float)
        p0 = 1.3
        samples = np.zeros((n_traj, probes.size), dtype=complex)
        ucfg = UnravelingConfig(lam=cfg.lam, varrho=1.75, t_end=t, p0=p0, comb=CombParams(0.0), noise=cfg.noise,
                                M=16)
        for i, rng in enumerate(_streams(cfg.seed, n_traj)):
            psi, _ = levy_trajectory(ucfg, rng)
            w = np.abs(psi.amps) ** 2
            samples[i] = np.exp(1j * probes[:, None] * psi.momenta[None, :]) @ w
        est_c = samples.mean(axis=0)
        se = np.sqrt((samples.real.var(axis=0) + samples.imag.var(axis=0)) / n_traj)
        exact = galilean_char(cfg.noise, p0, t, probes)
        err = np.abs(est_c - exact)
        checks = {f"q{q:g}": bool(e <= sigmas * s + 1e-12) for q, e, s in zip(probes, err, se)}
        est = {}
        for q, e, x, s in zip(probes, est_c, exact, se):
            est[f"char_q{q:g}"] = _est(complex(e), float(s))
            est[f"closed_form_q{q:g}"] = _est(complex(x), None)
    else:
        raise ValueError("mode must be 'no_noise' or 'no_comb'")
    return {
        "experiment": f"ballistic_{mode}",
        "params": cfg.params(),
        "estimates": est,
        "pass": bool(all(checks.values())),
        "checks": checks,
        "seed": cfg.seed,
    }


# ---------------------------------------------------------------------------
# adiabatic sweep
# ---------------------------------------------------------------------------

def run_adiabatic_sweep(levels=(0.3, 0.1, 0.03), n_traj=3000, seed=0, alpha=1.0, p0=1.3, rate=4.0,
                        width=0.5, kicks=4.0, M=24, bin_width=0.5, n_boot=300, sigmas=2.0):
    """TV distance between quantum and classical momentum laws per level of λ^ϱ.

    Both laws are driven by the same kick realizations (see
    :func:`combdiffusion.quantum.adiabatic_populations`) and every level reuses
    the same streams, so the level-to-level differences are paired.  The
    sweep passes when each difference exceeds ``sigmas`` bootstrap SEs.
    """
    levels = tuple(float(x) for x in levels)
    if len(levels) < 3:
        raise ValueError("need at least three levels")
    noise = gaussian(rate=rate, width=width)
    t_end = kicks / rate if rate > 0 else 1.0
    lam = 0.5
    edges = np.arange(-(p0 + 12.0), p0 + 12.0 + 1e-9, bin_width)
    streams = np.random.SeedSequence(seed).spawn(n_traj)
    diffs = []
    for level in levels:
        varrho = np.log(level) / np.log(lam)
        rows = np.empty((n_traj, edges.size - 1))
        for i, ss in enumerate(streams):
            cfg = UnravelingConfig(lam=lam, varrho=varrho, t_end=t_end, M=M, p0=p0,
                                   comb=CombParams(alpha), noise=noise)
            labels, pq, pc = adiabatic_populations(cfg, np.random.default_rng(ss))
            rows[i] = np.histogram(labels, edges, weights=pq - pc)[0]
        diffs.append(rows)
    tv = np.array([0.5 * np.abs(D.mean(axis=0)).sum() for D in diffs])
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(n_traj + 1)[-1])
    boot = np.empty((n_boot, len(levels)))
    for b in range(n_boot):
        idx = rng.integers(0, n_traj, n_traj)
        boot[b] = [0.5 * np.abs(D[idx].mean(axis=0)).sum() for D in diffs]
    se = boot.std(axis=0)
    dd = boot[:, :-1] - boot[:, 1:]
    step = tv[:-1] - tv[1:]
    step_se = dd.std(axis=0)
    ok = bool(np.all(step > sigmas * step_se)) if alpha != 0 and rate > 0 else bool(np.all(tv <= 1e-12))
    est = {f"tv_level{lv:g}": _est(float(v), float(s)) for lv, v, s in zip(levels, tv, se)}
    for i in range(len(step)):
        est[f"decrease_{levels[i]:g}_to_{levels[i + 1]:g}"] = _est(float(step[i]), float(step_se[i]))
    return {
        "experiment": "adiabatic",
        "params": {"levels": list(levels), "n_traj": n_traj, "alpha": alpha, "p0": p0, "rate": rate,
                   "width": width, "t_end": t_end, "M": M, "bin_width": bin_width, "sigmas": sigmas},
        "estimates": est,
        "pass": ok,
        "seed": seed,
    }
