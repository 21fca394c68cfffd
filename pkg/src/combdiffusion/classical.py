"""The classical momentum/position process (K_t, Y_t).

Momentum jumps at the Poisson times of rate ℛ.  A jump adds a kick ``v`` drawn
from j/ℛ and a lattice offset ``n`` drawn from |κ_v(K, n)|²; between jumps
``dY/dt = 2K``.  :class:`JumpEngine` samples jumps for whole arrays of paths
at once, which is how the large experiments run; :func:`simulate_path` is
the single-path event-driven form with a full event log.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bandstructure import CombParams, _alpha, lattice_index, theta
from .blochkappa import kappa_closed, kappa_row
from .noise import NoiseModel, gaussian

__all__ = [
    "JumpEngine",
    "TrajectoryConfig",
    "PathState",
    "EventLog",
    "FlipStats",
    "BatchResult",
    "jump_sample",
    "simulate_path",
    "simulate_batch",
    "detect_flips",
    "first_tau_batch",
    "kernel_eval",
    "torus_marginal_check",
    "torus_law",
]


class JumpEngine:
    """Vectorized sampler of (v, n) jumps.

    Parameters
    ----------
    comb, noise
        The model.
    p_fast, theta_fast
        A path uses the short candidate list I(p, v) when ``|p| > p_fast`` and
        both ``|Θ(p)|`` and ``|Θ(p+v)|`` exceed ``theta_fast``.
    width, width_far
        Otherwise the candidates are a ``±width`` neighbourhood of every
        element of I(p, v), narrowed to ``±width_far`` when ``|p| > p_fast``
        (there the mass off I(p, v) is already O(1/p²)).

    Whatever mass the candidate list misses is added to n = 0.
    """

    def __init__(self, comb=CombParams(), noise: NoiseModel = None, p_fast=5.0, theta_fast=0.02, width=16,
                 width_far=2):
        self.alpha = _alpha(comb)
        self.noise = noise if noise is not None else gaussian()
        self.p_fast = float(p_fast)
        self.theta_fast = float(theta_fast)
        self.width = int(width)
        self.width_far = int(width_far)

    # candidate construction -------------------------------------------------
    def _fast_candidates(self, p, v):
        n0 = lattice_index(p)
        n1 = lattice_index(p + v)
        c = np.stack([np.zeros_like(n0), -n0, -n1, n0 - n1], axis=1)
        dup = np.zeros(c.shape, dtype=bool)
        for k in range(1, 4):
            dup[:, k] = np.any(c[:, k:k + 1] == c[:, :k], axis=1)
        return c, dup

    def _full_candidates(self, p, v, w):
        offs = np.arange(-w, w + 1)
        n0 = lattice_index(p)
        n1 = lattice_index(p + v)
        centers = np.stack([np.zeros_like(n0), -n0, -n1, n0 - n1], axis=1)
        c = (centers[:, :, None] + offs[None, None, :]).reshape(len(p), -1)
        c = np.sort(c, axis=1)
        dup = np.zeros(c.shape, dtype=bool)
        dup[:, 1:] = c[:, 1:] == c[:, :-1]
        # keep n = 0 first so the residual lands on it
        order = np.argsort(c != 0, axis=1, kind="stable")
        c = np.take_along_axis(c, order, axis=1)
        dup = np.take_along_axis(dup, order, axis=1)
        return c, dup

    def channel_probs(self, p, v):
        """Candidate offsets and their probabilities for arrays ``p``, ``v``.

        Returns a list of ``(index, candidates, probs)`` groups, one per
        candidate layout, with ``candidates[:, 0] == 0``.
        """
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        far = np.abs(p) > self.p_fast
        fast = far & (np.abs(theta(p)) > self.theta_fast) & (np.abs(theta(p + v)) > self.theta_fast)
        layouts = (
            (fast, self._fast_candidates),
            (far & ~fast, lambda a, b: self._full_candidates(a, b, self.width_far)),
            (~far, lambda a, b: self._full_candidates(a, b, self.width)),
        )
        groups = []
        for mask, build in layouts:
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                continue
            pp, vv = p[idx], v[idx]
            cand, dup = build(pp, vv)
            prob = kappa_row(self.alpha, pp[:, None], vv[:, None], cand)
            prob = np.where(dup, 0.0, prob)
            resid = 1.0 - prob.sum(axis=1)
            prob[:, 0] += np.clip(resid, 0.0, None)
            prob /= prob.sum(axis=1, keepdims=True)
            groups.append((idx, cand, prob))
        return groups

    def sample_n(self, p, v, rng):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        n = np.zeros(p.shape, dtype=np.int64)
        if self.alpha == 0.0:
            return n
        u = rng.random(p.shape)
        for idx, cand, prob in self.channel_probs(p, v):
            cdf = np.cumsum(prob, axis=1)
            k = np.minimum((cdf < u[idx, None]).sum(axis=1), cand.shape[1] - 1)
            n[idx] = cand[np.arange(idx.size), k]
        return n

    def sample(self, p, rng):
        """Draw (v, n) for every entry of ``p``."""
        p = np.asarray(p, dtype=float)
        v = self.noise.sample(rng, p.shape)
        n = self.sample_n(p, v, rng)
        return v, n


def jump_sample(p_prev, engine: JumpEngine, rng):
    """One jump from ``p_prev``: returns (v, n, p_new)."""
    v, n = engine.sample(np.array([float(p_prev)]), rng)
    return float(v[0]), int(n[0]), float(p_prev + v[0] + n[0])


def kernel_eval(p, p_prev, engine: JumpEngine):
    """Jump-rate density J(p, p_prev) = Σ_n j(p - p_prev - n) |κ_{p-p_prev-n}(p_prev, n)|²."""
    p = float(p)
    p_prev = float(p_prev)
    reach = engine.noise.reach
    d = p - p_prev
    n = np.arange(int(np.floor(d - reach)), int(np.ceil(d + reach)) + 1)
    v = d - n
    jv = engine.noise.density(v)
    keep = jv > 0
    if not keep.any():
        return 0.0
    prob = kappa_row(engine.alpha, p_prev, v[keep], n[keep])
    return float(np.sum(jv[keep] * prob))


# ---------------------------------------------------------------------------
# single paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryConfig:
    comb: CombParams = CombParams()
    noise: NoiseModel = field(default_factory=gaussian)
    K0: float = 1.0
    t_end: float = 1.0
    record: str = "events"  # "none" | "events" | "dense"
    dense_dt: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not np.isfinite(self.K0):
            raise ValueError("K0 must be finite")


@dataclass(frozen=True)
class PathState:
    t: float
    K: float
    Y: float


@dataclass
class EventLog:
    K0: float
    t: np.ndarray
    v: np.ndarray
    n: np.ndarray
    K_before: np.ndarray
    K_after: np.ndarray

    @property
    def count(self):
        return int(self.t.size)


def simulate_path(cfg: TrajectoryConfig, engine: JumpEngine = None, rng=None):
    """Exact event-driven path on [0, t_end].

    Returns ``(PathState, EventLog, trace)`` where ``trace`` is ``None`` unless
    ``cfg.record == "dense"``, in which case it is ``(times, K, Y)`` on a grid
    of spacing ``cfg.dense_dt``.
    """
    engine = engine or JumpEngine(cfg.comb, cfg.noise)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    rate = engine.noise.total_rate
    t, K, Y = 0.0, float(cfg.K0), 0.0
    ts, vs, ns, kb, ka = [], [], [], [], []
    while rate > 0:
        dt = rng.exponential(1.0 / rate)
        if t + dt > cfg.t_end:
            break
        t += dt
        Y += 2.0 * K * dt
        v, n = engine.sample(np.array([K]), rng)
        ts.append(t)
        vs.append(v[0])
        ns.append(n[0])
        kb.append(K)
        K = K + v[0] + n[0]
        ka.append(K)
    Y += 2.0 * K * (cfg.t_end - t)
    log = EventLog(K0=float(cfg.K0), t=np.array(ts), v=np.array(vs), n=np.array(ns, dtype=np.int64),
                   K_before=np.array(kb), K_after=np.array(ka))
    trace = None
    if cfg.record == "dense":
        trace = dense_trace(log, cfg.t_end, cfg.dense_dt)
    return PathState(t=float(cfg.t_end), K=K, Y=Y), log, trace


def dense_trace(log: EventLog, t_end, dt):
    """(times, K, Y) sampled on a uniform grid from an event log."""
    times = np.arange(0.0, t_end + 0.5 * dt, dt)
    k_path = np.concatenate([[log.K0], log.K_after])
    idx = np.searchsorted(log.t, times, side="right")
    K = k_path[idx]
    # Y is piecewise linear: integrate exactly between breakpoints
    breaks = np.concatenate([[0.0], log.t])
    seg_Y = np.concatenate([[0.0], np.cumsum(2.0 * k_path[:-1] * np.diff(breaks))]) if log.count else np.zeros(1)
    Y = seg_Y[idx] + 2.0 * K * (times - breaks[idx])
    return times, K, Y


# ---------------------------------------------------------------------------
# many paths at once
# ---------------------------------------------------------------------------

@dataclass
class BatchResult:
    K: np.ndarray
    Y: np.ndarray
    events: np.ndarray
    E_at: np.ndarray = None       # energies at the probe times, shape (n_paths, n_probe)
    probe_times: np.ndarray = None
    logs: list = None             # per-path (t, K_after) when recording


def simulate_batch(engine: JumpEngine, K0, t_end, rng, probe_times=None, record=False, energy_fn=None):
    """Run many independent paths in lockstep, one Poisson event per sweep.

    ``probe_times`` (sorted) collects K at those times; ``energy_fn`` maps K to
    the recorded quantity (default E(K)).  With ``record`` every path keeps its
    event times and post-jump momenta.
    """
    K = np.array(K0, dtype=float, copy=True)
    P = K.size
    Y = np.zeros(P)
    t = np.zeros(P)
    events = np.zeros(P, dtype=np.int64)
    rate = engine.noise.total_rate
    probes = np.asarray(probe_times if probe_times is not None else [], dtype=float)
    K_probe = np.full((P, probes.size), np.nan)
    rec_t, rec_k, rec_i = [], [], []
    active = np.arange(P) if rate > 0 else np.arange(0)
    while active.size:
        dt = rng.exponential(1.0 / rate, active.size)
        t_new = t[active] + dt
        # momenta are constant on [t, t_new): fill probes in that window
        if probes.size:
            lo = np.searchsorted(probes, t[active], side="left")
            hi = np.searchsorted(probes, np.minimum(t_new, t_end), side="left")
            for j in np.flatnonzero(hi > lo):
                K_probe[active[j], lo[j]:hi[j]] = K[active[j]]
        done = t_new > t_end
        fin = active[done]
        Y[fin] += 2.0 * K[fin] * (t_end - t[fin])
        t[fin] = t_end
        go = active[~done]
        Y[go] += 2.0 * K[go] * dt[~done]
        t[go] = t_new[~done]
        if go.size:
            v, n = engine.sample(K[go], rng)
            K[go] += v + n
            events[go] += 1
            if record:
                rec_t.append(t[go].copy())
                rec_k.append(K[go].copy())
                rec_i.append(go.copy())
        active = go
    if probes.size:
        # probes at or beyond t_end take the final value
        miss = np.isnan(K_probe)
        K_probe[miss] = np.broadcast_to(K[:, None], K_probe.shape)[miss]
    if rate <= 0:
        Y = 2.0 * K * t_end
    out = BatchResult(K=K, Y=Y, events=events, probe_times=probes if probes.size else None)
    if probes.size:
        out.E_at = energy_fn(K_probe) if energy_fn is not None else K_probe
    if record:
        logs = [([], []) for _ in range(P)]
        if rec_t:
            ti = np.concatenate(rec_t)
            ki = np.concatenate(rec_k)
            ii = np.concatenate(rec_i)
            order = np.argsort(ii, kind="stable")
            ti, ki, ii = ti[order], ki[order], ii[order]
            bounds = np.searchsorted(ii, np.arange(P + 1))
            logs = [(ti[bounds[i]:bounds[i + 1]], ki[bounds[i]:bounds[i + 1]]) for i in range(P)]
        out.logs = logs
    return out


# ---------------------------------------------------------------------------
# sign flips
# ---------------------------------------------------------------------------

@dataclass
class FlipStats:
    tau: np.ndarray          # τ_1, τ_2, ... (τ_0 = 0 not included)
    dtau: np.ndarray         # Δτ_m = τ_{m+1} - τ_m for m >= 0, complete intervals only
    K_tau: np.ndarray        # K at τ_m for the same intervals
    is_flip: np.ndarray      # whether τ_{m+1} was a sign-flip (else an |K| exit)
    count: int               # 𝐍_t
    flip_events: np.ndarray  # event indices (0-based) classified as sign-flips
    exit_time: float         # ς, np.inf if |K| never left the window


def _sign(x):
    return np.where(np.asarray(x) >= 0, 1, -1)


def flip_event_indices(K0, K_after):
    """Event indices that are sign-flips.

    Event ``j`` (time t_{j+1} in one-based notation) is a sign-flip when it
    ends an odd-length run of consecutive sign changes, the event before the
    run did not change sign, and the next event keeps the sign.  The last
    event cannot be verified and is never classified as a flip.
    """
    s = _sign(np.concatenate([[K0], K_after]))
    change = s[1:] != s[:-1]
    flips = []
    run = 0
    for j, c in enumerate(change):
        run = run + 1 if c else 0
        if c and run % 2 == 1 and j + 1 < change.size and not change[j + 1]:
            # the run must be preceded by a non-change (or start the log)
            flips.append(j)
    return np.array(flips, dtype=np.int64)


def detect_flips(log_t, K0, K_after, lam=None, eps=0.2, p_bar=None, t_end=None):
    """τ-sequence, sign-flip classification and exit time ς for one path.

    ``p_bar`` defaults to ``|K0|``; the exit window is
    ``[p_bar - lam**eps * p_bar, p_bar + lam**eps * p_bar]`` when ``lam`` is given.
    """
    log_t = np.asarray(log_t, dtype=float)
    K_after = np.asarray(K_after, dtype=float)
    flips = flip_event_indices(K0, K_after)
    is_flip_event = np.zeros(K_after.size, dtype=bool)
    is_flip_event[flips] = True
    taus, kinds, k_at = [], [], []
    t_prev, k_ref = 0.0, abs(K0)
    k_tau = K0
    for j in range(K_after.size):
        a = abs(K_after[j])
        exit_ = a < 0.5 * k_ref or a > 1.5 * k_ref
        if is_flip_event[j] or exit_:
            taus.append(log_t[j])
            kinds.append(bool(is_flip_event[j]))
            k_at.append(k_tau)
            k_tau = K_after[j]
            k_ref = abs(k_tau)
    tau = np.array(taus)
    starts = np.concatenate([[0.0], tau[:-1]]) if tau.size else np.array([])
    dtau = tau - starts
    exit_time = np.inf
    if lam is not None:
        pb = abs(K0) if p_bar is None else p_bar
        width = lam**eps * pb
        out = np.flatnonzero(np.abs(np.abs(K_after) - pb) > width)
        if out.size:
            exit_time = float(log_t[out[0]])
    return FlipStats(tau=tau, dtau=dtau, K_tau=np.array(k_at), is_flip=np.array(kinds, dtype=bool),
                     count=int(tau.size), flip_events=flips, exit_time=exit_time)


def first_tau_batch(engine: JumpEngine, K0, rng, max_events=100_000):
    """Run paths until their first τ (sign-flip or |K| exit) and stop.

    This is the online form of :func:`detect_flips` restricted to τ_1, so the
    intervals it returns are never censored by a time horizon.  Returns
    ``(dtau, K_tau, is_flip, events)``; paths still undecided after
    ``max_events`` jumps report ``dtau = nan``.
    """
    K = np.array(K0, dtype=float, copy=True)
    P = K.size
    k_ref = np.abs(K)
    t = np.zeros(P)
    sign = _sign(K)
    run = np.zeros(P, dtype=np.int64)
    cand_t = np.zeros(P)
    dtau = np.full(P, np.nan)
    is_flip = np.zeros(P, dtype=bool)
    events = np.zeros(P, dtype=np.int64)
    rate = engine.noise.total_rate
    active = np.arange(P) if rate > 0 else np.arange(0)
    for _ in range(max_events):
        if not active.size:
            break
        t[active] += rng.exponential(1.0 / rate, active.size)
        v, n = engine.sample(K[active], rng)
        K[active] += v + n
        events[active] += 1
        s_new = _sign(K[active])
        change = s_new != sign[active]
        confirmed = ~change & (run[active] % 2 == 1)
        a = np.abs(K[active])
        exit_ = (a < 0.5 * k_ref[active]) | (a > 1.5 * k_ref[active])
        # a confirmed flip happened at an earlier time than any exit now
        dtau[active[confirmed]] = cand_t[active[confirmed]]
        is_flip[active[confirmed]] = True
        ex = exit_ & ~confirmed
        dtau[active[ex]] = t[active[ex]]
        run[active] = np.where(change, run[active] + 1, 0)
        cand_t[active] = np.where(change, t[active], cand_t[active])
        sign[active] = s_new
        active = active[~(confirmed | ex)]
    return dtau, np.abs(np.asarray(K0, dtype=float)), is_flip, events


# ---------------------------------------------------------------------------
# torus marginal
# ---------------------------------------------------------------------------

def torus_law(noise: NoiseModel, f0, t, dt=0.01):
    """Integrate d/dt f = -ℛ f + ∫ J_𝕋(φ, φ') f(φ') dφ' on a uniform torus grid.

    ``f0`` is a probability vector on the grid ``φ_i = -1/2 + i/len(f0)``.
    The wrapped kernel is applied as a circular convolution (FFT) and the
    time stepping is classical RK4.
    """
    f = np.asarray(f0, dtype=float)
    G = f.size
    h = 1.0 / G
    rate = noise.total_rate
    if rate == 0 or t == 0:
        return f.copy()
    d = h * np.arange(G)
    d = np.where(d >= 0.5, d - 1.0, d)
    reach = int(np.ceil(noise.reach)) + 1
    wrapped = sum(noise.density(d + k) for k in range(-reach, reach + 1)) * h
    wrapped *= rate / wrapped.sum()
    kern = np.fft.rfft(wrapped)

    def rhs(g):
        return -rate * g + np.fft.irfft(kern * np.fft.rfft(g), n=G)

    steps = max(int(np.ceil(t / dt)), 1)
    tau = t / steps
    for _ in range(steps):
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * tau * k1)
        k3 = rhs(f + 0.5 * tau * k2)
        k4 = rhs(f + tau * k3)
        f = f + tau / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return f


def torus_marginal_check(K_t, noise: NoiseModel, phi0, t, grid=512, bins=32, n_boot=200, seed=0):
    """Total-variation distance between the law of K_t mod 1 and the torus equation.

    ``phi0`` is either a point in [-1/2, 1/2) or ``"uniform"``.  Returns a dict
    with the distance on ``bins`` equal bins, its bootstrap SE and the
    sample size.
    """
    K_t = np.asarray(K_t, dtype=float)
    if K_t.size < 1000:
        raise ValueError("torus_marginal_check needs at least 1000 paths")
    if isinstance(phi0, str):
        f0 = np.full(grid, 1.0 / grid)
    else:
        f0 = np.zeros(grid)
        f0[int(np.floor((phi0 + 0.5) * grid)) % grid] = 1.0
    f = torus_law(noise, f0, t)
    exact = f.reshape(bins, grid // bins).sum(axis=1)
    # the point mass sits at the left edge of its grid cell; shift samples the same way
    phi = np.mod(K_t + 0.5, 1.0)
    if not isinstance(phi0, str):
        offset = (phi0 + 0.5) * grid - np.floor((phi0 + 0.5) * grid)
        phi = np.mod(phi - offset / grid, 1.0)
    counts = np.bincount(np.minimum((phi * bins).astype(int), bins - 1), minlength=bins)
    emp = counts / K_t.size
    tv = 0.5 * np.abs(emp - exact).sum()
    rng = np.random.default_rng(seed)
    boot = rng.multinomial(K_t.size, emp, size=n_boot) / K_t.size
    se = float(np.std(0.5 * np.abs(boot - exact).sum(axis=1)))
    return {"tv": float(tv), "se": se, "n": int(K_t.size), "bins": bins}
