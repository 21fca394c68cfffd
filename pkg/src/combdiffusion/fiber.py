"""Off-diagonal fiber densities f^(k)(p) and their jump semigroups on a momentum grid.

Three generators act on ``f``:

* ``quantum``:   -i (E(p-k) - E(p+k)) / λ^ϱ · f - ℛ f + ∫ J_k(p, p') f(p') dp'
* ``classical``: +i 4kp / λ^ϱ · f - ℛ f + ∫ J(p, p') f(p') dp'
* ``hybrid``:    the quantum drift with the classical jumps

with ``J_k(p, p') = Σ_n j(v) κ_v(p'-k, n) conj(κ_v(p'+k, n))``, ``v = p - p' - n``
and ``J = J_0``.

Discretization.  Grid points sit at half-integer multiples of ``h`` around
the centre and ``1/h`` is an integer, so every kick node ``v = l·h`` and every
lattice shift ``n`` maps grid points to (extended) grid points, and no grid
point lies on the Bragg lattice when the centre is a multiple of 1/2.  The
channel list for a column is I(p', v) widened by ``width`` wherever the short
list is not accurate (near the lattice or at small |p'|), with the missing
probability placed on n = 0, exactly as in the classical sampler.  The grid
evolution (:func:`evolve`) and the weighted Monte Carlo
(:func:`weighted_unraveling`) share this channel routine, so they estimate the
same discrete object.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bandstructure import CombParams, _alpha, lattice_index, q_of, theta
from .blochkappa import _parity, _pieces
from .errors import StabilityViolation, WeightBlowup
from .noise import NoiseModel, gaussian

__all__ = [
    "MomentumGrid",
    "FiberDensity",
    "GeneratorSpec",
    "build_generator",
    "evolve",
    "char_value",
    "weighted_unraveling",
    "compare_semigroups",
    "gaussian_density",
]

KINDS = ("quantum", "classical", "hybrid")
WEIGHT_CAP = 1e3


@dataclass(frozen=True)
class MomentumGrid:
    center: float
    half_width: float
    h: float = 0.01

    def __post_init__(self):
        if not 0 < self.h <= 0.01 + 1e-15:
            raise ValueError("grid spacing must satisfy 0 < h <= 0.01")
        inv = 1.0 / self.h
        if abs(inv - round(inv)) > 1e-9:
            raise ValueError("1/h must be an integer so lattice shifts stay on the grid")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def per_unit(self) -> int:
        return int(round(1.0 / self.h))

    @property
    def N(self) -> int:
        return 2 * int(round(self.half_width / self.h))

    @property
    def points(self):
        return self.center + self.h * (np.arange(self.N) - (self.N - 1) / 2.0)

    def at(self, e):
        """Momentum of extended index ``e`` (index 0 is the first grid point)."""
        return self.points[0] + self.h * np.asarray(e, dtype=float)


@dataclass
class FiberDensity:
    k: float
    grid: MomentumGrid
    values: np.ndarray

    @property
    def mass(self):
        return float(np.sum(np.abs(self.values)) * self.grid.h)


def gaussian_density(grid: MomentumGrid, mean, width, k=0.0):
    """Normalized Gaussian initial data on the grid."""
    f = np.exp(-0.5 * ((grid.points - mean) / width) ** 2)
    f /= f.sum() * grid.h
    return FiberDensity(k=float(k), grid=grid, values=f.astype(complex))


# ---------------------------------------------------------------------------
# channel tables
# ---------------------------------------------------------------------------

class _Tables:
    """Bloch data on the extended grid for the shifts -k, 0, +k."""

    def __init__(self, alpha, grid: MomentumGrid, k, noise: NoiseModel, width):
        self.alpha = alpha
        self.grid = grid
        self.k = float(k)
        self.width = int(width)
        self.v, self.w = noise.nodes(grid.h)
        self.l = np.rint(self.v / grid.h).astype(np.int64)
        self.rate = noise.total_rate
        span = np.max(np.abs(grid.points)) + (np.max(np.abs(self.v)) if self.v.size else 0.0) + self.width + 2.0
        m = grid.per_unit
        lo = int(np.floor((-span - grid.points[0]) / grid.h)) - m
        hi = int(np.ceil((span - grid.points[0]) / grid.h)) + m
        self.e0 = lo
        self.ext = np.arange(lo, hi + 1)
        p = grid.at(self.ext)
        self.shifts = {}
        for s in {-self.k, 0.0, self.k}:
            ps = p + s
            if alpha == 0.0:
                self.shifts[s] = (ps, None)
                continue
            _, a1, a2, r, T = _pieces(alpha, ps)
            self.shifts[s] = (np.asarray(q_of(alpha, ps)), (a1, a2, r, T))

    def q(self, shift, e):
        return self.shifts[shift][0][np.asarray(e) - self.e0]

    def kappa(self, shift, e_src, e_dst, n):
        """κ_v(p_src + shift, n) with v implied by e_dst = e_src + l + n/h."""
        if self.alpha == 0.0:
            return (np.asarray(n) == 0).astype(complex) + 0.0 * e_src
        a1, a2, r, T = (x[e_src - self.e0] for x in self.shifts[shift][1])
        c1, c2, rp, Tp = (x[e_dst - self.e0] for x in self.shifts[shift][1])
        b1 = c1 + n
        b2 = c2 + n
        body = (np.sinc(a1 - b1) - r * np.sinc(a2 - b1)
                - rp * np.sinc(a1 - b2) + r * rp * np.sinc(a2 - b2))
        return np.exp(1j * np.pi * (a1 - c1)) * _parity(n) * np.pi**2 * body / np.sqrt(T * Tp)

    def channels(self, e_src, l, shifts):
        """Candidate offsets and κ rows for source indices ``e_src`` and node offsets ``l``.

        Returns ``(n, e_dst, kap)`` with ``kap[s]`` of shape ``(P, C)``; column 0
        is n = 0 and carries the residual ``1 - Σ|κ|²`` (for a product over two
        shifts the residual entry is the geometric mean of the two residuals).
        """
        e_src = np.asarray(e_src, dtype=np.int64)
        l = np.broadcast_to(np.asarray(l, dtype=np.int64), e_src.shape)
        h = self.grid.h
        m = self.grid.per_unit
        p = self.grid.at(e_src)
        v = l * h
        n0 = lattice_index(p)
        n1 = lattice_index(p + v)
        centers = np.stack([np.zeros_like(n0), -n0, -n1, n0 - n1], axis=1)
        near = (np.abs(p) <= 5.0) | (np.abs(theta(p)) <= 0.02) | (np.abs(theta(p + v)) <= 0.02)
        W = self.width if near.any() else 0
        offs = np.arange(-W, W + 1)
        cand = (centers[:, :, None] + offs[None, None, :]).reshape(len(p), -1)
        if W:
            # rows away from the lattice keep only I(p, v): blank the widened entries
            keep_short = np.zeros(cand.shape[1], dtype=bool)
            keep_short[W::2 * W + 1] = True
            cand = np.where(near[:, None] | keep_short[None, :], cand, 0)
        cand = np.sort(cand, axis=1)
        dup = np.zeros(cand.shape, dtype=bool)
        dup[:, 1:] = cand[:, 1:] == cand[:, :-1]
        order = np.argsort(cand != 0, axis=1, kind="stable")
        cand = np.take_along_axis(cand, order, axis=1)
        dup = np.take_along_axis(dup, order, axis=1)
        e_dst = e_src[:, None] + l[:, None] + cand * m
        kap = {}
        resid = {}
        for s in shifts:
            ks = self.kappa(s, e_src[:, None], e_dst, cand)
            ks = np.where(dup, 0.0, ks)
            resid[s] = np.clip(1.0 - np.sum(np.abs(ks) ** 2, axis=1), 0.0, None)
            kap[s] = ks
        return cand, e_dst, kap, resid


def _product(kap, resid, s_minus, s_plus):
    """κ(p'-k) conj κ(p'+k) per channel with the residual on n = 0."""
    prod = kap[s_minus] * np.conj(kap[s_plus])
    prod[:, 0] += np.sqrt(resid[s_minus] * resid[s_plus])
    return prod


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

@dataclass
class GeneratorSpec:
    kind: str
    k: float
    lam: float
    varrho: float
    grid: MomentumGrid
    drift: np.ndarray       # multiplier d(p), generator = d - ℛ + A
    jumps: np.ndarray       # dense A[i, j] = h·J(p_i, p_j)
    rate: float


def _drift(kind, tables: _Tables, k, scale):
    e = np.arange(tables.grid.N)
    if kind == "classical":
        return 1j * 4.0 * k * tables.grid.points / scale
    qm = tables.q(-k, e)
    qp = tables.q(k, e)
    return -1j * (qm**2 - qp**2) / scale


def _assemble(tables: _Tables, s_minus, s_plus):
    N = tables.grid.N
    src = np.arange(N)
    re = np.zeros(N * N)
    im = np.zeros(N * N)
    shifts = {s_minus, s_plus}
    for l, w in zip(tables.l, tables.w):
        cand, e_dst, kap, resid = tables.channels(src, np.full(N, l), shifts)
        val = w * _product(kap, resid, s_minus, s_plus)
        ok = (e_dst >= 0) & (e_dst < N)
        flat = (e_dst * N + src[:, None])[ok]
        re += np.bincount(flat, weights=val.real[ok], minlength=N * N)
        im += np.bincount(flat, weights=val.imag[ok], minlength=N * N)
    return (re + 1j * im).reshape(N, N)


def build_generator(kind, k, lam, varrho, grid: MomentumGrid, noise: NoiseModel = None,
                    comb=CombParams(), width=4, zero_jumps=False) -> GeneratorSpec:
    """Assemble the drift multiplier and dense jump matrix for ``kind``.

    ``zero_jumps`` removes the kernel and the -ℛ term (pure phase evolution).
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    noise = noise if noise is not None else gaussian()
    alpha = _alpha(comb)
    tables = _Tables(alpha, grid, k, noise, width)
    scale = lam**varrho
    drift = _drift(kind, tables, k, scale)
    if zero_jumps:
        return GeneratorSpec(kind, k, lam, varrho, grid, drift, np.zeros((grid.N, grid.N), dtype=complex), 0.0)
    if kind == "quantum":
        A = _assemble(tables, -float(k), float(k))
    else:
        A = _assemble(tables, 0.0, 0.0)
    return GeneratorSpec(kind, float(k), lam, varrho, grid, drift, A, tables.rate)


def evolve(f0: FiberDensity, spec: GeneratorSpec, t, dt=0.05, order=5) -> FiberDensity:
    """Strang splitting: exact half-step drift phases around a jump step.

    The jump step applies e^{-ℛΔt} Σ_{j<=order} (ΔtA)^j / j!.
    """
    if spec.rate * dt > 0.1 + 1e-12:
        raise StabilityViolation(f"dt*R = {spec.rate * dt:.3f} exceeds 0.1")
    steps = max(int(np.ceil(t / dt - 1e-12)), 1) if t > 0 else 0
    tau = t / steps if steps else 0.0
    half = np.exp(0.5 * tau * spec.drift)
    damp = np.exp(-spec.rate * tau)
    f = f0.values.astype(complex).copy()
    A = spec.jumps
    for _ in range(steps):
        f = half * f
        term = f
        acc = f.copy()
        for j in range(1, order + 1):
            term = (tau / j) * (A @ term)
            acc += term
        f = half * (damp * acc)
    return FiberDensity(k=f0.k, grid=f0.grid, values=f)


def char_value(f: FiberDensity) -> complex:
    """∫ f dp (Riemann sum on the midpoint grid)."""
    return complex(np.sum(f.values) * f.grid.h)


# ---------------------------------------------------------------------------
# weighted Monte Carlo
# ---------------------------------------------------------------------------

def weighted_unraveling(kind, k, lam, varrho, t, f0: FiberDensity, n_paths=4000, seed=0,
                        noise: NoiseModel = None, comb=CombParams(), width=4, proposal="auto"):
    """Monte Carlo estimate of ``char_value(evolve(f0))`` on the same discretization.

    Paths start at grid points drawn from |f0|, jump at rate ℛ with v drawn
    from the kick nodes and n from the classical probabilities |κ_v(p', n)|²,
    and carry the exact drift phase plus the per-jump weight
    ``κ_v(p'-k, n) conj κ_v(p'+k, n) / q(n)`` (quantum kind; 1 otherwise).
    With ``proposal="mixture"`` the channel law is the average of the
    classical law and (|κ(p'-k)|² + |κ(p'+k)|²)/2; ``"auto"`` switches to it
    when a classical-proposal weight exceeds 10³.  Returns a dict with the
    estimate, its SE and the proposal used.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    noise = noise if noise is not None else gaussian()
    alpha = _alpha(comb)
    grid = f0.grid
    tables = _Tables(alpha, grid, k, noise, width)
    scale = lam**varrho
    drift = _drift(kind, tables, k, scale)
    props = ("classical", "mixture") if proposal == "auto" else (proposal,)
    for prop in props:
        try:
            est, se = _unravel(kind, tables, drift, f0, t, n_paths, seed, prop)
            return {"value": est, "se": se, "proposal": prop, "n_paths": n_paths}
        except WeightBlowup:
            if prop == props[-1]:
                raise
    raise AssertionError("unreachable")


def _unravel(kind, tables: _Tables, drift, f0, t, n_paths, seed, proposal):
    rng = np.random.default_rng(seed)
    grid = tables.grid
    N = grid.N
    k = tables.k
    absf = np.abs(f0.values)
    norm1 = absf.sum() * grid.h
    start = rng.choice(N, size=n_paths, p=absf / absf.sum())
    weight = f0.values[start] / absf[start] * norm1
    e = start.astype(np.int64)
    time = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    node_p = tables.w / tables.w.sum() if tables.w.size else np.zeros(0)
    rate = tables.rate
    shifts = {0.0, -k, k}
    active = np.arange(n_paths)
    while active.size:
        dt = rng.exponential(1.0 / rate, active.size) if rate > 0 else np.full(active.size, np.inf)
        stop = time[active] + dt >= t
        run = np.where(stop, t - time[active], dt)
        weight[active] *= np.exp(run * drift[e[active]])
        time[active] += run
        go = active[~stop]
        if not go.size:
            break
        l = tables.l[rng.choice(node_p.size, size=go.size, p=node_p)]
        cand, e_dst, kap, resid = tables.channels(e[go], l, shifts)
        prob0 = np.abs(kap[0.0]) ** 2
        prob0[:, 0] += resid[0.0]
        if proposal == "mixture" and kind == "quantum":
            side = 0.5 * (np.abs(kap[-k]) ** 2 + np.abs(kap[k]) ** 2)
            side[:, 0] += 0.5 * (resid[-k] + resid[k])
            prop = 0.5 * (prob0 + side)
        else:
            prop = prob0
        prop = prop / prop.sum(axis=1, keepdims=True)
        u = rng.random(go.size)
        pick = np.minimum((np.cumsum(prop, axis=1) < u[:, None]).sum(axis=1), cand.shape[1] - 1)
        rows = np.arange(go.size)
        if kind == "quantum":
            num = _product(kap, resid, -k, k)[rows, pick]
            w = num / prop[rows, pick]
        else:
            w = prob0[rows, pick] / prop[rows, pick]
        if np.any(np.abs(w) > WEIGHT_CAP):
            raise WeightBlowup(f"jump weight {np.abs(w).max():.2e} exceeds {WEIGHT_CAP:g}")
        weight[go] *= w
        e_new = e_dst[rows, pick]
        off = (e_new < 0) | (e_new >= N)
        alive[go[off]] = False
        e[go] = np.where(off, 0, e_new)
        active = go[~off]
    contrib = np.where(alive, weight, 0.0)
    est = complex(contrib.mean())
    se = float(np.sqrt((np.var(contrib.real) + np.var(contrib.imag)) / n_paths))
    return est, se


def compare_semigroups(k, lam, varrho, t, f0: FiberDensity, noise: NoiseModel = None, comb=CombParams(),
                       dt=0.05, width=4):
    """L¹ distances (quantum vs classical, quantum vs hybrid) after time ``t``."""
    out = {}
    for kind in KINDS:
        spec = build_generator(kind, k, lam, varrho, f0.grid, noise, comb, width)
        out[kind] = evolve(f0, spec, t, dt).values
    h = f0.grid.h
    return (float(np.sum(np.abs(out["quantum"] - out["classical"])) * h),
            float(np.sum(np.abs(out["quantum"] - out["hybrid"])) * h))
