"""Dirac-comb band structure in the extended-zone scheme.

The comb has period 2π and strength ``alpha``.  An extended-zone momentum
``p`` is mapped to a real wavenumber ``q`` solving the Kronig–Penney relation

    cos(2πp) = cos(2πq) + (α / 2q) sin(2πq),

with ``q`` odd in ``p``, increasing on each band, ``|q - p| <= 1/2`` and the
boundary convention ``q(n/2) = n/2``.  The energy is ``E(p) = q(p)**2``.

For ``p > 0`` write ``N = ceil(2p)`` and ``x = πN - 2πp`` in ``[0, π)``.  Then
``q = N/2 - g/(2π)`` where ``g`` in ``[0, x]`` solves

    f_N(g) = -cos(x),   f_N(y) = -cos(y) + απ sin(y) / (πN - y).

All array functions here are vectorized over ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LatticePoint, NonConvergence

__all__ = [
    "CombParams",
    "ZoneInfo",
    "DispersionPoint",
    "SNAP_TOL",
    "theta",
    "lattice_index",
    "quasimomentum",
    "band_index",
    "q_of",
    "energy",
    "kp_residual",
    "solve_q",
    "band_gap",
    "zone_decompose",
    "q_derivatives",
]

SNAP_TOL = 1e-13
_MAX_ITER = 200


@dataclass(frozen=True)
class CombParams:
    """Comb strength.  ``alpha = 0`` is the free particle."""

    alpha: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")


@dataclass(frozen=True)
class ZoneInfo:
    p: float
    theta: float
    n_lat: int
    beta: float
    sign: int


@dataclass(frozen=True)
class DispersionPoint:
    p: float
    q: float
    E: float
    band_index: int
    quasimomentum: float


def _alpha(params) -> float:
    return float(params.alpha if isinstance(params, CombParams) else params)


# ---------------------------------------------------------------------------
# zone bookkeeping
# ---------------------------------------------------------------------------

def theta(p):
    """Θ(p) = p mod 1/2, folded into [-1/4, 1/4)."""
    p = np.asarray(p, dtype=float)
    return np.mod(p + 0.25, 0.5) - 0.25


def lattice_index(p):
    """𝐧(p) = 2(p - Θ(p)) as an integer array."""
    p = np.asarray(p, dtype=float)
    return np.rint(2.0 * (p - theta(p))).astype(np.int64)


def quasimomentum(p):
    """φ = p mod 1 in [-1/2, 1/2)."""
    p = np.asarray(p, dtype=float)
    return np.mod(p + 0.5, 1.0) - 0.5


def band_index(p):
    """Zero-based band of the extended-zone label ``p``.

    Band ``N`` holds ``N/2 < |p| <= (N+1)/2``; the Bragg point itself belongs to
    the inner band, matching the continuity of ``q`` toward the origin.
    """
    a = np.abs(np.asarray(p, dtype=float))
    return np.maximum(np.ceil(2.0 * a).astype(np.int64) - 1, 0)


def zone_decompose(p) -> ZoneInfo:
    p = float(p)
    th = float(theta(p))
    n = int(lattice_index(p))
    return ZoneInfo(p=p, theta=th, n_lat=n, beta=0.5 * n * th, sign=1 if p >= 0 else -1)


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------

def _snap(p):
    """Move inputs within SNAP_TOL of the half-integer lattice onto it."""
    half = np.rint(2.0 * p) / 2.0
    return np.where(np.abs(p - half) < SNAP_TOL, half, p)


def _solve_g(alpha, N, x, tol):
    """Solve f_N(g) = -cos(x) for g in [0, x] by safeguarded Newton.

    The residual is written as ``cos x - cos g + υ sin g / (πN - g)`` with the
    cosine difference in product form so that ``x - g`` keeps full relative
    accuracy when it is small.
    """
    ups = alpha * np.pi
    piN = np.pi * N
    lo = np.zeros_like(x)
    hi = x.copy()
    # first-order mid-band estimate x - g ≈ υ/(πN - x)
    g = np.clip(x - ups / (piN - x), 0.0, x)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        gi, xi, lo_i, hi_i, pN = g[active], x[active], lo[active], hi[active], piN[active]
        d = pN - gi
        F = -2.0 * np.sin(0.5 * (xi + gi)) * np.sin(0.5 * (xi - gi)) + ups * np.sin(gi) / d
        dF = np.sin(gi) + ups * (np.cos(gi) * d + np.sin(gi)) / d**2
        pos = F > 0
        hi_i = np.where(pos, gi, hi_i)
        lo_i = np.where(pos, lo_i, gi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = F / dF
        gn = gi - step
        bad = ~np.isfinite(gn) | (gn < lo_i) | (gn > hi_i)
        gn = np.where(bad, 0.5 * (lo_i + hi_i), gn)
        done = (~bad & (np.abs(step) <= tol)) | (hi_i - lo_i <= tol)
        g[active], lo[active], hi[active] = gn, lo_i, hi_i
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            return g
    raise NonConvergence(f"Kronig-Penney solve did not converge for {active.sum()} inputs")


def q_of(params, p, tol: float = 1e-14):
    """Vectorized 𝐪(p).  Returns a float array of the same shape as ``p``."""
    alpha = _alpha(params)
    p0 = np.asarray(p, dtype=float)
    p = _snap(np.atleast_1d(p0))
    if alpha == 0.0:
        return p.reshape(p0.shape).copy() if p0.ndim else float(p[0])
    a = np.abs(p)
    out = a.copy()
    inner = (a > 0) & (np.abs(a - np.rint(2.0 * a) / 2.0) > 0)
    if inner.any():
        ai = a[inner]
        N = np.ceil(2.0 * ai)
        x = np.pi * N - 2.0 * np.pi * ai
        g = _solve_g(alpha, N, x, tol)
        out[inner] = ai + (x - g) / (2.0 * np.pi)
    out = np.sign(p) * out
    return out.reshape(p0.shape) if p0.ndim else float(out[0])


def energy(params, p):
    """E(p) = 𝐪(p)²."""
    return np.square(q_of(params, p))


def kp_residual(params, p, q):
    """|cos 2πp - cos 2πq - (α/2q) sin 2πq|, with the α-term dropped at q = 0."""
    alpha = _alpha(params)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(q != 0, alpha / (2.0 * q) * np.sin(2.0 * np.pi * q), 0.0)
    return np.abs(np.cos(2.0 * np.pi * p) - np.cos(2.0 * np.pi * q) - term)


def solve_q(params, p: float, tol: float = 1e-12) -> DispersionPoint:
    """Scalar dispersion point with its band label.

    ``tol`` bounds the Kronig–Penney residual; the internal root tolerance is
    tighter, so the bound is checked rather than iterated on.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not np.isfinite(p):
        raise ValueError("p must be finite")
    p = float(_snap(np.asarray(float(p))))
    q = float(q_of(params, p))
    res = float(kp_residual(params, p, q))
    if 2.0 * p != np.rint(2.0 * p) and res > tol:
        raise NonConvergence(f"residual {res:.3e} exceeds tol {tol:.1e} at p={p}")
    return DispersionPoint(p=p, q=q, E=q * q, band_index=int(band_index(p)),
                           quasimomentum=float(quasimomentum(p)))


def band_gap(params, n: int, eps: float = 1e-9) -> float:
    """g_n = |E(n/2+) - E(n/2-)| from one-sided evaluations at n/2 ± eps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if _alpha(params) == 0.0:
        return 0.0
    e = energy(params, np.array([0.5 * n - eps, 0.5 * n + eps]))
    return float(abs(e[1] - e[0]))


def _g_derivatives(alpha, N, x, g):
    """g_N'(x) and g_N''(x) from implicit differentiation of f_N(g) = -cos x."""
    ups = alpha * np.pi
    d = np.pi * N - g
    s, c = np.sin(g), np.cos(g)
    f1 = s + ups * (c * d + s) / d**2
    f2 = c + ups * (-s / d + 2.0 * c / d**2 + 2.0 * s / d**3)
    g1 = np.sin(x) / f1
    g2 = (np.cos(x) - f2 * g1**2) / f1
    return g1, g2


def q_derivatives(params, p):
    """(𝐪'(p), 𝐪''(p)) away from the half-integer lattice.

    Uses q = N/2 - g_N(x)/(2π) with x = πN - 2πp, so q' = g_N'(x) and
    q'' = -2π g_N''(x); odd symmetry of q gives the p < 0 branch.
    """
    alpha = _alpha(params)
    p = float(p)
    if abs(2.0 * p - round(2.0 * p)) < 2e-9:
        raise LatticePoint(f"q derivatives undefined at the band edge p={p}")
    if alpha == 0.0:
        return 1.0, 0.0
    a = abs(p)
    N = float(np.ceil(2.0 * a))
    x = np.pi * N - 2.0 * np.pi * a
    g = x - 2.0 * np.pi * (float(q_of(alpha, a)) - a)
    g1, g2 = _g_derivatives(alpha, N, x, g)
    q1 = float(g1)
    q2 = float(-2.0 * np.pi * g2)
    return q1, (q2 if p > 0 else -q2)
