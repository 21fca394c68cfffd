"""Bloch functions, plane-wave coefficients η(p, m) and kick overlaps κ_v(p, n).

Conventions
-----------
The extended-zone eigenket is ``|p>_Q = Σ_m η(p, m) |p + m>`` with

    η(p, m) = -i N_p^{-1/2} (e^{i2π(q-p)} - 1) (1/(q+p+m) + 1/(q-p-m)).

Writing ``a1 = q - p``, ``a2 = -(q + p)``, ``s_i = sin(π a_i)`` and
``r = s1/s2`` this becomes

    η(p, m) = e^{iπ a1} T^{-1/2} (-1)^m π [sinc(a1 - m) - r sinc(a2 - m)],
    T = π² (1 + r² - 2 r sinc(a1 - a2)),

where ``sinc`` is numpy's normalized sinc and the normalization is exact (the
lattice sums are done with Σ_m 1/((a-m)(b-m)) = π² sinc(a-b) / (sin πa sin πb)).
The same identity gives κ_v(p, n) = Σ_m conj(η(p+v+n, m-n)) η(p, m) in closed
form, which is what the Monte Carlo code uses.  The truncated double sum
(:func:`kappa_sum`) and the cell quadrature (:func:`kappa_quad`) are the
slower reference evaluations.

Exactly on the half-integer lattice the coefficients are 0/0; those inputs are
moved by ``EDGE_NUDGE`` toward the origin, which is the side ``q`` is
continuous from.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .bandstructure import _alpha, energy, lattice_index, q_of, theta
from .errors import QuadratureFailure, TruncationInsufficient

__all__ = [
    "EtaRow",
    "KappaRow",
    "BlochEval",
    "EDGE_NUDGE",
    "eta_coeffs",
    "eta_values",
    "bloch_eval",
    "bloch_norm_closed",
    "bloch_distance",
    "kappa_closed",
    "kappa_sum",
    "kappa_row",
    "kappa_quad",
    "iset",
    "variance_check",
]

EDGE_NUDGE = 1e-9
TAIL_LIMIT = 1e-4
M_CAP = 512


@dataclass(frozen=True)
class EtaRow:
    p: float
    M: int
    eta: np.ndarray
    tail_mass: float

    @property
    def m(self):
        return np.arange(-self.M, self.M + 1)


@dataclass(frozen=True)
class KappaRow:
    p: float
    v: float
    M: int
    kappa: np.ndarray
    tail_mass: float

    @property
    def n(self):
        return np.arange(-self.M, self.M + 1)

    def probabilities(self):
        """|κ|² clipped at zero with the truncation residual placed on n = 0."""
        prob = np.clip(np.abs(self.kappa) ** 2, 0.0, None)
        prob[self.M] += max(1.0 - prob.sum(), 0.0)
        return prob / prob.sum()


@dataclass(frozen=True)
class BlochEval:
    p: float
    grid: np.ndarray
    values: np.ndarray
    norm: float


def _on_lattice(p, tol=1e-12):
    p = np.asarray(p, dtype=float)
    return np.abs(2.0 * p - np.rint(2.0 * p)) < 2.0 * tol


def _nudge(alpha, p):
    """Move (near-)lattice points off the lattice, toward the origin."""
    p = np.asarray(p, dtype=float)
    if alpha == 0.0:
        return p
    on = _on_lattice(p)
    if not np.any(on):
        return p
    edge = np.rint(2.0 * p) / 2.0
    step = np.where(edge > 0, -EDGE_NUDGE, EDGE_NUDGE)
    return np.where(on, edge + step, p)


def _fiber_nudge(alpha, p, v):
    """Shift ``v`` so that the kicked fiber p + v avoids the lattice.

    All targets p + v + n share one fiber, so they must move together; a
    per-target nudge would mix two different fibers.
    """
    p = _nudge(alpha, p)
    v = np.asarray(v, dtype=float)
    if alpha == 0.0:
        return p, v
    on = _on_lattice(p + v)
    return p, np.where(on, v + EDGE_NUDGE, v)


def _pieces(alpha, p):
    """(p_eff, a1, a2, r, T) describing η(p, ·) in sinc form."""
    p = _nudge(alpha, p)
    q = np.asarray(q_of(alpha, p), dtype=float)
    a1 = q - p
    a2 = -(q + p)
    s1 = np.sin(np.pi * a1)
    s2 = np.sin(np.pi * a2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(s1 == 0.0, 0.0, s1 / s2)
    T = np.pi**2 * (1.0 + r * r - 2.0 * r * np.sinc(a1 - a2))
    return p, a1, a2, r, T


def _parity(n):
    return 1.0 - 2.0 * (np.asarray(n, dtype=np.int64) & 1)


def eta_values(params, p, m):
    """η(p, m) from the closed form, broadcasting ``p`` against ``m``."""
    alpha = _alpha(params)
    p = np.asarray(p, dtype=float)
    m = np.asarray(m)
    if alpha == 0.0:
        return (np.broadcast_to(m, np.broadcast(p, m).shape) == 0).astype(complex)
    _, a1, a2, r, T = _pieces(alpha, p)
    body = np.sinc(a1 - m) - r * np.sinc(a2 - m)
    return np.exp(1j * np.pi * a1) / np.sqrt(T) * _parity(m) * np.pi * body


def eta_coeffs(params, p, M: int = 64) -> EtaRow:
    """Truncated, renormalized η row over m in [-M, M]."""
    if M < 8:
        raise ValueError("M must be >= 8")
    m = np.arange(-M, M + 1)
    eta = eta_values(params, float(p), m)
    kept = float(np.sum(np.abs(eta) ** 2))
    tail = max(1.0 - kept, 0.0)
    if tail > TAIL_LIMIT:
        raise TruncationInsufficient(f"eta tail mass {tail:.2e} at p={p}, M={M}", tail)
    return EtaRow(p=float(p), M=M, eta=eta / np.sqrt(kept), tail_mass=tail)


# ---------------------------------------------------------------------------
# Bloch functions on the cell
# ---------------------------------------------------------------------------

def _bloch_unnormalized(alpha, p, x):
    """Closed-form Bloch function on [-π, π) before normalization."""
    p = float(_nudge(alpha, p))
    q = float(q_of(alpha, p))
    x = np.asarray(x, dtype=float)
    d = np.exp(2j * np.pi * (q - p))
    if alpha == 0.0:
        return np.exp(1j * p * x), p, q
    left = (d - 1.0) / (np.exp(2j * np.pi * (q + p)) - 1.0) * np.exp(-1j * q * x) + d * np.exp(1j * q * x)
    right = (d - 1.0) / (1.0 - np.exp(-2j * np.pi * (q + p))) * np.exp(-1j * q * x) + np.exp(1j * q * x)
    return np.where(x < 0, left, right), p, q


def bloch_norm_closed(params, p):
    """Closed-form cell norm of the unnormalized Bloch function.

    Uses the identity ∫|u|² = 2π Σ_m |coefficient_m|² and the exact lattice
    sum behind :func:`eta_values`; it is the cross-check for the quadrature
    norm computed in :func:`bloch_eval`.
    """
    alpha = _alpha(params)
    if alpha == 0.0:
        return 2.0 * np.pi
    _, a1, a2, r, T = _pieces(alpha, float(p))
    # Σ_m (1/(a1-m) - 1/(a2-m))² = T / s1² and |e^{i2πa1} - 1|² = 4 s1²
    return float(2.0 * T / np.pi)


def _cell_norm(alpha, p):
    def dens(x):
        u, _, _ = _bloch_unnormalized(alpha, p, x)
        return float(np.abs(u) ** 2)

    left = integrate.quad(dens, -np.pi, 0.0, epsabs=1e-13, epsrel=1e-13, limit=400)[0]
    right = integrate.quad(dens, 0.0, np.pi, epsabs=1e-13, epsrel=1e-13, limit=400)[0]
    return left + right


def bloch_eval(params, p, grid) -> BlochEval:
    """Normalized Bloch function ψ̃_p on a grid inside [-π, π)."""
    alpha = _alpha(params)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < -np.pi) or np.any(grid >= np.pi):
        raise ValueError("grid must lie in [-pi, pi)")
    u, _, _ = _bloch_unnormalized(alpha, p, grid)
    norm = _cell_norm(alpha, p)
    return BlochEval(p=float(p), grid=grid, values=u / np.sqrt(norm), norm=norm)


def _complex_quad(f, a, b, epsabs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            re, ere = integrate.quad(lambda x: f(x).real, a, b, epsabs=epsabs, epsrel=0, limit=500)
            im, eim = integrate.quad(lambda x: f(x).imag, a, b, epsabs=epsabs, epsrel=0, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(str(exc)) from exc
    return complex(re, im)


def _cell_inner(f, epsabs=1e-11):
    """∫_{-π}^{π} f with the panel split at the comb site."""
    return _complex_quad(f, -np.pi, 0.0, epsabs) + _complex_quad(f, 0.0, np.pi, epsabs)


def bloch_distance(params, p) -> float:
    """‖ψ_p - ψ̃_p‖₂ over the cell, with ψ_p the normalized plane wave."""
    alpha = _alpha(params)
    if alpha == 0.0:
        return 0.0
    norm = _cell_norm(alpha, p)
    pe = float(_nudge(alpha, p))

    def diff2(x):
        u, _, _ = _bloch_unnormalized(alpha, p, x)
        return np.abs(np.exp(1j * pe * x) / np.sqrt(2 * np.pi) - u / np.sqrt(norm)) ** 2

    val = _cell_inner(lambda x: np.asarray(diff2(x), dtype=complex)).real
    return float(np.sqrt(max(val, 0.0)))


# ---------------------------------------------------------------------------
# κ coefficients
# ---------------------------------------------------------------------------

def kappa_closed(params, p, v, n):
    """Exact κ_v(p, n) for broadcastable ``p``, ``v``, ``n`` (n integer)."""
    alpha = _alpha(params)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=np.int64)
    if alpha == 0.0:
        return (np.broadcast_to(n, np.broadcast(p, v, n).shape) == 0).astype(complex)
    p, v = _fiber_nudge(alpha, p, v)
    _, a1, a2, r, T = _pieces(alpha, p)
    _, c1, c2, rp, Tp = _pieces(alpha, p + v + n)
    b1 = c1 + n
    b2 = c2 + n
    body = (np.sinc(a1 - b1) - r * np.sinc(a2 - b1)
            - rp * np.sinc(a1 - b2) + r * rp * np.sinc(a2 - b2))
    phase = np.exp(1j * np.pi * (a1 - c1))
    return phase * _parity(n) * np.pi**2 * body / np.sqrt(T * Tp)


def kappa_row(params, p, v, n):
    """|κ_v(p, n)|² for an explicit integer array ``n`` (exact, no truncation)."""
    return np.abs(kappa_closed(params, p, v, n)) ** 2


def kappa_sum(params, p, v, M: int = 64, adaptive: bool = True) -> KappaRow:
    """κ_v(p, n), n in [-M, M], by the truncated double sum over η rows.

    With ``adaptive`` the half-width doubles until the missing mass drops
    below 1e-12 or ``M`` reaches 512; the final row must satisfy the 1e-4
    tail limit or :class:`TruncationInsufficient` is raised.
    """
    if M < 8:
        raise ValueError("M must be >= 8")
    alpha = _alpha(params)
    p, v = (float(x) for x in _fiber_nudge(alpha, float(p), float(v)))
    while True:
        m = np.arange(-M, M + 1)
        eta_p = eta_values(alpha, p, m)
        eta_p /= np.sqrt(np.sum(np.abs(eta_p) ** 2))
        targets = p + v + m  # p + v + n for n = m
        rows = eta_values(alpha, targets[:, None], m[None, :])
        rows /= np.sqrt(np.sum(np.abs(rows) ** 2, axis=1, keepdims=True))
        # κ(n) = Σ_m conj(η(p+v+n, m-n)) η(p, m); index j = m - n in [-M, M]
        kappa = np.empty(2 * M + 1, dtype=complex)
        for i, n in enumerate(m):
            lo = max(-M, -M + n)
            hi = min(M, M + n)
            mm = np.arange(lo, hi + 1)
            kappa[i] = np.sum(np.conj(rows[i, mm - n + M]) * eta_p[mm + M])
        tail = abs(1.0 - float(np.sum(np.abs(kappa) ** 2)))
        if tail < 1e-12 or not adaptive or 2 * M > M_CAP:
            break
        M *= 2
    if tail > TAIL_LIMIT:
        raise TruncationInsufficient(f"kappa tail mass {tail:.2e} at p={p}, v={v}", tail)
    return KappaRow(p=p, v=v, M=M, kappa=kappa, tail_mass=tail)


def kappa_quad(params, p, v, n, epsabs: float = 1e-11) -> complex:
    """κ_v(p, n) = <ψ̃_{p+v+n} | e^{ivx} ψ̃_p> by adaptive cell quadrature."""
    alpha = _alpha(params)
    p, v = (float(x) for x in _fiber_nudge(alpha, float(p), float(v)))
    pn = p + v + int(n)
    norm_a = _cell_norm(alpha, p)
    norm_b = _cell_norm(alpha, pn)

    def integrand(x):
        ua, _, _ = _bloch_unnormalized(alpha, p, x)
        ub, _, _ = _bloch_unnormalized(alpha, pn, x)
        return np.conj(ub) * np.exp(1j * v * x) * ua

    return _cell_inner(integrand, epsabs) / np.sqrt(norm_a * norm_b)


def iset(p, v):
    """I(p, v) = {0, -𝐧(p), -𝐧(p+v), 𝐧(p) - 𝐧(p+v)} as a sorted tuple."""
    n0 = int(lattice_index(p))
    n1 = int(lattice_index(p + v))
    return tuple(sorted({0, -n0, -n1, n0 - n1}))


def iset_array(p, v):
    """Vectorized I(p, v) as an (..., 4) integer array (entries may repeat)."""
    n0 = lattice_index(p)
    n1 = lattice_index(np.asarray(p) + np.asarray(v))
    zero = np.zeros_like(n0 + n1)
    return np.stack([zero, -n0 + zero, -n1 + zero, n0 - n1], axis=-1)


def variance_check(params, p, v, M: int = 64) -> float:
    """|κ|²-weighted variance of E^{1/2}(p+v+n) over the diffraction channel n.

    The value is bounded by v² up to truncation.  ``M`` sets the half-width of
    the channel window around each element of I(p, v); the exact closed-form
    κ is used so the only truncation is the window itself.
    """
    alpha = _alpha(params)
    p, v = (float(x) for x in _fiber_nudge(alpha, float(p), float(v)))
    centers = np.array(iset(p, v))
    n = np.unique((centers[:, None] + np.arange(-M, M + 1)[None, :]).ravel())
    w = kappa_row(alpha, p, v, n)
    w = w / w.sum()
    root_e = np.sqrt(energy(alpha, p + v + n))
    mean = np.sum(w * root_e)
    return float(np.sum(w * (root_e - mean) ** 2))
