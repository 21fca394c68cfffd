"""Pure-state unraveling inside one quasimomentum fiber.

A :class:`FiberWavefunction` holds amplitudes on the plane waves
``φ + center + m`` for ``m`` in ``[-M, M]``.  Between noise events the state
evolves by ``exp(-i t H / λ^ϱ)``, applied exactly in the extended-zone
eigenbasis; a noise event multiplies by ``e^{ivX}``, which only relabels the
fiber.

The change of basis on the window is the matrix ``U[m, m'] = η(φ+c+m', m-m')``.
Truncation makes it slightly non-unitary at the window edges, so the orthogonal
polar factor of ``U`` (from its SVD) is used instead; it agrees with ``U`` on
interior rows to the truncation error and keeps flights exactly unitary.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import signal

from .bandstructure import CombParams, _alpha, band_gap, energy, quasimomentum
from .blochkappa import eta_values
from .errors import WindowOverflow
from .noise import NoiseModel, gaussian

__all__ = [
    "FiberWavefunction",
    "UnravelingConfig",
    "plane_wave",
    "eigenstate",
    "fiber_basis",
    "to_qbasis",
    "from_qbasis",
    "free_flight",
    "kick",
    "levy_trajectory",
    "adiabatic_populations",
    "momentum_expectation",
    "pendellosung_probe",
    "pendellosung_period",
    "reflection_band_width",
]

M_DEFAULT = 48
EDGE_GUARD = 1e-6
OVERFLOW_MASS = 1e-3
RECENTER_SHIFT = 4


@dataclass
class FiberWavefunction:
    phi: float
    center: int
    amps: np.ndarray
    M: int
    leaked_mass: float = 0.0
    alpha: float = 1.0

    @property
    def m(self):
        return np.arange(-self.M, self.M + 1)

    @property
    def momenta(self):
        return self.phi + self.center + self.m

    @property
    def norm2(self):
        return float(np.sum(np.abs(self.amps) ** 2))

    def copy(self):
        return replace(self, amps=self.amps.copy())


def _split(p):
    phi = float(quasimomentum(p))
    return phi, int(round(p - phi))


def plane_wave(p, M=M_DEFAULT, params=CombParams()):
    """The plane wave |p> as a fiber state."""
    if M < 16:
        raise ValueError("M must be >= 16")
    phi, c = _split(float(p))
    amps = np.zeros(2 * M + 1, dtype=complex)
    amps[M] = 1.0
    return FiberWavefunction(phi=phi, center=c, amps=amps, M=M, alpha=_alpha(params))


def eigenstate(p, M=M_DEFAULT, params=CombParams()):
    """The extended-zone eigenket |p>_Q expressed on the window centred at p."""
    psi = plane_wave(p, M, params)
    b = np.zeros(2 * M + 1, dtype=complex)
    b[M] = 1.0
    psi.amps = from_qbasis(psi, b)
    return psi


@lru_cache(maxsize=256)
def _basis_cached(alpha, phi, center, M):
    m = np.arange(-M, M + 1)
    labels = _guard(alpha, phi) + center + m
    if alpha == 0.0:
        return np.eye(2 * M + 1, dtype=complex), labels, energy(alpha, labels)
    U = eta_values(alpha, labels[None, :], m[:, None] - m[None, :])
    W, _, Vh = np.linalg.svd(U)
    return W @ Vh, labels, energy(alpha, labels)


def _guard(alpha, phi):
    """A fiber on the Bragg lattice (φ = 0 or -1/2) is moved by -EDGE_GUARD as a whole.

    Shifting single labels instead would mix two fibers.
    """
    if alpha != 0.0 and abs(2.0 * phi - round(2.0 * phi)) < 2.0 * EDGE_GUARD:
        return round(2.0 * phi) / 2.0 - EDGE_GUARD
    return phi


def fiber_basis(psi: FiberWavefunction):
    """(U, labels, energies) for the window of ``psi``; U is exactly unitary."""
    return _basis_cached(psi.alpha, round(psi.phi, 15), psi.center, psi.M)


def to_qbasis(psi: FiberWavefunction):
    U, _, _ = fiber_basis(psi)
    return U.conj().T @ psi.amps


def from_qbasis(psi: FiberWavefunction, b):
    U, _, _ = fiber_basis(psi)
    return U @ np.asarray(b, dtype=complex)


def free_flight(psi: FiberWavefunction, dt, scale=1.0):
    """Evolve by exp(-i dt H / scale); ``scale`` is λ^ϱ."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0:
        return psi.copy()
    U, _, E = fiber_basis(psi)
    b = U.conj().T @ psi.amps
    b *= np.exp(-1j * dt * E / scale)
    out = psi.copy()
    out.amps = U @ b
    return out


def kick(psi: FiberWavefunction, v):
    """Apply e^{ivX}: momenta shift by ``v``; the window follows the centroid."""
    if abs(v) >= psi.M / 2:
        raise WindowOverflow(f"kick {v} too large for window M={psi.M}")
    shifted = psi.phi + v
    phi = float(quasimomentum(shifted))
    s = int(round(shifted - phi))
    out = psi.copy()
    out.phi = phi
    out.center = psi.center + s
    return _recenter(out)


def _recenter(psi: FiberWavefunction):
    w = np.abs(psi.amps) ** 2
    total = w.sum()
    if total == 0:
        return psi
    d = int(round(float(np.sum(w * psi.m) / total)))
    if abs(d) < RECENTER_SHIFT:
        return psi
    amps = np.zeros_like(psi.amps)
    if d > 0:
        amps[:-d] = psi.amps[d:]
        lost = psi.amps[:d]
    else:
        amps[-d:] = psi.amps[:d]
        lost = psi.amps[d:]
    leak = float(np.sum(np.abs(lost) ** 2))
    if leak > OVERFLOW_MASS:
        raise WindowOverflow(f"re-centering would discard mass {leak:.2e}")
    return replace(psi, amps=amps, center=psi.center + d, leaked_mass=psi.leaked_mass + leak)


def momentum_expectation(psi: FiberWavefunction, fn):
    """Σ_m |amps_m|² fn(φ + c + m)."""
    return np.sum(np.abs(psi.amps) ** 2 * fn(psi.momenta))


# ---------------------------------------------------------------------------
# Lévy unraveling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnravelingConfig:
    lam: float = 0.1
    varrho: float = 1.75
    t_end: float = 1.0
    M: int = M_DEFAULT
    seed: int = 0
    p0: float = 2.3
    comb: CombParams = CombParams()
    noise: NoiseModel = field(default_factory=gaussian)
    start: str = "plane"  # "plane" | "eigen"

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError("lam must lie in (0, 1)")
        if self.M < 16:
            raise ValueError("M must be >= 16")
        if not self.varrho > 0:
            raise ValueError("varrho must be positive")

    @property
    def scale(self):
        return self.lam**self.varrho


def levy_trajectory(cfg: UnravelingConfig, rng=None):
    """One trajectory: exponential(ℛ) flights alternating with kicks.

    Returns ``(psi_final, kicks)`` where ``kicks`` is the list of (time, v).
    Averaging ``|amps|²`` against ``psi.momenta`` over trajectories estimates
    the momentum distribution of the mixed state.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    start = eigenstate if cfg.start == "eigen" else plane_wave
    psi = start(cfg.p0, cfg.M, cfg.comb)
    rate = cfg.noise.total_rate
    t = 0.0
    kicks = []
    while rate > 0:
        dt = rng.exponential(1.0 / rate)
        if t + dt > cfg.t_end:
            break
        psi = free_flight(psi, dt, cfg.scale)
        t += dt
        v = float(cfg.noise.sample(rng))
        psi = kick(psi, v)
        kicks.append((t, v))
    psi = free_flight(psi, cfg.t_end - t, cfg.scale)
    return psi, kicks


def _shift_rows(A, d):
    out = np.zeros_like(A)
    if d > 0:
        out[:-d] = A[d:]
    elif d < 0:
        out[-d:] = A[:d]
    else:
        out[:] = A
    return out


def adiabatic_populations(cfg: UnravelingConfig, rng=None):
    """Quantum and classical label populations driven by one kick sequence.

    Both start on the eigenket |p0>_Q.  Within a fiber the quantum state is the
    Q-basis vector ``b``; a kick maps it through ``K = U_new^† S U_old`` (S is
    the relabelling/re-centering shift), while the classical law ``P`` moves
    through the doubly stochastic ``|K|²``.  Flights only rotate the phases of
    ``b``.  Returns ``(labels, |b|², P)`` at ``cfg.t_end``.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    psi = plane_wave(cfg.p0, cfg.M, cfg.comb)
    b = np.zeros(2 * cfg.M + 1, dtype=complex)
    b[cfg.M] = 1.0
    P = np.abs(b) ** 2
    rate = cfg.noise.total_rate
    t = 0.0
    while rate > 0:
        dt = rng.exponential(1.0 / rate)
        if t + dt > cfg.t_end:
            break
        t += dt
        U_old, _, E = fiber_basis(psi)
        b = b * np.exp(-1j * dt * E / cfg.scale)
        v = float(cfg.noise.sample(rng))
        psi.amps = U_old @ b
        moved = kick(psi, v)
        shift = moved.center - psi.center - int(round(psi.phi + v - moved.phi))
        U_new, _, _ = fiber_basis(moved)
        K = U_new.conj().T @ _shift_rows(U_old, shift)
        b = K @ b
        P = (np.abs(K) ** 2) @ P
        psi = moved
    _, labels, _ = fiber_basis(psi)
    return psi.momenta, np.abs(b) ** 2, P


# ---------------------------------------------------------------------------
# Bragg reflection
# ---------------------------------------------------------------------------

def _reflection_series(params, p, t_grid, scale, M):
    psi = plane_wave(p, M, params)
    U, labels, E = fiber_basis(psi)
    n = int(round(2.0 * p))
    idx = psi.M - n
    if not 0 <= idx < U.shape[0]:
        raise WindowOverflow(f"reflected channel m={-n} outside window M={M}")
    b0 = U.conj().T[:, psi.M]
    row = U[idx, :]
    phases = np.exp(-1j * np.outer(np.asarray(t_grid, dtype=float), E) / scale)
    return np.abs(phases @ (row * b0)) ** 2


def pendellosung_probe(params, p, t_grid, lam=0.1, varrho=1.75, M=M_DEFAULT):
    """|C_t(-n, p)|²: weight on the reflected plane wave p - n, n = round(2p).

    Starts from the plane wave |p>.  A start exactly on the Bragg point is
    shifted by 1e-6 toward the origin.
    """
    p = float(p)
    if _alpha(params) == 0.0:
        return np.zeros(len(np.atleast_1d(t_grid)))
    return _reflection_series(params, p, t_grid, lam**varrho, M)


def pendellosung_period(t_grid, series):
    """Mean spacing of successive prominent maxima (fast small ripples are ignored)."""
    y = np.asarray(series)
    t = np.asarray(t_grid)
    k, _ = signal.find_peaks(y, prominence=0.25 * (y.max() - y.min()))
    if k.size < 2:
        return float("nan")
    return float((t[k[-1]] - t[k[0]]) / (k.size - 1))


def _max_reflection(params, p, M):
    """Max over time of the reflection probability (time-scale free)."""
    g = band_gap(params, round(2.0 * p))
    horizon = 4.0 * 2.0 * np.pi / g
    t = np.linspace(0.0, horizon, 4001)
    return float(_reflection_series(params, p, t, 1.0, M).max())


def reflection_band_width(params, n, threshold=0.5, M=M_DEFAULT, tol=1e-7):
    """Half-width δ of the set of p = n/2 + δ whose peak reflection exceeds ``threshold``.

    Found by bisection on δ in (0, 1/4); the peak over time is taken on a grid
    spanning four periods of the two-level oscillation.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if _alpha(params) == 0.0:
        return 0.0
    lo, hi = 1e-6, 0.25
    if _max_reflection(params, n / 2 + lo, M) < threshold:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _max_reflection(params, n / 2 + mid, M) >= threshold:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
