"""Kick-rate densities j(v) and their admissibility checks.

A model is a finite sum of symmetric components, each carrying its own rate:

* ``("gaussian", rate, width, center)``: rate/2 · [N(center, width²) + N(-center, width²)]
* ``("band", rate, lo, hi)``: uniform on lo <= |v| <= hi with total mass ``rate``

The built-in families are a single centered Gaussian and the uniform window
``band(0, w)``.  ``rate`` is ℛ = ∫ j, ``sigma`` is σ = ∫ j v² and ``varsigma``
is ς = ∫ (j/ℛ) v⁴.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

__all__ = [
    "NoiseModel",
    "AssumptionsReport",
    "gaussian",
    "uniform_window",
    "mixture",
    "validate_assumptions",
    "sample_kick",
    "moments",
]


def _component_density(comp, v):
    kind = comp[0]
    v = np.abs(np.asarray(v, dtype=float))
    if kind == "gaussian":
        _, rate, s, c = comp
        g = lambda x: np.exp(-0.5 * (x / s) ** 2) / (s * np.sqrt(2.0 * np.pi))
        return 0.5 * rate * (g(v - c) + g(v + c))
    if kind == "band":
        _, rate, lo, hi = comp
        return np.where((v >= lo) & (v <= hi), rate / (2.0 * (hi - lo)), 0.0)
    raise ValueError(f"unknown component kind {kind!r}")


def _component_moments(comp):
    """(rate, ∫ j v², ∫ j v⁴) in closed form."""
    kind = comp[0]
    if kind == "gaussian":
        _, rate, s, c = comp
        return rate, rate * (s * s + c * c), rate * (c**4 + 6 * c * c * s * s + 3 * s**4)
    _, rate, lo, hi = comp
    span = hi - lo
    return rate, rate * (hi**3 - lo**3) / (3 * span), rate * (hi**5 - lo**5) / (5 * span)


def _component_reach(comp):
    """A |v| beyond which the component density is negligible (< 1e-16 relative)."""
    if comp[0] == "gaussian":
        return comp[3] + 9.0 * comp[2]
    return comp[3]


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    components: tuple = field(default_factory=tuple)

    @property
    def total_rate(self) -> float:
        return float(sum(_component_moments(c)[0] for c in self.components))

    @property
    def sigma(self) -> float:
        return float(sum(_component_moments(c)[1] for c in self.components))

    @property
    def varsigma(self) -> float:
        rate = self.total_rate
        if rate == 0.0:
            return 0.0
        return float(sum(_component_moments(c)[2] for c in self.components) / rate)

    @property
    def reach(self) -> float:
        return max((_component_reach(c) for c in self.components), default=0.0)

    def density(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape)
        for comp in self.components:
            out = out + _component_density(comp, v)
        return out

    def scaled(self, c: float) -> "NoiseModel":
        """The model with j replaced by c·j."""
        comps = tuple((k[0], k[1] * c) + tuple(k[2:]) for k in self.components)
        return NoiseModel(self.kind, comps)

    def sample(self, rng: np.random.Generator, size=None):
        """Draws from j/ℛ."""
        rate = self.total_rate
        if rate <= 0:
            raise ValueError("cannot sample kicks from a zero-rate model")
        shape = () if size is None else size
        count = int(np.prod(shape))
        weights = np.array([_component_moments(c)[0] for c in self.components]) / rate
        pick = rng.choice(len(self.components), size=count, p=weights)
        out = np.empty(count)
        signs = rng.choice(np.array([-1.0, 1.0]), size=count)
        for i, comp in enumerate(self.components):
            idx = np.flatnonzero(pick == i)
            if idx.size == 0:
                continue
            if comp[0] == "gaussian":
                out[idx] = comp[3] * signs[idx] + comp[2] * rng.standard_normal(idx.size)
            else:
                out[idx] = signs[idx] * rng.uniform(comp[2], comp[3], idx.size)
        return out.reshape(shape) if size is not None else float(out[0])

    def nodes(self, h: float):
        """Lattice nodes v = l·h with weights summing exactly to ℛ.

        Used wherever an integral over kicks must be done on a momentum grid
        of spacing ``h``.
        """
        L = int(np.ceil(self.reach / h))
        v = h * np.arange(-L, L + 1)
        w = self.density(v) * h
        keep = w > 1e-16 * max(w.max(), 1e-300)
        v, w = v[keep], w[keep]
        if w.sum() > 0:
            w *= self.total_rate / w.sum()
        return v, w


def gaussian(rate: float = 1.0, width: float = 0.5) -> NoiseModel:
    return NoiseModel("gaussian", (("gaussian", float(rate), float(width), 0.0),))


def uniform_window(rate: float = 2.0, half_width: float = 1.0) -> NoiseModel:
    return NoiseModel("uniform-window", (("band", float(rate), 0.0, float(half_width)),))


def mixture(*components) -> NoiseModel:
    """Mixture of ``("gaussian", rate, width, center)`` / ``("band", rate, lo, hi)`` parts."""
    return NoiseModel("mixture", tuple(tuple(c) for c in components))


def moments(model: NoiseModel):
    """(ℛ, σ, ς) from closed forms."""
    return model.total_rate, model.sigma, model.varsigma


def sample_kick(model: NoiseModel, rng: np.random.Generator, size=None):
    return model.sample(rng, size)


@dataclass(frozen=True)
class AssumptionsReport:
    exp_moment_ok: bool
    exp_moment_a: float
    exp_moment_bound: float
    lattice_sum_sup: float
    inf_on_unit: float
    varpi: float
    passed: bool

    def as_dict(self):
        return {
            "exp_moment_ok": self.exp_moment_ok,
            "exp_moment_a": self.exp_moment_a,
            "exp_moment_bound": self.exp_moment_bound,
            "lattice_sum_sup": self.lattice_sum_sup,
            "inf_on_unit": self.inf_on_unit,
            "varpi": self.varpi,
            "pass": self.passed,
        }


def _breakpoints(model):
    pts = set()
    for comp in model.components:
        if comp[0] == "band":
            pts.update([comp[2], comp[3]])
        else:
            pts.add(comp[3])
    return sorted(p for p in pts if p > 0)


def validate_assumptions(model: NoiseModel, a: float = 0.5, grid_resolution: int = 2001) -> AssumptionsReport:
    """Check the three admissibility conditions and report a certificate ϖ.

    1. ∫ j(v) e^{a|v|} dv is finite (quadrature on the support).
    2. sup over |θ| <= 1/4 of Σ_n j(θ + n/2) (grid in θ).
    3. inf over [-1, 1] of j (grid including the endpoints).

    ϖ is the smallest value exceeding all three constants (the third enters
    as its reciprocal).
    """
    if not a > 0:
        raise ValueError("a must be positive")
    reach = model.reach
    f = lambda v: float(model.density(v)) * np.exp(a * v)
    cuts = [0.0] + [b for b in _breakpoints(model) if b < reach] + [reach]
    exp_moment = 2.0 * sum(integrate.quad(f, lo, hi, limit=200)[0] for lo, hi in zip(cuts[:-1], cuts[1:]))
    exp_ok = bool(np.isfinite(exp_moment))

    th = np.linspace(-0.25, 0.25, grid_resolution)
    nmax = int(np.ceil(2.0 * reach)) + 1
    n = np.arange(-nmax, nmax + 1)
    lattice = model.density(th[:, None] + 0.5 * n[None, :]).sum(axis=1)
    lattice_sup = float(lattice.max())

    unit = np.union1d(np.linspace(-1.0, 1.0, grid_resolution), [-1.0, 1.0])
    unit = np.union1d(unit, [b for b in _breakpoints(model) if b <= 1.0] + [-b for b in _breakpoints(model) if b <= 1.0])
    inf_unit = float(model.density(unit).min())

    passed = exp_ok and inf_unit > 0.0
    varpi = max(exp_moment, lattice_sup, 1.0 / inf_unit if inf_unit > 0 else np.inf)
    varpi = float(np.nextafter(varpi, np.inf)) if np.isfinite(varpi) else float("inf")
    return AssumptionsReport(exp_moment_ok=exp_ok, exp_moment_a=float(a), exp_moment_bound=float(exp_moment),
                             lattice_sum_sup=lattice_sup, inf_on_unit=inf_unit, varpi=varpi,
                             passed=bool(passed))
