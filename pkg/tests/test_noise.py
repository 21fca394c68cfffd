import numpy as np
import pytest
from hypothesis import given, strategies as st

from combdiffusion.noise import gaussian, mixture, moments, sample_kick, uniform_window, validate_assumptions


def test_reference_moments():
    assert moments(gaussian()) == pytest.approx((1.0, 0.25, 0.1875))
    assert moments(uniform_window()) == pytest.approx((2.0, 2 / 3, 0.2))


@given(st.floats(0.1, 5), st.floats(0.1, 2))
def test_gaussian_moments_scale(rate, width):
    R, s, vs = moments(gaussian(rate, width))
    assert R == pytest.approx(rate)
    assert s == pytest.approx(rate * width**2)
    assert vs == pytest.approx(3 * width**4)


@given(st.floats(0.1, 3))
def test_density_integrates_to_rate(c):
    m = gaussian().scaled(c)
    v = np.linspace(-8, 8, 40001)
    assert np.trapezoid(m.density(v), v) == pytest.approx(c, rel=1e-6)


def test_density_symmetric():
    m = mixture(("gaussian", 0.5, 0.3, 1.0), ("band", 0.5, 0.2, 0.9))
    v = np.linspace(-3, 3, 601)
    assert np.allclose(m.density(v), m.density(-v))


@given(st.floats(0.001, 0.01))
def test_nodes_weights_sum_to_rate(h):
    v, w = uniform_window().nodes(h)
    assert w.sum() == pytest.approx(2.0, rel=1e-12)
    assert np.all(w >= 0)


def test_assumptions_reference_laws():
    g = validate_assumptions(gaussian())
    assert g.passed and np.isfinite(g.varpi) and g.varpi > 1
    assert validate_assumptions(uniform_window()).passed


def test_assumptions_fail_with_gap_at_origin():
    rep = validate_assumptions(mixture(("band", 0.5, 1.0, 2.0)))
    assert not rep.passed
    assert rep.as_dict()["pass"] is False


def test_sampler_matches_moments(rng):
    m = mixture(("gaussian", 1.0, 0.4, 0.0), ("band", 1.0, 0.5, 1.5))
    x = m.sample(rng, 200_000)
    R, s, vs = moments(m)
    assert abs(x.mean()) < 4 * x.std() / np.sqrt(x.size)
    assert np.mean(x**2) == pytest.approx(s / R, rel=0.02)
    assert np.mean(x**4) == pytest.approx(vs, rel=0.05)


def test_sample_kick_scalar(rng):
    assert isinstance(sample_kick(gaussian(), rng), float)


def test_zero_rate_cannot_sample(rng):
    with pytest.raises(ValueError):
        gaussian(rate=0.0).sample(rng)
