import numpy as np
import pytest

from combdiffusion.bandstructure import CombParams
from combdiffusion.errors import StabilityViolation
from combdiffusion.fiber import (MomentumGrid, build_generator, char_value, compare_semigroups, evolve,
                                 gaussian_density, weighted_unraveling)
from combdiffusion.harness import galilean_char
from combdiffusion.noise import gaussian


@pytest.fixture(scope="module")
def grid():
    return MomentumGrid(0.0, 2.5, 0.01)


def test_grid_layout(grid):
    pts = grid.points
    assert pts.size == grid.N == 500
    assert np.allclose(np.diff(pts), 0.01)
    # no grid point on the Bragg lattice
    assert np.min(np.abs(2 * pts - np.rint(2 * pts))) > 1e-3


def test_grid_validation():
    with pytest.raises(ValueError):
        MomentumGrid(0.0, 1.0, 0.03)
    with pytest.raises(ValueError):
        MomentumGrid(0.0, 1.0, 0.003)


def test_classical_generator_mass(grid):
    # mass only leaves through diffraction channels that land off the grid
    spec = build_generator("classical", 0.0, 0.1, 1.75, grid)
    f0 = gaussian_density(grid, 0.7, 0.05)
    ft = evolve(f0, spec, 1.0)
    assert 0.99 <= char_value(ft).real <= 1.0 + 1e-12
    assert ft.values.real.min() > -1e-12


def test_free_fiber_semigroups_agree(grid):
    f0 = gaussian_density(grid, 0.7, 0.05, 0.003)
    d_qc, d_qh = compare_semigroups(0.003, 0.3, 1.75, 0.5, f0, gaussian(), CombParams(0.0))
    assert d_qc <= 1e-10


def test_galilean_closed_form_without_jumps_loss(grid):
    # α = 0, k = 0: the characteristic value is the total mass, conserved up to grid leakage
    f0 = gaussian_density(grid, 0.0, 0.05)
    ft = evolve(f0, build_generator("quantum", 0.0, 0.3, 1.75, grid, comb=CombParams(0.0)), 0.5)
    assert char_value(ft).real == pytest.approx(1.0, abs=1e-3)
    assert abs(galilean_char(gaussian(), 0.0, 0.5, [0.0])[0] - 1) < 1e-12


def test_stability_guard(grid):
    spec = build_generator("classical", 0.0, 0.1, 1.75, grid, noise=gaussian(rate=5.0))
    with pytest.raises(StabilityViolation):
        evolve(gaussian_density(grid, 0.7, 0.05), spec, 1.0, dt=0.05)


def test_unknown_kind(grid):
    with pytest.raises(ValueError):
        build_generator("other", 0.0, 0.1, 1.75, grid)


@pytest.mark.parametrize("kind", ["classical", "quantum", "hybrid"])
def test_weighted_unraveling_matches_grid(grid, kind):
    k = 0.004
    f0 = gaussian_density(grid, 1.2, 0.05, k)
    exact = char_value(evolve(f0, build_generator(kind, k, 0.3, 1.75, grid), 0.8))
    mc = weighted_unraveling(kind, k, 0.3, 1.75, 0.8, f0, n_paths=3000, seed=5)
    assert abs(mc["value"] - exact) <= 4 * mc["se"]
