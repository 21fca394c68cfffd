"""Simulate the classical momentum/position process and look at sign flips.

A momentum near 50 keeps its sign for a long flight and then reflects off
the comb.  The ratio ν·Δτ/|K| is approximately exponential(1).

Run:  python3 demos/classical_paths.py
"""
import numpy as np

from combdiffusion.bandstructure import CombParams
from combdiffusion.classical import JumpEngine, TrajectoryConfig, detect_flips, first_tau_batch, simulate_path
from combdiffusion.noise import gaussian

comb, noise = CombParams(1.0), gaussian(rate=1.0, width=0.5)
state, log, _ = simulate_path(TrajectoryConfig(comb, noise, K0=50.2, t_end=1000.0, seed=1))
flips = detect_flips(log.t, log.K0, log.K_after)
print(f"{log.count} kicks, final K = {state.K:.2f}, {int(flips.is_flip.sum())} sign flips")
print("first flip times:", np.round(flips.tau[flips.is_flip][:5], 1))

rng = np.random.default_rng(0)
dtau, k, _, _ = first_tau_batch(JumpEngine(comb, noise), 50 + rng.uniform(-0.25, 0.25, 1000), rng)
r = (noise.total_rate / 4) * dtau / k
print(f"nu*dtau/|K|: mean {r.mean():.3f}, second moment {np.mean(r**2):.3f} (exponential law: 1 and 2)")
