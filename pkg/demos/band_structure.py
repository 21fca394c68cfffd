"""Print the first bands of the comb and the gaps at the Bragg points.

Run:  python3 demos/band_structure.py
"""
import numpy as np

from combdiffusion.bandstructure import CombParams, band_gap, energy, q_of

comb = CombParams(alpha=1.0)
p = np.linspace(0.05, 2.45, 9)
print("    p        q(p)      E(p)     E - p^2")
for pi, qi, ei in zip(p, q_of(comb, p), energy(comb, p)):
    print(f"{pi:6.3f}  {qi:9.5f}  {ei:9.5f}  {ei - pi**2:+.5f}")

print("\nBand gaps g_n (tend to alpha/pi = %.5f):" % (1 / np.pi))
for n in (1, 2, 5, 10, 50):
    print(f"  n = {n:3d}: {band_gap(comb, n):.5f}")
