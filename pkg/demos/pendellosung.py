"""Bragg reflection of a plane wave at p = 5 (two-level Rabi oscillation).

Writes pendellosung.csv with columns t, reflection, reflection_off.

Run:  python3 demos/pendellosung.py
"""
from combdiffusion.checks import check_pendellosung
from combdiffusion.output import write_csv

res = check_pendellosung()
for k, v in res["estimates"].items():
    print(f"{k:15s} {v['value']:.4f}")
d = res["data"]
write_csv("pendellosung.csv", ["t", "reflection", "reflection_off"],
          zip(d["t"], d["reflection"], d["reflection_off"]))
print("wrote pendellosung.csv")
