"""A reduced-size run of the classical CLT next to the renewal oracle.

Uses λ = 0.05 and 2000 paths so it finishes in under a minute.  The
diffusion constant Tϑ is approached only slowly as λ shrinks; compare the
simulated variance with the renewal variance at the same flip count.

Run:  python3 demos/clt_small.py
"""
from combdiffusion.harness import CltConfig, renewal_oracle, run_clt

cfg = CltConfig(lam=0.05, n_paths=2000, batch=500, seed=3)
res = run_clt(cfg)
est = res["estimates"]
var, z, _ = renewal_oracle(cfg, n_samples=20000)
print(f"flights in horizon ~ {cfg.flips:.1f}, target Tϑ = {cfg.T * cfg.vartheta:.0f}")
print(f"simulated variance {est['variance']['value']:.1f} ± {est['variance']['se']:.1f}")
print(f"renewal oracle     {var:.1f} (sampled {z.var():.1f})")
print(f"growth-corrected   {est['variance_growth_corrected']['value']:.1f}")
