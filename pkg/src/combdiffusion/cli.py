"""``comb-diffusion`` command line.

    comb-diffusion <command> [--config FILE] [--seed N] [--out DIR] [--timing]

Each run writes ``<command>.json`` (the summary), one or more CSV files and
``manifest.json`` into ``--out``.  Without ``--timing`` the summary's
``runtime_s`` is null, so two runs with the same config and seed produce
byte-identical files.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import checks, harness
from .bandstructure import CombParams
from .config import load_config, section
from .errors import ConfigError
from .noise import gaussian, uniform_window
from .output import manifest, summary, write_csv, write_json
from .stats import ks_two_sample

COMMANDS = ("bands", "kappa", "noise", "classical", "quantum", "fiber", "clt", "ballistic", "adiabatic")


def _noise(cfg):
    s = section(cfg, "noise")
    kind = s.get("kind", "gaussian")
    if kind == "gaussian":
        return gaussian(rate=float(s.get("rate", 1.0)), width=float(s.get("width", 0.5)))
    if kind in ("uniform", "uniform-window"):
        return uniform_window(rate=float(s.get("rate", 2.0)), half_width=float(s.get("width", 1.0)))
    raise ConfigError(f"noise.kind {kind!r} is not one of gaussian, uniform")


def _clt_config(cfg, seed):
    s = section(cfg, "clt")
    return harness.CltConfig(lam=float(s["lam"]), gamma=float(s["gamma"]), p0=float(s["p0"]), T=float(s["T"]),
                             n_paths=int(s["n_paths"]), seed=seed, alpha=float(cfg["comb.alpha"]),
                             noise=_noise(cfg), batch=int(s["batch"]), workers=int(s["workers"]))


def _merge(name, parts, seed):
    est, flags, params = {}, {}, {}
    for p in parts:
        params[p["experiment"]] = p["params"]
        est.update({f"{p['experiment']}.{k}": v for k, v in p["estimates"].items()})
        flags.update({f"{p['experiment']}.{k}": v for k, v in p.get("checks", {"pass": p["pass"]}).items()})
    return {"experiment": name, "params": params, "estimates": est, "pass": bool(all(flags.values())),
            "checks": flags, "seed": seed}


def _columns(data):
    """Equal-length 1-d arrays in ``data`` as (header, rows)."""
    cols = {k: np.asarray(v) for k, v in data.items() if np.ndim(v) == 1}
    if not cols:
        return None
    n = min(len(v) for v in cols.values())
    header = list(cols)
    rows = zip(*[cols[h][:n].tolist() for h in header])
    return header, rows


def run(command, cfg, seed):
    """Run one command; returns (summary-like dict, {csv name: (header, rows)})."""
    alpha = float(cfg["comb.alpha"])
    tables = {}
    if command == "bands":
        res = checks.check_bands(seed)
    elif command == "kappa":
        res = checks.check_kappa(seed, alpha=alpha)
    elif command == "noise":
        res = checks.check_noise(seed)
    elif command == "quantum":
        res = checks.check_quantum(seed)
    elif command == "fiber":
        res = checks.check_fiber(seed)
    elif command == "classical":
        noise = _noise(cfg)
        s = section(cfg, "classical")
        parts = [harness.run_energy_identities(seed=seed, alpha=alpha, noise=noise,
                                               n_paths=int(s.get("n_paths", 10_000))),
                 harness.run_flip_law(seed=seed, alpha=alpha, noise=noise,
                                      n_paths=int(s.get("flip_paths", 6000))),
                 harness.run_torus_check(seed=seed, alpha=alpha, noise=noise)]
        res = _merge("classical", parts, seed)
        tables["flip_law"] = _columns(parts[1]["data"])
    elif command == "clt":
        ccfg = _clt_config(cfg, seed)
        res = harness.run_clt(ccfg)
        var, oracle, _ = harness.renewal_oracle(ccfg)
        ks2, ks2_p = ks_two_sample(res["data"]["z"], oracle)
        res["estimates"]["oracle_variance"] = {"value": var, "se": None}
        res["estimates"]["oracle_ks_two_sample"] = {"value": ks2, "se": None}
        res["estimates"]["oracle_ks_pvalue"] = {"value": ks2_p, "se": None}
        res["checks"]["oracle_agreement"] = bool(ks2_p > 0.01)
        res["pass"] = bool(all(res["checks"].values()))
        tables["oracle"] = (["oracle_z"], ([x] for x in oracle.tolist()))
    elif command == "ballistic":
        ccfg = _clt_config(cfg, seed)
        res = _merge("ballistic", [harness.run_ballistic("no_noise", ccfg),
                                   harness.run_ballistic("no_comb", ccfg)], seed)
    elif command == "adiabatic":
        s = section(cfg, "adiabatic")
        levels = s.get("levels", [0.3, 0.1, 0.03])
        res = harness.run_adiabatic_sweep(levels=levels, n_traj=int(s.get("n_traj", 3000)), seed=seed,
                                          alpha=alpha)
    else:
        raise ValueError(f"unknown command {command!r}")
    if "data" in res:
        if "rows" in res["data"]:
            tables[command] = (None, res["data"]["rows"])
        else:
            tables[command] = _columns(res["data"])
    return res, {k: v for k, v in tables.items() if v is not None}


def _estimates(res):
    est = dict(res["estimates"])
    for k, v in res.get("checks", {}).items():
        est[f"check.{k}"] = {"value": bool(v), "se": None}
    return est


def main(argv=None):
    ap = argparse.ArgumentParser(prog="comb-diffusion", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat 'section.key = value' file; omitted keys take defaults")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out")
    ap.add_argument("--timing", action="store_true", help="record wall-clock runtime in the summary")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"comb-diffusion: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res, tables = run(args.command, cfg, args.seed)
    runtime = round(time.perf_counter() - t0, 3) if args.timing else None
    written = []
    for name, (header, rows) in tables.items():
        if header is None:
            rows = list(rows)
            header = [f"c{i}" for i in range(len(rows[0]))] if rows else []
        path = out / f"{name}.csv"
        write_csv(path, header, rows)
        written.append(path.name)
    summ = summary(res["experiment"], res["params"], _estimates(res), res["pass"], args.seed, runtime)
    write_json(out / f"{args.command}.json", summ)
    written.append(f"{args.command}.json")
    write_json(out / "manifest.json", manifest(cfg, args.seed, args.command, written))
    print(f"{args.command}: {'PASS' if res['pass'] else 'FAIL'}  ({out})")
    for k, v in res.get("checks", {}).items():
        if not v:
            print(f"  failed check: {k}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
