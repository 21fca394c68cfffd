"""Flat ``section.key = value`` configuration files.

Lines are ``section.key = value``; ``#`` starts a comment; blank lines are
ignored.  Values are parsed as int, float, bool (true/false) or left as
strings, and a comma-separated value becomes a list.  Repeated keys are an
error.  :func:`canonical_text` renders a config in sorted order, and its
SHA-256 is the config hash recorded in run manifests.
"""
from __future__ import annotations

import hashlib
import re

from .errors import ConfigError

__all__ = ["parse_config", "load_config", "canonical_text", "config_hash", "section", "DEFAULTS"]

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_.]*$")

DEFAULTS = {
    "comb.alpha": 1.0,
    "noise.kind": "gaussian",
    "noise.rate": 1.0,
    "noise.width": 0.5,
    "clt.lam": 0.02,
    "clt.gamma": 1.5,
    "clt.p0": 1.0,
    "clt.T": 8.0,
    "clt.n_paths": 10000,
    "clt.batch": 1000,
    "clt.workers": 1,
    "classical.n_paths": 10000,
    "classical.flip_paths": 6000,
    "adiabatic.levels": [0.3, 0.1, 0.03],
    "adiabatic.n_traj": 3000,
}


def _value(text):
    t = text.strip()
    if "," in t:
        return [_value(part) for part in t.split(",") if part.strip()]
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def parse_config(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"line {lineno}: key {key!r} is not of the form section.key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if val == "":
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        out[key] = _value(val)
    return out


def load_config(path=None, defaults=True) -> dict:
    cfg = dict(DEFAULTS) if defaults else {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cfg.update(parse_config(fh.read()))
    return cfg


def _render(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ", ".join(_render(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def canonical_text(cfg: dict) -> str:
    return "".join(f"{k} = {_render(cfg[k])}\n" for k in sorted(cfg))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_text(cfg).encode("utf-8")).hexdigest()


def section(cfg: dict, name: str) -> dict:
    """Keys of one section with the prefix stripped."""
    pre = name + "."
    return {k[len(pre):]: v for k, v in cfg.items() if k.startswith(pre)}
