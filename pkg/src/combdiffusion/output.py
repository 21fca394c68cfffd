"""CSV / JSON writers and the run manifest.

CSV follows RFC 4180 (CRLF line endings, minimal quoting).  Floats are
written with ``repr`` so a value round-trips exactly; together with sorted
JSON keys this makes outputs byte-identical for identical inputs.
"""
from __future__ import annotations

import csv
import io
import json
import os
import subprocess
from pathlib import Path

import numpy as np

from . import __version__
from .config import canonical_text, config_hash

__all__ = ["write_csv", "write_json", "summary", "manifest", "git_describe", "to_jsonable"]


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    if isinstance(x, (np.bool_, bool)):
        return "true" if x else "false"
    return x


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [to_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else None
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def write_json(path, obj):
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    Path(path).write_bytes(text.encode("utf-8"))


def summary(experiment, params, estimates, passed, seed, runtime_s=None):
    """The standard JSON summary; every estimate is ``{"value": ..., "se": ...}``."""
    return {
        "experiment": experiment,
        "params": params,
        "estimates": estimates,
        "pass": passed,
        "seed": seed,
        "runtime_s": runtime_s,
    }


def git_describe():
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10, check=True,
                             env={**os.environ, "GIT_OPTIONAL_LOCKS": "0"})
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def manifest(cfg, seed, command, outputs):
    return {
        "command": command,
        "config_hash": config_hash(cfg),
        "config": canonical_text(cfg),
        "git_describe": git_describe(),
        "outputs": sorted(outputs),
        "package_version": __version__,
        "seed": seed,
    }
