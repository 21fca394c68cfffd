import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from combdiffusion.config import canonical_text, config_hash, load_config, parse_config, section
from combdiffusion.errors import ConfigError, InsufficientSample
from combdiffusion.output import manifest, summary, to_jsonable, write_csv, write_json
from combdiffusion.stats import jackknife_se, ks_test, ks_two_sample, moment_ci


def test_ks_calibration():
    from scipy.stats import norm
    passes = sum(ks_test(np.random.default_rng(s).standard_normal(10_000), norm.cdf)[1] > 0.01 for s in range(100))
    assert passes >= 98


def test_ks_power():
    from scipy.stats import norm
    x = np.random.default_rng(0).standard_normal(10_000)
    assert ks_test(x, norm(0, np.sqrt(2)).cdf)[1] < 1e-6


def test_mean_ci_coverage():
    hits = 0
    for s in range(100):
        m, se = moment_ci(np.random.default_rng(s).exponential(1.0, 400), 1)
        hits += abs(m - 1) <= 1.96 * se
    assert 88 <= hits <= 100


def test_moment_ci_matches_generic_jackknife(rng):
    x = rng.normal(size=150)
    assert moment_ci(x, 2)[1] == pytest.approx(jackknife_se(x, lambda y: np.mean(y**2)), rel=1e-10)


def test_small_samples_rejected():
    with pytest.raises(InsufficientSample):
        moment_ci(np.ones(10))
    with pytest.raises(InsufficientSample):
        ks_two_sample(np.ones(200), np.ones(5))


def test_parse_config():
    cfg = parse_config("# comment\nclt.lam = 0.05\nclt.n_paths=200  # trailing\nnoise.kind = gaussian\n"
                       "adiabatic.levels = 0.3, 0.1\nflag.on = true\n")
    assert cfg == {"clt.lam": 0.05, "clt.n_paths": 200, "noise.kind": "gaussian",
                   "adiabatic.levels": [0.3, 0.1], "flag.on": True}
    assert section(cfg, "clt") == {"lam": 0.05, "n_paths": 200}


@pytest.mark.parametrize("text", ["lam = 1", "a.b 1", "a.b = 1\na.b = 2", "a.b ="])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@given(st.dictionaries(st.from_regex(r"[a-z]{1,5}\.[a-z]{1,5}", fullmatch=True),
                       st.one_of(st.integers(-10**6, 10**6), st.floats(-1e6, 1e6, allow_nan=False), st.booleans()),
                       max_size=8))
def test_canonical_text_round_trip(cfg):
    again = parse_config(canonical_text(cfg))
    assert canonical_text(again) == canonical_text(cfg)
    assert config_hash(again) == config_hash(cfg)


def test_load_config_defaults(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("clt.n_paths = 50\n")
    cfg = load_config(p)
    assert cfg["clt.n_paths"] == 50 and cfg["comb.alpha"] == 1.0


def test_csv_rfc4180(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b"], [[1.5, 'say "hi", ok'], [np.float64(0.1), np.int64(3)]])
    assert p.read_bytes() == b'a,b\r\n1.5,"say ""hi"", ok"\r\n0.1,3\r\n'


def test_json_summary(tmp_path):
    s = summary("x", {"n": np.int64(2)}, {"m": {"value": np.float64(1.0), "se": None}}, np.bool_(True), 1)
    write_json(tmp_path / "s.json", s)
    back = json.loads((tmp_path / "s.json").read_text())
    assert set(back) == {"experiment", "params", "estimates", "pass", "seed", "runtime_s"}
    assert back["runtime_s"] is None and back["pass"] is True


def test_jsonable_non_finite():
    assert to_jsonable([np.nan, complex(1, 2)]) == [None, {"re": 1.0, "im": 2.0}]


def test_manifest_fields():
    m = manifest({"a.b": 1}, 3, "bands", ["b.json", "a.csv"])
    assert m["outputs"] == ["a.csv", "b.json"] and len(m["config_hash"]) == 64 and m["git_describe"]
