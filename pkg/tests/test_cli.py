import json

import pytest

from combdiffusion.cli import main


@pytest.mark.parametrize("command", ["bands", "noise"])
def test_cli_byte_identical(tmp_path, command):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([command, "--seed", "7", "--out", str(a)]) == 0
    assert main([command, "--seed", "7", "--out", str(b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    s = json.loads((a / f"{command}.json").read_text())
    assert s["runtime_s"] is None and s["seed"] == 7 and s["pass"] is True
    man = json.loads((a / "manifest.json").read_text())
    assert man["command"] == command and f"{command}.json" in man["outputs"]


def test_cli_timing_flag(tmp_path):
    main(["noise", "--out", str(tmp_path), "--timing"])
    assert json.loads((tmp_path / "noise.json").read_text())["runtime_s"] >= 0


def test_cli_config_changes_hash(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("clt.lam = 0.05\n")
    main(["noise", "--out", str(tmp_path / "x")])
    main(["noise", "--out", str(tmp_path / "y"), "--config", str(cfg)])
    hx = json.loads((tmp_path / "x" / "manifest.json").read_text())["config_hash"]
    hy = json.loads((tmp_path / "y" / "manifest.json").read_text())["config_hash"]
    assert hx != hy


def test_cli_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense\n")
    assert main(["noise", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "expected" in capsys.readouterr().err


def test_cli_small_clt(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("clt.lam = 0.1\nclt.n_paths = 200\nclt.batch = 100\nclt.T = 1.0\n")
    assert main(["clt", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "clt.csv").read_bytes().split(b"\r\n")
    assert lines[0] == b"z" and len(lines) == 202
    assert (tmp_path / "oracle.csv").exists()
