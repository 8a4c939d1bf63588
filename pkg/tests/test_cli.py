import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from planar_riccati.cli import ConfigError, load_config, main, parse_config, validate

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def _report(out, command):
    data = json.loads((out / f"report-{command}.json").read_text())
    data.pop("timestamp")
    return data


def test_parse_system_block():
    cfg = parse_config('[system]\na12 = "sin(t)^2"\na21 = cos(t)^2\n[analysis]\nhorizon = 30\ninit = 1, 0\n')
    assert cfg.kind == "system" and cfg.horizon == 30.0 and tuple(cfg.init_pair) == (1.0, 0.0)


def test_riccati_block_embeds_as_system():
    cfg = load_config(CONFIGS / "riccati_fan.ini")
    assert cfg.kind == "riccati" and cfg.family == "riccati-fan" and len(cfg.inits) == 7


@pytest.mark.parametrize("text, needle", [
    ('[system]\na12 = "sin(t"\n', "a12"),
    ('[system]\na12 = "1"\n[riccati]\na = "1"\n', "exactly one"),
    ('[system]\nb12 = "1"\n', "b12"),
    ("[analysis]\nhorizon = 3\n", "exactly one"),
])
def test_config_errors_carry_location(text, needle):
    with pytest.raises(Exception) as info:
        validate(parse_config(text, "bad.ini"))
    assert needle in str(info.value)


def test_horizon_must_exceed_t0():
    with pytest.raises(ConfigError):
        validate(parse_config('[scalar]\nr = "t"\nt0 = 5\n[analysis]\nhorizon = 2\n'))


def test_exit_codes(tmp_path, capsys):
    assert main(["classify", "--config", str(CONFIGS / "cosh.ini"), "--out", str(tmp_path)]) == 0
    assert main(["bounds", "--config", str(CONFIGS / "cos_half.ini"), "--out", str(tmp_path)]) == 2
    assert _report(tmp_path, "bounds")["skipped"]
    bad = tmp_path / "bad.ini"
    bad.write_text('[system]\na12 = "exp(t"\n')
    assert main(["classify", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "bad.ini:2" in capsys.readouterr().err
    assert main(["classify", "--out", str(tmp_path)]) == 1


def test_reports_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, threads in ((a, "1"), (b, "3")):
        assert main(["riccati", "--config", str(CONFIGS / "riccati_fan.ini"), "--out", str(out),
                     "--threads", threads]) == 0
    assert _report(a, "riccati") == _report(b, "riccati")


def test_portrait_csvs(tmp_path):
    assert main(["portrait", "--config", str(CONFIGS / "riccati_fan.ini"), "--out", str(tmp_path),
                 "--threads", "2"]) == 0
    files = sorted(tmp_path.rglob("riccati-fan_*.csv"))
    assert len(files) == 7
    header = files[0].read_text().splitlines()[0]
    assert header.startswith("t,")
    assert list(tmp_path.rglob("riccati-fan_columns.txt"))


def test_check_subset(tmp_path, capsys):
    assert main(["check", "--criteria", "1,5", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS  1" in out and "PASS  5" in out
    assert _report(tmp_path, "check")["summary"]["failed"] == []


def test_module_entry_point(tmp_path):
    env = dict(os.environ, PLANAR_RICCATI_DISABLE_JIT="1")
    proc = subprocess.run([sys.executable, "-m", "planar_riccati", "stability", "--config",
                           str(CONFIGS / "sin2_cos2.ini"), "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env, timeout=600)
    assert proc.returncode == 0, proc.stderr
    assert _report(tmp_path, "stability")["backend"] == "python"
