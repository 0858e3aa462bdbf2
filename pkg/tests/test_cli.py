import json
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

from setcf.cli import EXIT_CONFIG, EXIT_OK, EXIT_REFUTED, RunConfig, build_parser, render_report, run

CONFIG = """
[model]
kind = "binary_roy"

[simulate]
n = {n}
seed = 11

[theta]
mu = [0.2, 0.4]
f = [0.3]
pi = [{{ z = [0], x = [], value = 0.3 }}, {{ z = [1], x = [], value = 0.7 }}]

[grid]
mu = [{{ start = -1.0, stop = 1.0, num = 5 }}, {{ start = -1.0, stop = 1.0, num = 5 }}]
f = [{{ start = -0.6, stop = 0.6, num = 3 }}]
pi = [
  {{ z = [0], x = [], values = [0.2, 0.3, 0.4] }},
  {{ z = [1], x = [], values = [0.6, 0.7, 0.8] }},
]

[bounds]
functionals = [{{ name = "ASF", d = 0 }}, {{ name = "ASF", d = 1 }}, {{ name = "SWITCH" }}]

[inference]
alpha = 0.05
K = 20
seed = 3

[output]
dir = "{out}"
"""


def write_config(tmp_path, n=600, out="out", text=None):
    path = tmp_path / "run.toml"
    path.write_text(text or CONFIG.format(n=n, out=(tmp_path / out).as_posix()), encoding="utf-8")
    return str(path)


def test_full_pipeline(tmp_path, capsys):
    cfg = write_config(tmp_path)
    for cmd in ("simulate", "containment", "identify", "bounds", "ci", "report"):
        assert run([cmd, "--config", cfg]) == EXIT_OK, cmd
    out = tmp_path / "out"
    for name in ("data.csv", "latent.csv", "containment.csv", "region.csv", "region.json", "bounds.csv",
                 "ci.json", "report.txt"):
        assert (out / name).exists(), name
    bounds = pd.read_csv(out / "bounds.csv")
    assert (bounds["lower"] <= bounds["upper"]).all()
    assert any(bounds["functional"].str.startswith("ATE"))
    doc = json.loads((out / "ci.json").read_text())
    assert doc["alpha"] == 0.05 and doc["K"] == 20 and doc["threshold"] == pytest.approx(20.0)
    assert doc["config"]["seed"] == 3
    report = (out / "report.txt").read_text()
    assert "confidence interval" in report and "functional bounds" in report


def test_simulate_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, n=300)
    assert run(["simulate", "--config", cfg]) == EXIT_OK
    first = (tmp_path / "out" / "data.csv").read_bytes()
    assert run(["simulate", "--config", cfg, "--out-dir", str(tmp_path / "again")]) == EXIT_OK
    assert (tmp_path / "again" / "data.csv").read_bytes() == first
    assert run(["simulate", "--config", cfg, "--seed", "12", "--out-dir", str(tmp_path / "other")]) == EXIT_OK
    assert (tmp_path / "other" / "data.csv").read_bytes() != first


def test_overrides_are_recorded(tmp_path):
    cfg = write_config(tmp_path)
    assert run(["simulate", "--config", cfg]) == EXIT_OK
    assert run(["identify", "--config", cfg, "--slack", "0.2", "--constraints", "mts"]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "region.json").read_text())
    assert doc["slack"] == 0.2 and doc["constraints"] == ["mts"]


class TestConfigErrors:
    def test_unknown_kind(self, tmp_path):
        cfg = write_config(tmp_path, text='[model]\nkind = "probit"\n')
        assert run(["simulate", "--config", cfg]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert run(["simulate", "--config", str(tmp_path / "none.toml")]) == EXIT_CONFIG

    def test_bad_toml(self, tmp_path):
        cfg = write_config(tmp_path, text="[model\nkind=")
        assert run(["identify", "--config", cfg]) == EXIT_CONFIG

    def test_data_without_header(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        out.mkdir()
        (out / "data.csv").write_text("1,0,1\n0,1,0\n", encoding="utf-8")
        assert run(["identify", "--config", cfg]) == EXIT_CONFIG

    def test_missing_values(self, tmp_path):
        cfg = write_config(tmp_path)
        assert run(["simulate", "--config", cfg]) == EXIT_OK
        path = tmp_path / "out" / "data.csv"
        frame = pd.read_csv(path)
        frame.loc[3, "y"] = None
        frame.to_csv(path, index=False)
        assert run(["bounds", "--config", cfg]) == EXIT_CONFIG

    def test_no_data(self, tmp_path):
        cfg = write_config(tmp_path)
        assert run(["identify", "--config", cfg]) == EXIT_CONFIG

    def test_bad_alpha(self, tmp_path):
        cfg = write_config(tmp_path)
        assert run(["ci", "--config", cfg, "--alpha", "1.5"]) == EXIT_CONFIG

    def test_unknown_constraint(self, tmp_path):
        cfg = write_config(tmp_path)
        assert run(["identify", "--config", cfg, "--constraints", "convex"]) == EXIT_CONFIG


def test_refuted_exit_code(tmp_path):
    # a grid whose propensities are far from the data cannot pass at zero slack
    cfg_text = CONFIG.format(n=2000, out=(tmp_path / "out").as_posix()).replace("[0.2, 0.3, 0.4]", "[0.9]")
    cfg = write_config(tmp_path, text=cfg_text)
    assert run(["simulate", "--config", cfg]) == EXIT_OK
    assert run(["identify", "--config", cfg, "--slack", "0"]) == EXIT_REFUTED
    assert run(["bounds", "--config", cfg, "--slack", "0"]) == EXIT_REFUTED
    assert "REFUTED" in render_report(tmp_path / "out")


def test_defaults():
    cfg = RunConfig("binary_roy")
    assert (cfg.alpha, cfg.K, cfg.threads) == (0.05, 200, 1)
    args = build_parser().parse_args(["ci", "--config", "x.toml"])
    assert args.K is None and args.alpha is None


def test_empty_report(tmp_path):
    assert "no artifacts found" in render_report(tmp_path)


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, n=200)
    proc = subprocess.run([sys.executable, "-m", "setcf.cli", "simulate", "--config", cfg], capture_output=True,
                          text=True)
    assert proc.returncode == EXIT_OK
    assert Path(tmp_path / "out" / "data.csv").exists()
