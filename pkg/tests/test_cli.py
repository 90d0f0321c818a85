import json
from pathlib import Path
import subprocess
import sys

import numpy as np
import pytest

from hmmdeconv import noise as N
from hmmdeconv.cli import main, read_observations
from hmmdeconv.config import ConfigError, parse_config
from hmmdeconv.estimate1d import PenaltyConfig, write_estimate_1d
from hmmdeconv.estimate2d import write_estimate_2d
from hmmdeconv.simulate import AR1Chain
from hmmdeconv.transition import estimate_transition, write_transition

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """\
chain.kind = ar1
chain.alpha = 0.5
noise.kind = identity
simulate.n = 400
simulate.seed = 3
study.n_list = 300, 600, 1200
study.replicates = 2
study.grid_points = 128
calibrate.n = 300
calibrate.replicates = 4
transition.grid_points = 21
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(Path(d).rglob("*")) if p.is_file()}


def test_simulate_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    meta = json.loads((tmp_path / "a" / "path.meta.json").read_text())
    assert meta["seed"] == 3 and meta["rows"] == 401


def test_simulate_n_zero_fails_before_writing(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    out = tmp_path / "never"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--n", "0"]) == 1
    assert not out.exists()
    assert "n must be >= 1" in capsys.readouterr().err
    bad = write_cfg(tmp_path, SMALL.replace("simulate.n = 400", "simulate.n = 0"), "bad.cfg")
    assert main(["simulate", "--config", bad, "--out", str(out)]) == 1
    assert not out.exists()


def test_shipped_ar1_config_row_contract(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(CONFIGS / "ar1_identity.cfg"), "--out", str(out)]) == 0
    lines = (out / "path.csv").read_text().splitlines()
    n = parse_config((CONFIGS / "ar1_identity.cfg").read_text()).sim_n
    assert lines[0] == "i,x_i,y_i" and len(lines) == n + 2


def test_estimate_matches_library_calls(tmp_path):
    y = AR1Chain(0.5, 0.0, 1.0).sample(600, 11)
    data = tmp_path / "obs.csv"
    data.write_text("t,y\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(y.tolist())))
    cfg = write_cfg(tmp_path, SMALL + f"estimate.input = {data.name}\nplot.render = false\n")
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "cli")]) == 0

    gold = tmp_path / "gold"
    gold.mkdir()
    est = estimate_transition(y, N.identity(), PenaltyConfig())
    write_estimate_1d(gold / "f_coeffs.csv", est.f_est)
    write_estimate_2d(gold / "F_coeffs.csv", est.F_est)
    write_transition(gold / "pi_grid.csv", est, 21)
    for name in ("f_coeffs.csv", "F_coeffs.csv", "pi_grid.csv", "pi_grid.csv.meta.json"):
        assert (tmp_path / "cli" / name).read_bytes() == (gold / name).read_bytes(), name
    report = (tmp_path / "cli" / "report.txt").read_text()
    assert "check Delta(m_hat) <= n: passed" in report
    assert "check Delta(M_hat)^2 <= n: passed" in report


def test_estimate_renders_figure(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "e")]) == 0
    png = (tmp_path / "e" / "estimate.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_missing_noise_is_a_validation_error(tmp_path):
    cfg = write_cfg(tmp_path, SMALL.replace("noise.kind = identity\n", ""))
    out = tmp_path / "x"
    assert main(["estimate", "--config", cfg, "--out", str(out)]) == 1
    assert not out.exists()


def test_single_replicate_is_rejected(tmp_path):
    cfg = write_cfg(tmp_path, SMALL.replace("study.replicates = 2", "study.replicates = 1"))
    out = tmp_path / "x"
    assert main(["risk-study", "--config", cfg, "--out", str(out)]) == 1
    assert not out.exists()


def test_runtime_failure_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL.replace("noise.kind = identity", "noise.kind = laplace")
                    .replace("simulate.n = 400", "simulate.n = 100"))
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert "no admissible model" in capsys.readouterr().err


def test_shipped_laplace_study_summary(tmp_path):
    cfg = str(CONFIGS / "ar1_laplace_study.cfg")
    for d in ("a", "b"):
        assert main(["risk-study", "--config", cfg, "--out", str(tmp_path / d), "--threads", str(2 + (d == "b"))]) == 0
    summary = (tmp_path / "a" / "summary.txt").read_text()
    assert "predicted.mise_f.regime = r>0, s=0" in summary
    assert "predicted.mise_f.rate = (ln n)^2.5/n (near-parametric)" in summary
    assert "fitted.mise_f.slope = -" in summary
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    gp = (tmp_path / "a" / "mise_vs_n.gp").read_text()
    assert gp.startswith("set logscale xy") and "plot $mise_f" in gp


def test_malformed_csv_names_row_and_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("y\n1.0\n2.0\nabc\n3.0\n")
    with pytest.raises(ConfigError, match="row 4, column 'y'"):
        read_observations(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError, match="no 'y' column"):
        read_observations(p)
    p.write_text("i,y\n1,2.0\n2\n")
    with pytest.raises(ConfigError, match="row 3 has 1 fields"):
        read_observations(p)


def test_calibrate_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["calibrate-penalty", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["calibrate-penalty", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    text = (tmp_path / "a" / "calibration.txt").read_text()
    assert "kappa1 = " in text and "kappa2 = " in text


def test_config_errors():
    with pytest.raises(ConfigError, match="line 1: unknown key"):
        parse_config("bogus.key = 1\n")
    with pytest.raises(ConfigError, match="unknown noise kind"):
        parse_config("noise.kind = cauchy\n")
    with pytest.raises(ConfigError, match="missing noise.tau"):
        parse_config("noise.kind = gaussian\n")
    with pytest.raises(ConfigError, match="duplicate key"):
        parse_config("simulate.n = 3\nsimulate.n = 4\n")
    with pytest.raises(ConfigError, match="chain: "):
        parse_config("chain.kind = ar1\nchain.alpha = 1.5\n")
    cfg = parse_config("noise.kind = gaussian\nnoise.tau = 0.5\n")
    assert cfg.noise().params == {"tau": 0.5}


def test_bad_arguments_exit_one(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["simulate", "--config", cfg, "--seed", "-4"]) == 1
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["bogus"]) == 1


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    res = subprocess.run([sys.executable, "-m", "hmmdeconv", "simulate", "--config", cfg,
                          "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert np.loadtxt(tmp_path / "m" / "path.csv", delimiter=",", skiprows=1).shape == (401, 3)
