import json
import os
import subprocess
import sys

import pytest

from twostage import cli
from twostage import config as cfgmod
from twostage.experiment import ConfigError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")

SMALL = """
seed = 5
[outcome]
family = "gaussian"
mu0 = 0.0
var0 = 1.0
mu1 = 0.0
var1 = 1.0

[design]
n1 = 60
n2 = 60
e0 = 0.5
m = 0.5

[selection]
kind = "thompson"
l_n = 0.1

[study]
theta = [0.0, 0.5]
epsilon = [0.2]
reps = 6
B = 200
sides = ["left", "right"]

[histogram]
c = [0.0, -5.0]
reps = 10
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return str(path)


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_shipped_configs_valid(capsys):
    for name in sorted(os.listdir(CONFIGS)):
        if name.startswith("invalid"):
            continue
        code, out, err = run(["validate-config", "--config", os.path.join(CONFIGS, name)], capsys)
        assert code == 0, (name, err)
        assert json.loads(out)["valid"] is True


def test_validate_assumption_3(capsys):
    code, _, err = run(["validate-config", "--config", os.path.join(CONFIGS, "invalid_constant_no_clip.toml")], capsys)
    assert code == 1
    assert "requires clip l_n > 0" in err


def test_unknown_subcommand(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 1
    assert "usage" in err


def test_unknown_flag(capsys):
    code, _, err = run(["limit-sample", "--bogus"], capsys)
    assert code == 1


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL + "\n[output]\ndir = 'x'\ncolour = 1\n")
    code, _, err = run(["validate-config", "--config", str(path)], capsys)
    assert code == 1 and "unknown keys" in err


def test_limit_sample_rows(tmp_path, capsys):
    out = tmp_path / "w.csv"
    code, _, _ = run(["limit-sample", "--c", "0", "--draws", "1000", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "w" and len(lines) == 1001
    code, _, _ = run(["limit-sample", "--c=-inf", "--draws", "10", "--out", str(out)], capsys)
    assert code == 0


def test_limit_sample_positive_c(capsys):
    assert run(["limit-sample", "--c", "1"], capsys)[0] == 1


def test_limit_sample_seeded(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["limit-sample", "--draws", "50", "--seed", "3", "--out", str(a)], capsys)
    run(["limit-sample", "--draws", "50", "--seed", "3", "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_simulate_then_test(tmp_path, small_cfg, capsys):
    trial = tmp_path / "trial.csv"
    code, out, _ = run(["simulate", "--config", small_cfg, "--out", str(trial)], capsys)
    assert code == 0 and json.loads(out)["n"] == 120
    code, out, _ = run(["test", "--data", str(trial), "--B", "500", "--side", "left"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert set(rec) == {"t_stat", "w_stat", "quantile", "p_value", "decision", "abstain", "floor_count", "clamp_count"}
    assert 0 < rec["p_value"] <= 1
    code, out2, _ = run(["test", "--data", str(trial), "--B", "500", "--side", "left"], capsys)
    assert out == out2
    code, out, _ = run(["test", "--data", str(trial), "--B", "500", "--format", "csv"], capsys)
    assert out.splitlines()[0].startswith("t_stat,w_stat")


def test_test_missing_file(capsys):
    assert run(["test", "--data", "/nonexistent.csv"], capsys)[0] == 1


def test_study_thread_invariance(tmp_path, small_cfg, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["study", "--config", small_cfg, "--threads", "1", "--out", str(a)], capsys)[0] == 0
    assert run(["study", "--config", small_cfg, "--threads", "2", "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a_pvalues.csv").read_bytes() == (tmp_path / "b_pvalues.csv").read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == ",".join(cli.mc.RESULT_FIELDS)


def test_qq_and_histogram(tmp_path, small_cfg, capsys):
    code, out, _ = run(["qq", "--config", small_cfg, "--out", str(tmp_path / "qq.csv")], capsys)
    assert code == 0 and json.loads(out)["rows"] > 0
    h = tmp_path / "h.csv"
    assert run(["histogram", "--config", small_cfg, "--out", str(h)], capsys)[0] == 0
    assert len(h.read_text().splitlines()) == 1 + 2 * 10


def test_gen_data_and_semisynthetic(tmp_path, capsys):
    data = tmp_path / "standin.csv"
    code, out, _ = run(["gen-semisynthetic-data", "--n-per-group", "300", "--rate", "0.2", "--out", str(data)], capsys)
    assert code == 0 and json.loads(out)["n"] == 600
    cfg = tmp_path / "semi.toml"
    cfg.write_text(
        'seed = 1\n[semisynthetic]\ndata = "standin.csv"\npermutations = 3\neta = [0.0, 0.1]\nepsilon = [0.2]\n'
        "n1 = 50\nn2 = 50\nB = 200\n"
    )
    out_csv = tmp_path / "semi.csv"
    assert run(["semisynthetic", "--config", str(cfg), "--out", str(out_csv)], capsys)[0] == 0
    assert len(out_csv.read_text().splitlines()) == 1 + 2 * 5


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "twostage", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "limit-sample" in res.stdout


def test_config_parse_defaults():
    doc = {"outcome": {"family": "bernoulli", "p0": 0.5, "p1": 0.5}, "design": {}, "selection": {"kind": "eps_greedy", "l_n": 0.05}, "study": {}}
    cfg = cfgmod.parse(doc)
    assert cfg.study.epsilon_grid == (0.1,)
    assert cfg.design.n == 1000


@pytest.mark.parametrize(
    "doc",
    [
        {"design": {"n1": 10}},
        {"selection": {"kind": "thompson"}, "design": {"n1": 10, "m": 0.0}},
        {"outcome": {"family": "gaussian", "mu0": 0, "var0": -1, "mu1": 0, "var1": 1}},
        {"threads": 0},
        {"study": {}},
    ],
)
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        cfgmod.parse(doc)
