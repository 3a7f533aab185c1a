import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twostage import montecarlo as mc
from twostage.experiment import ConfigError, DesignConfig
from twostage.outcomes import OutcomeModel
from twostage.selection import SelectionRule

GAUSS = OutcomeModel.gaussian(0.0, 1.0, 0.0, 1.0)


def study(**kw):
    base = dict(
        design=DesignConfig(50, 50, 0.5, SelectionRule("thompson", 0.1)),
        model=GAUSS,
        theta_grid=(0.0,),
        epsilon_grid=(0.2,),
        methods=mc.FIVE_TESTS,
        reps=6,
        B=200,
        alpha=0.05,
        sides=("left", "right"),
        master_seed=3,
    )
    base.update(kw)
    return mc.StudyConfig(**base)


def test_single_rep_rates():
    res = mc.run_study(study(reps=1))
    assert len(res.rows) == 5 * 2
    for r in res.rows:
        assert r["rejection_rate"] in (0.0, 1.0)


def test_row_invariants():
    res = mc.run_study(study(theta_grid=(0.0, 0.5), reps=8))
    for r in res.rows:
        assert r["rejection_rate"] == r["rejections"] / r["reps"]
        rate = r["rejection_rate"]
        assert r["mc_standard_error"] == math.sqrt(rate * (1 - rate) / r["reps"])
        assert isinstance(r["rejections"], int)
    assert len(res.pvalues) == 2 * 8 * 5 * 2


def test_thread_invariance(tmp_path):
    cfg = study(reps=10)
    a = mc.run_study(cfg, threads=1, chunk=3)
    b = mc.run_study(cfg, threads=2, chunk=4)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write(pa)
    b.write(pb)
    assert pa.read_bytes() == pb.read_bytes()
    a.write_pvalues(pa)
    b.write_pvalues(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_seed_changes_output():
    a = mc.run_study(study(master_seed=1))
    b = mc.run_study(study(master_seed=2))
    assert [p["p_value"] for p in a.pvalues] != [p["p_value"] for p in b.pvalues]


def test_cell_uses_epsilon_clip():
    cfg = study()
    assert cfg.cell_design(0.4).rule.clip == pytest.approx(0.2)
    assert cfg.cell_model(0.3).mean(0) == pytest.approx(0.3)


@pytest.mark.parametrize(
    "kw",
    [dict(reps=0), dict(theta_grid=()), dict(methods=("nope",)), dict(sides=("up",)), dict(epsilon_grid=())],
)
def test_validate_rejects(kw):
    with pytest.raises(ConfigError):
        study(**kw).validate()


def test_constant_model_all_abstain():
    res = mc.run_study(study(model=OutcomeModel.constant(0.0, 0.0), methods=("adaptive_U", "adaptive_N"), reps=4))
    rows, abstained = mc.qq_rows(res)
    assert rows == []
    assert sum(abstained.values()) == 4 * 2 * 2
    assert all(r["abstentions"] == 4 for r in res.rows)


def test_qq_uniform_grid_zero():
    assert mc.qq_max_deviation(mc.uniform_grid(2000)) == 0.0
    assert mc.ks_band(2000) == pytest.approx(0.0304, abs=1e-4)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=100))
def test_qq_deviation_bounds(ps):
    d = mc.qq_max_deviation(ps)
    assert 0 <= d <= 1


def test_histogram_constant_zero():
    cfg = mc.HistogramConfig(
        design=DesignConfig(50, 50, 0.5, SelectionRule("eps_greedy", 0.05)),
        model=OutcomeModel.constant(0.0, 0.0),
        c_grid=(0.0,),
        reps=20,
    )
    draws = mc.sampling_histogram(cfg)
    assert np.all(draws[0.0] == 0.0)


def test_histogram_cell_model():
    cfg = mc.HistogramConfig(
        design=DesignConfig(500, 500, 0.5, SelectionRule("eps_greedy", 0.025)),
        model=OutcomeModel.gaussian(0, 1, 0, 9),
    )
    assert math.sqrt(1000) * (cfg.cell_model(-15.0).mean(0) - cfg.cell_model(-15.0).mean(1)) == pytest.approx(-15.0)


def test_write_csv_format(tmp_path):
    path = tmp_path / "x.csv"
    mc.write_csv(path, ("a", "b"), [{"a": 0.1, "b": True}])
    assert path.read_bytes() == b"a,b\n0.1,1\n"
