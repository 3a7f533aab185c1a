import math

import numpy as np
import pytest

from twostage import estimators as est
from twostage import semisynthetic as semi
from twostage.semisynthetic import TrialCsv, TrialCsvError


def small(rate=0.2, n=200, seed=0):
    return semi.standin_data(n, (rate, rate), np.random.default_rng(seed))


def test_standin_counts():
    d = semi.standin_data(4680, (0.09, 0.09), np.random.default_rng(0))
    assert d.n == 9360
    assert int(d.pool(0).sum()) == int(d.pool(1).sum()) == 421
    assert d.event_rate() < 0.1


def test_permute_preserves_sum_and_constant():
    d = small()
    p = semi.permute_outcomes(d, np.random.default_rng(1))
    assert p.outcome.sum() == d.outcome.sum()
    const = d.with_outcome(np.ones(d.n))
    assert np.array_equal(semi.permute_outcomes(const, np.random.default_rng(1)).outcome, const.outcome)


def test_permutation_null_centred():
    d = small(0.3, 300)
    rng = np.random.default_rng(2)
    diffs = []
    for _ in range(500):
        p = semi.permute_outcomes(d, rng)
        diffs.append(p.pool(0).mean() - p.pool(1).mean())
    diffs = np.array(diffs)
    assert abs(diffs.mean()) < 3 * diffs.std(ddof=1) / math.sqrt(len(diffs))


def test_inject_edge_cases():
    d = small()
    assert semi.inject_signal(d, 0.0, np.random.default_rng(0)) is d
    full = semi.inject_signal(d, 1.0, np.random.default_rng(0))
    assert np.all(full.pool(0) == 1)
    assert np.array_equal(full.pool(1), d.pool(1))


def test_inject_expected_flips():
    d = small(0.1, 2000)
    nz = d.control_zeros
    rng = np.random.default_rng(3)
    flips = np.array([semi.inject_signal(d, 0.03, rng).outcome.sum() - d.outcome.sum() for _ in range(500)])
    se = math.sqrt(nz * 0.03 * 0.97 / 500)
    assert abs(flips.mean() - 0.03 * nz) < 3 * se


def test_zero_pools_give_zero_statistic():
    d = small(0.0)
    trial = semi.adaptive_resample(d, 0.2, 50, 50, np.random.default_rng(0))
    assert trial.s1 == (0.0, 0.0)
    assert est.test_statistics(trial, 0.5)[0] == 0.0


def test_followup_probabilities():
    d = small(0.3, 500)
    seen = {semi.adaptive_resample(d, 0.4, 100, 100, np.random.default_rng(s)).p2_arm0 for s in range(30)}
    assert seen <= {0.2, 0.8}


def test_resample_reproducible_and_binary():
    d = small()
    a = semi.adaptive_resample(d, 0.2, 80, 80, np.random.default_rng(5))
    b = semi.adaptive_resample(d, 0.2, 80, 80, np.random.default_rng(5))
    assert np.array_equal(a.y2, b.y2) and np.array_equal(a.a2, b.a2)
    assert set(np.unique(np.concatenate([a.y1, a.y2]))) <= {0.0, 1.0}


def test_without_replacement_exhausts():
    d = small(n=50)
    with pytest.raises(TrialCsvError):
        semi.adaptive_resample(d, 0.2, 60, 60, np.random.default_rng(0))
    semi.adaptive_resample(d, 0.2, 60, 60, np.random.default_rng(0), replace=True)


def test_csv_roundtrip(tmp_path):
    d = small()
    path = tmp_path / "t.csv"
    d.write(path)
    back = TrialCsv.load(path)
    assert np.array_equal(back.outcome, d.outcome) and np.array_equal(back.group, d.group)


@pytest.mark.parametrize(
    "body",
    [
        "unit_id,group,outcome\n1,0,2\n2,1,0\n",
        "unit_id,group,outcome\n1,0,1\n2,0,0\n",
        "unit_id,group,outcome\n1,0,0.5\n2,1,0\n",
        "id,group,outcome\n1,0,1\n",
    ],
)
def test_csv_validation(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(TrialCsvError):
        TrialCsv.load(path)


def test_run_small_and_thread_invariant(tmp_path):
    d = small(0.2, 400)
    cfg = semi.SemiConfig(permutations=6, eta_grid=(0.0, 0.3), epsilon_grid=(0.2,), n1=60, n2=60, B=200, master_seed=4)
    a = semi.run_semisynthetic(cfg, d, threads=1, chunk=2)
    b = semi.run_semisynthetic(cfg, d, threads=2, chunk=4)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write(pa)
    b.write(pb)
    assert pa.read_bytes() == pb.read_bytes()
    assert pa.read_text().splitlines()[0].split(",")[4] == "eta"
    for r in a.rows:
        assert r["reps"] == 6


def test_semi_validate():
    with pytest.raises(Exception):
        semi.SemiConfig(epsilon_grid=(0.0,)).validate()
    with pytest.raises(Exception):
        semi.SemiConfig(side="both").validate()
