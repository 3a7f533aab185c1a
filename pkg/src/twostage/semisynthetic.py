"""Permutation pipeline on a two-arm binary-outcome trial.

For each permutation: shuffle outcomes across the whole population (null),
flip a Binomial(N_c^0, eta) number of control zeros to one (signal), then
rerun a two-stage epsilon-greedy trial by drawing outcomes from the group
pools and apply every test. Group 0 is the control and plays arm 0, so a
positive signal raises arm 0's event rate and the tests are right-sided.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import montecarlo as mc
from . import rng as rngmod
from .experiment import ConfigError, DesignConfig, TrialData, run_trial
from .selection import SelectionRule

CSV_FIELDS = ("unit_id", "group", "outcome")


class TrialCsvError(ValueError):
    pass


@dataclass(frozen=True)
class TrialCsv:
    unit_id: np.ndarray
    group: np.ndarray
    outcome: np.ndarray

    def __post_init__(self):
        n = len(self.unit_id)
        if len(self.group) != n or len(self.outcome) != n:
            raise TrialCsvError("unit_id, group and outcome must have equal length")
        if not np.isin(self.group, (0, 1)).all():
            raise TrialCsvError("group must be 0 (control) or 1 (treatment)")
        if not np.isin(self.outcome, (0, 1)).all():
            raise TrialCsvError("outcomes must be binary 0/1")
        if not ((self.group == 0).any() and (self.group == 1).any()):
            raise TrialCsvError("both groups must be nonempty")

    @property
    def n(self) -> int:
        return len(self.unit_id)

    def pool(self, g: int) -> np.ndarray:
        return self.outcome[self.group == g]

    @property
    def control_zeros(self) -> int:
        """N_c^0: control units with outcome 0."""
        return int(np.sum((self.group == 0) & (self.outcome == 0)))

    def event_rate(self, g: int | None = None) -> float:
        y = self.outcome if g is None else self.pool(g)
        return float(y.mean())

    def with_outcome(self, outcome) -> "TrialCsv":
        return TrialCsv(self.unit_id, self.group, np.asarray(outcome, dtype=np.int8))

    @classmethod
    def load(cls, path: str) -> "TrialCsv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(CSV_FIELDS) - set(reader.fieldnames):
                raise TrialCsvError(f"{path}: header must contain {','.join(CSV_FIELDS)}")
            rows = list(reader)
        try:
            uid = np.array([int(r["unit_id"]) for r in rows], dtype=np.int64)
            grp = np.array([int(r["group"]) for r in rows], dtype=np.int8)
            out = np.array([int(float(r["outcome"])) for r in rows], dtype=np.int8)
            raw = np.array([float(r["outcome"]) for r in rows])
        except ValueError as exc:
            raise TrialCsvError(f"{path}: {exc}") from exc
        if np.any(raw != out):
            raise TrialCsvError(f"{path}: outcomes must be binary 0/1")
        return cls(uid, grp, out)

    def write(self, path: str):
        rows = [dict(zip(CSV_FIELDS, r)) for r in zip(self.unit_id.tolist(), self.group.tolist(), self.outcome.tolist())]
        mc.write_csv(path, CSV_FIELDS, rows)


def standin_data(n_per_group: int = 4680, rates: tuple[float, float] = (0.09, 0.09), rng=None) -> TrialCsv:
    """Synthetic stand-in for a restricted trial data set: sparse binary events.

    Each group gets exactly round(rate * n_per_group) events at random positions.
    """
    rng = rngmod.as_generator(rng)
    group = np.repeat(np.array([0, 1], dtype=np.int8), n_per_group)
    parts = []
    for r in rates:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"event rate {r} must lie in [0, 1]")
        y = np.zeros(n_per_group, dtype=np.int8)
        y[: int(round(r * n_per_group))] = 1
        parts.append(rng.permutation(y))
    return TrialCsv(np.arange(1, 2 * n_per_group + 1), group, np.concatenate(parts))


def permute_outcomes(data: TrialCsv, rng) -> TrialCsv:
    return data.with_outcome(rng.permutation(data.outcome))


def inject_signal(data: TrialCsv, eta: float, rng) -> TrialCsv:
    """Flip n0 ~ Binomial(N_c^0, eta) control zeros, chosen uniformly, to one."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta={eta} must lie in [0, 1]")
    zeros = np.flatnonzero((data.group == 0) & (data.outcome == 0))
    n0 = int(rng.binomial(len(zeros), eta))
    if n0 == 0:
        return data
    out = data.outcome.copy()
    out[rng.choice(zeros, size=n0, replace=False)] = 1
    return data.with_outcome(out)


class PoolSampler:
    """Outcome law given by each group's empirical pool.

    With ``replace=False`` each arm's pool is shuffled once and consumed in
    order, so a trial never reuses a unit (needs pool sizes >= n1 + n2).
    """

    def __init__(self, data: TrialCsv, replace: bool = False):
        self.pools = (data.pool(0).astype(float), data.pool(1).astype(float))
        self.replace = replace
        self._order = [None, None]
        self._next = [0, 0]

    def sample(self, arm: int, size: int, rng: np.random.Generator) -> np.ndarray:
        pool = self.pools[arm]
        if self.replace:
            return pool[rng.integers(0, len(pool), size)]
        if self._order[arm] is None:
            self._order[arm] = rng.permutation(len(pool))
        start = self._next[arm]
        if start + size > len(pool):
            raise TrialCsvError(f"group {arm} has {len(pool)} units; cannot draw {start + size} without replacement")
        self._next[arm] = start + size
        return pool[self._order[arm][start : start + size]]


def resample_design(epsilon: float, n1: int, n2: int) -> DesignConfig:
    return DesignConfig(n1, n2, 0.5, SelectionRule("eps_greedy", epsilon / 2.0))


def adaptive_resample(data: TrialCsv, epsilon: float, n1: int, n2: int, rng, replace: bool = False) -> TrialData:
    """Two-stage epsilon-greedy trial with outcomes drawn from the group pools.

    ``rng`` is a Generator or a (stage 1, stage 2) pair.
    """
    return run_trial(resample_design(epsilon, n1, n2), PoolSampler(data, replace), rng)


@dataclass(frozen=True)
class SemiConfig:
    permutations: int = 500
    eta_grid: tuple = (0.0, 0.015, 0.03, 0.045, 0.06)
    epsilon_grid: tuple = (0.1, 0.2, 0.4)
    n1: int = 1000
    n2: int = 1000
    alpha: float = 0.05
    side: str = "right"
    B: int = 2000
    methods: tuple = mc.FIVE_TESTS
    # without replacement the resampled units are a simple random sample of
    # the permuted population, so the eta = 0 null is exact
    replace: bool = False
    master_seed: int = 0
    clip_policy: str = "design"
    threads: int = 1

    def validate(self) -> list[str]:
        if self.permutations < 1:
            raise ConfigError("permutations must be >= 1")
        if not self.eta_grid or not self.epsilon_grid:
            raise ConfigError("eta and epsilon grids must be nonempty")
        if any(not 0.0 <= e <= 1.0 for e in self.eta_grid):
            raise ConfigError("eta values must lie in [0, 1]")
        if any(not 0.0 < e < 1.0 for e in self.epsilon_grid):
            raise ConfigError("epsilon values must lie in (0, 1); the adaptive weighting needs a positive clip")
        if self.side not in ("left", "right"):
            raise ConfigError("side must be 'left' or 'right'")
        unknown = [m for m in self.methods if m not in mc.METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}")
        notes = []
        for eps in self.epsilon_grid:
            for m in sorted({mc.METHODS[name][0] for name in self.methods} - {None}):
                d = resample_design(eps, self.n1, self.n2)
                notes += DesignConfig(d.n1, d.n2, d.e0, d.rule, m=m).validate()
        return sorted(set(notes))


def _semi_block(cfg: SemiConfig, data: TrialCsv, perms: range) -> list[dict]:
    cell = rngmod.tag("semisynthetic")
    records = []
    for perm in perms:
        base = permute_outcomes(data, rngmod.stream(cfg.master_seed, cell, perm, rngmod.PERMUTE))
        for eta in cfg.eta_grid:
            # signal and trial streams depend on the permutation only, so
            # cells along the eta and epsilon grids share random numbers
            injected = inject_signal(base, eta, rngmod.stream(cfg.master_seed, cell, perm, rngmod.SIGNAL))
            for eps in cfg.epsilon_grid:
                trial = adaptive_resample(
                    injected, eps, cfg.n1, cfg.n2, rngmod.rep_streams(cfg.master_seed, cell, perm), cfg.replace
                )
                rule = resample_design(eps, cfg.n1, cfg.n2).rule

                def boot_rng(m, perm=perm, eta=eta, eps=eps):
                    return rngmod.boot_stream(cfg.master_seed, cell, perm, f"m={m};eta={eta!r};eps={eps!r}")

                for r in mc.test_trial(trial, cfg.methods, (cfg.side,), cfg.alpha, cfg.B, rule, boot_rng, cfg.clip_policy):
                    r.update(eta=eta, epsilon=eps, rep=perm)
                    records.append(r)
    return records


def run_semisynthetic(cfg: SemiConfig, data: TrialCsv, threads: int | None = None, chunk: int = 25) -> mc.StudyResult:
    cfg.validate()
    threads = cfg.threads if threads is None else threads
    blocks = [range(s, min(cfg.permutations, s + chunk)) for s in range(0, cfg.permutations, chunk)]
    if threads <= 1:
        parts = [_semi_block(cfg, data, b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = [f.result() for f in [pool.submit(_semi_block, cfg, data, b) for b in blocks]]
    records = [r for part in parts for r in part]
    cells = [(0, eta, eps) for eta in cfg.eta_grid for eps in cfg.epsilon_grid]
    rows = mc.aggregate(records, cfg.methods, (cfg.side,), cells, cfg.permutations, signal="eta")
    pvalues = [{k: r[k] for k in mc._rename(mc.PVALUE_FIELDS, "eta")} for r in records]
    return mc.StudyResult(rows=rows, pvalues=pvalues, signal="eta")
