"""Replication harness: rejection rates, per-replication p-values, QQ data
and sampling-distribution draws, all written as CSV.

Every replication owns keyed random streams (see ``rng``), so results are
identical whatever the worker count or the order work is scheduled in.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bootstrap as bs
from . import estimators as est
from . import rng as rngmod
from .experiment import ConfigError, DesignConfig, run_trial
from .outcomes import OutcomeModel

# method name -> (m, scaling); sample splitting has neither
METHODS = {
    "constant_U": (0.0, "U"),
    "constant_N": (0.0, "N"),
    "adaptive_U": (0.5, "U"),
    "adaptive_N": (0.5, "N"),
    "m1_U": (1.0, "U"),
    "m1_N": (1.0, "N"),
    "sample_split": (None, None),
}
FIVE_TESTS = ("constant_U", "constant_N", "adaptive_U", "adaptive_N", "sample_split")
WEIGHTING_NAMES = {0.0: "constant", 0.5: "adaptive", 1.0: "m1"}

RESULT_FIELDS = (
    "method",
    "weighting",
    "scaling",
    "epsilon",
    "theta",
    "side",
    "reps",
    "rejections",
    "abstentions",
    "rejection_rate",
    "mc_standard_error",
)
PVALUE_FIELDS = ("method", "epsilon", "theta", "side", "rep", "p_value", "reject", "abstain")


@dataclass(frozen=True)
class StudyConfig:
    """Grid study over signal strength theta and exploration rate epsilon.

    ``model`` is the theta = 0 law; each grid value shifts arm 0's location by
    theta. Each epsilon sets the clip l_N = epsilon / 2 on ``design.rule``.
    An empty ``epsilon_grid`` is not allowed; use ``(2 * clip,)`` to keep the
    design's own clip.
    """

    design: DesignConfig
    model: OutcomeModel
    theta_grid: tuple = (0.0,)
    epsilon_grid: tuple = (0.1,)
    methods: tuple = FIVE_TESTS
    reps: int = 2000
    B: int = 2000
    alpha: float = 0.05
    sides: tuple = ("right",)
    master_seed: int = 0
    clip_policy: str = "design"
    threads: int = 1

    def validate(self) -> list[str]:
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not self.theta_grid or not self.epsilon_grid:
            raise ConfigError("theta and epsilon grids must be nonempty")
        if not self.methods:
            raise ConfigError("at least one method is required")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; expected a subset of {list(METHODS)}")
        bad_sides = [s for s in self.sides if s not in ("left", "right")]
        if not self.sides or bad_sides:
            raise ConfigError("sides must be a nonempty subset of {left, right}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.B < 100 and any(METHODS[m][0] is not None for m in self.methods):
            raise ConfigError("bootstrap size B must be at least 100")
        if self.clip_policy not in bs.CLIP_POLICIES:
            raise ConfigError(f"clip_policy must be one of {bs.CLIP_POLICIES}")
        notes = []
        for eps in self.epsilon_grid:
            if not 0.0 <= eps < 1.0:
                raise ConfigError(f"epsilon={eps} must lie in [0, 1)")
            for m in sorted({METHODS[name][0] for name in self.methods} - {None}):
                notes += replace(self.cell_design(eps), m=m).validate()
        return sorted(set(notes))

    def cell_design(self, epsilon: float) -> DesignConfig:
        return replace(self.design, rule=self.design.rule.with_clip(epsilon / 2.0))

    def cell_model(self, theta: float) -> OutcomeModel:
        return self.model.shifted(theta) if theta else self.model

    def cells(self) -> list[tuple[int, float, float]]:
        """(cell key, theta, epsilon) in output order."""
        return [(cell_key(t, e), t, e) for t in self.theta_grid for e in self.epsilon_grid]


def cell_key(theta: float, epsilon: float) -> int:
    return rngmod.tag(f"theta={float(theta)!r};eps={float(epsilon)!r}")


@dataclass
class StudyResult:
    rows: list[dict]
    pvalues: list[dict] = field(default_factory=list)
    signal: str = "theta"  # name of the grid column ("eta" for the permutation study)

    def row(self, method: str, theta: float = 0.0, epsilon: float | None = None, side: str = "right") -> dict:
        for r in self.rows:
            if r["method"] == method and r[self.signal] == theta and r["side"] == side:
                if epsilon is None or r["epsilon"] == epsilon:
                    return r
        raise KeyError((method, theta, epsilon, side))

    def pvalues_for(self, method: str, theta: float = 0.0, epsilon: float | None = None, side: str = "right"):
        """Non-abstaining p-values of one test, in replication order."""
        return np.array(
            [
                p["p_value"]
                for p in self.pvalues
                if p["method"] == method
                and p[self.signal] == theta
                and p["side"] == side
                and (epsilon is None or p["epsilon"] == epsilon)
                and not p["abstain"]
            ]
        )

    def write(self, path: str):
        write_csv(path, _rename(RESULT_FIELDS, self.signal), self.rows)

    def write_pvalues(self, path: str):
        write_csv(path, _rename(PVALUE_FIELDS, self.signal), self.pvalues)


def _rename(fields, signal):
    return tuple(signal if f == "theta" else f for f in fields)


def mc_standard_error(rate: float, reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / reps)


def aggregate(records, methods, sides, cells, reps, signal="theta") -> list[dict]:
    """Exact integer tallies per (cell, method, side)."""
    counts = {}
    for r in records:
        key = (r[signal], r["epsilon"], r["method"], r["side"])
        rej, abst = counts.get(key, (0, 0))
        counts[key] = (rej + int(r["reject"]), abst + int(r["abstain"]))
    rows = []
    for _, theta, eps in cells:
        for method in methods:
            m, scaling = METHODS[method]
            for side in sides:
                rej, abst = counts.get((theta, eps, method, side), (0, 0))
                rate = rej / reps
                rows.append(
                    {
                        "method": method,
                        "weighting": WEIGHTING_NAMES.get(m, "split"),
                        "scaling": scaling or "",
                        "epsilon": eps,
                        signal: theta,
                        "side": side,
                        "reps": reps,
                        "rejections": rej,
                        "abstentions": abst,
                        "rejection_rate": rate,
                        "mc_standard_error": mc_standard_error(rate, reps),
                    }
                )
    return rows


def test_trial(data, methods, sides, alpha, B, rule, boot_rng_for, clip_policy="design") -> list[dict]:
    """Run every requested test on one trial; one record per (method, side)."""
    out = []
    by_m = {}
    for name in methods:
        m, scaling = METHODS[name]
        if m is not None:
            by_m.setdefault(m, []).append((name, scaling))
    for m, entries in by_m.items():
        scalings = tuple(sorted({s for _, s in entries}))
        res = bs.run_tests(data, m, alpha, B, boot_rng_for(m), rule, clip_policy, sides=sides, scalings=scalings)
        for name, scaling in entries:
            for side in sides:
                r = res[scaling, side]
                out.append({"method": name, "side": side, "p_value": r.p_value, "reject": r.decision, "abstain": r.abstain})
    if "sample_split" in methods:
        for side in sides:
            r = est.sample_split_test(data, alpha, side)
            out.append({"method": "sample_split", "side": side, "p_value": r.p_value, "reject": r.reject, "abstain": r.abstain})
    order = {name: i for i, name in enumerate(methods)}
    out.sort(key=lambda r: (order[r["method"]], r["side"]))
    return out


test_trial.__test__ = False


def _run_block(cfg: StudyConfig, cell: int, theta: float, eps: float, reps: range) -> list[dict]:
    design = cfg.cell_design(eps)
    model = cfg.cell_model(theta)
    records = []
    for rep in reps:
        data = run_trial(design, model, rngmod.rep_streams(cfg.master_seed, cell, rep))

        def boot_rng(m, rep=rep):
            return rngmod.boot_stream(cfg.master_seed, cell, rep, f"m={m}")

        for r in test_trial(data, cfg.methods, cfg.sides, cfg.alpha, cfg.B, design.rule, boot_rng, cfg.clip_policy):
            r.update(theta=theta, epsilon=eps, rep=rep)
            records.append(r)
    return records


def _blocks(cfg: StudyConfig, chunk: int):
    for cell, theta, eps in cfg.cells():
        for start in range(0, cfg.reps, chunk):
            yield cell, theta, eps, range(start, min(cfg.reps, start + chunk))


def run_study(cfg: StudyConfig, threads: int | None = None, chunk: int = 100) -> StudyResult:
    cfg.validate()
    threads = cfg.threads if threads is None else threads
    blocks = list(_blocks(cfg, chunk))
    if threads <= 1:
        parts = [_run_block(cfg, *b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_block, cfg, *b) for b in blocks]
            parts = [f.result() for f in futures]
    records = [r for part in parts for r in part]
    rows = aggregate(records, cfg.methods, cfg.sides, cfg.cells(), cfg.reps)
    pvalues = [{k: r[k] for k in PVALUE_FIELDS} for r in records]
    return StudyResult(rows=rows, pvalues=pvalues)


# ---- QQ ----------------------------------------------------------------


def uniform_grid(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / (n + 1.0)


def qq_max_deviation(pvals) -> float:
    """max_k |p_(k) - k / (n + 1)| over the sorted p-values."""
    p = np.sort(np.asarray(pvals, dtype=float))
    if len(p) == 0:
        return 0.0
    return float(np.max(np.abs(p - uniform_grid(len(p)))))


def ks_band(n: int, level_constant: float = 1.36) -> float:
    return level_constant / math.sqrt(n)


QQ_FIELDS = ("method", "epsilon", "theta", "side", "k", "p_value", "uniform_quantile")


def qq_rows(result: StudyResult) -> tuple[list[dict], dict]:
    """Sorted p-values against k/(n+1) per test; second item counts abstentions."""
    groups, abstained = {}, {}
    for p in result.pvalues:
        key = (p["method"], p["epsilon"], p[result.signal], p["side"])
        groups.setdefault(key, [])
        if p["abstain"]:
            abstained[key] = abstained.get(key, 0) + 1
        else:
            groups[key].append(p["p_value"])
    rows = []
    for key, vals in groups.items():
        vals = np.sort(vals)
        grid = uniform_grid(len(vals))
        for k, (pv, u) in enumerate(zip(vals, grid), start=1):
            rows.append(dict(zip(_rename(QQ_FIELDS, result.signal), (*key, k, float(pv), float(u)))))
    return rows, abstained


def qq_data(cfg: StudyConfig, threads: int | None = None) -> tuple[list[dict], dict]:
    return qq_rows(run_study(cfg, threads))


# ---- sampling distribution --------------------------------------------


@dataclass(frozen=True)
class HistogramConfig:
    """Finite-N draws of sqrt(N) T_N - c_N; arm 1's mean is -c_N / sqrt(N)."""

    design: DesignConfig
    model: OutcomeModel
    c_grid: tuple = (0.0, -5.0, -10.0, -15.0)
    reps: int = 5000
    m: float = 0.5
    master_seed: int = 0
    threads: int = 1

    def validate(self) -> list[str]:
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not self.c_grid:
            raise ConfigError("c grid must be nonempty")
        if any(c > 0 for c in self.c_grid):
            raise ConfigError("c_N values must be <= 0")
        return replace(self.design, m=self.m).validate()

    def cell_model(self, c: float) -> OutcomeModel:
        return self.model.shifted(-c / math.sqrt(self.design.n), arm=1) if c else self.model


def _histogram_block(cfg: HistogramConfig, c: float, reps: range) -> np.ndarray:
    model = cfg.cell_model(c)
    cell = rngmod.tag(f"c={float(c)!r}")
    root_n = math.sqrt(cfg.design.n)
    out = np.empty(len(reps))
    for i, rep in enumerate(reps):
        data = run_trial(cfg.design, model, rngmod.rep_streams(cfg.master_seed, cell, rep))
        out[i] = root_n * est.estimate(data, cfg.m).t_stat - c
    return out


def sampling_histogram(cfg: HistogramConfig, threads: int | None = None, chunk: int = 500) -> dict[float, np.ndarray]:
    cfg.validate()
    threads = cfg.threads if threads is None else threads
    blocks = [(c, range(s, min(cfg.reps, s + chunk))) for c in cfg.c_grid for s in range(0, cfg.reps, chunk)]
    if threads <= 1:
        parts = [_histogram_block(cfg, *b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = [f.result() for f in [pool.submit(_histogram_block, cfg, *b) for b in blocks]]
    out = {}
    for (c, _), part in zip(blocks, parts):
        out.setdefault(c, []).append(part)
    return {c: np.concatenate(v) for c, v in out.items()}


def histogram_rows(draws: dict[float, np.ndarray]) -> list[dict]:
    return [{"c_n": c, "rep": i, "value": float(v)} for c, arr in draws.items() for i, v in enumerate(arr)]


# ---- CSV ---------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: str, fields, rows):
    """UTF-8, LF line endings, header row always written."""
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[f]) for f in fields])
