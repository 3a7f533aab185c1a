"""Weighted IPW estimators and the T_N / W_N test statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .experiment import TrialData

PROPENSITY_EPS = 1e-12


class InconsistentDataError(ValueError):
    """Units were assigned to an arm whose recorded propensity is zero."""


class DegenerateArmError(ValueError):
    """No stage carries positive weight for the arm."""


def ipw_stage(data: TrialData, t: int, s: int, power: int = 1) -> tuple[float, np.ndarray]:
    """Stage-t IPW mean and per-unit terms 1(A=s) Y^power / ē(s).

    A stage whose propensity for ``s`` is zero yields (0, zeros), provided no
    unit was actually assigned to ``s``.
    """
    a, y = data.stage(t)
    e = data.propensity(t, s)
    hit = a == s
    if e < PROPENSITY_EPS:
        if np.any(hit):
            raise InconsistentDataError(f"stage {t} has units on arm {s} but propensity {e}")
        return 0.0, np.zeros(len(a))
    if len(a) == 0:
        return 0.0, np.zeros(0)
    per_unit = np.where(hit, y**power, 0.0) / e
    return float(per_unit.mean()), per_unit


def stage_weights(data: TrialData, m: float, s: int) -> np.ndarray:
    """Realised N_t h_t(s) / sum_t N_t h_t(s) with h_t(s) proportional to ē^m."""
    raw = np.zeros(2)
    for i, t in enumerate((1, 2)):
        n_t = data.n1 if t == 1 else data.n2
        e = data.propensity(t, s)
        if n_t == 0 or e < PROPENSITY_EPS:
            continue
        raw[i] = n_t * e**m
    total = raw.sum()
    if total <= 0:
        raise DegenerateArmError(f"no stage has positive weight for arm {s}")
    return raw / total


def _weighted(data: TrialData, m: float, s: int, power: int) -> float:
    w = stage_weights(data, m, s)
    return sum(w[i] * ipw_stage(data, t, s, power)[0] for i, t in enumerate((1, 2)) if w[i] > 0)


def wipw(data: TrialData, m: float, s: int) -> float:
    return _weighted(data, m, s, 1)


def wipws(data: TrialData, m: float, s: int) -> float:
    """Same weighting applied to squared outcomes; estimates E[Y(s)^2]."""
    return _weighted(data, m, s, 2)


def variance_hat(data: TrialData, m: float, s: int, centre: float | None = None) -> float:
    w = stage_weights(data, m, s)
    mu = wipw(data, m, s) if centre is None else centre
    total = 0.0
    for i, t in enumerate((1, 2)):
        if w[i] == 0:
            continue
        _, per_unit = ipw_stage(data, t, s)
        n_t = len(per_unit)
        total += w[i] ** 2 * float(np.sum((per_unit - mu) ** 2)) / n_t**2
    return total


def test_statistics(data: TrialData, m: float) -> tuple[float, float, float]:
    """(T_N, W_N, S_hat) with W_N = sqrt(N) T_N / S_hat; nan when S_hat = 0."""
    t_stat = wipw(data, m, 0) - wipw(data, m, 1)
    s_hat = math.sqrt(data.n * (variance_hat(data, m, 0) + variance_hat(data, m, 1)))
    w_stat = math.sqrt(data.n) * t_stat / s_hat if s_hat > 0 else math.nan
    return t_stat, w_stat, s_hat


test_statistics.__test__ = False  # not a pytest test


@dataclass
class EstimateReport:
    m: float
    lambda_hat: np.ndarray  # [stage, arm]
    stage_weights: np.ndarray  # [stage, arm]
    wipw: np.ndarray
    wipws: np.ndarray
    v_hat: np.ndarray
    t_stat: float
    s_hat: float
    w_stat: float
    n: int

    @property
    def root_n_t(self) -> float:
        return math.sqrt(self.n) * self.t_stat

    @property
    def w_finite(self) -> bool:
        return math.isfinite(self.w_stat)


def estimate(data: TrialData, m: float) -> EstimateReport:
    """All point estimates for one weighting, computed in one pass."""
    lam = np.zeros((2, 2))
    lam2 = np.zeros((2, 2))
    units = {}
    weights = np.zeros((2, 2))
    for s in (0, 1):
        weights[:, s] = stage_weights(data, m, s)
        for i, t in enumerate((1, 2)):
            lam[i, s], units[t, s] = ipw_stage(data, t, s)
            lam2[i, s], _ = ipw_stage(data, t, s, power=2)
    mu = (weights * lam).sum(axis=0)
    mu2 = (weights * lam2).sum(axis=0)
    v = np.zeros(2)
    for s in (0, 1):
        for i, t in enumerate((1, 2)):
            if weights[i, s] > 0:
                u = units[t, s]
                v[s] += weights[i, s] ** 2 * float(np.sum((u - mu[s]) ** 2)) / len(u) ** 2
    t_stat = float(mu[0] - mu[1])
    s_hat = math.sqrt(data.n * (v[0] + v[1]))
    w_stat = math.sqrt(data.n) * t_stat / s_hat if s_hat > 0 else math.nan
    return EstimateReport(
        m=m,
        lambda_hat=lam,
        stage_weights=weights,
        wipw=mu,
        wipws=mu2,
        v_hat=v,
        t_stat=t_stat,
        s_hat=s_hat,
        w_stat=w_stat,
        n=data.n,
    )


def waipw(data: TrialData, m: float, s: int, mu_hat: float) -> float:
    """WIPW of the centred outcomes Y - mu_hat, plus mu_hat back."""
    w = stage_weights(data, m, s)
    out = 0.0
    for i, t in enumerate((1, 2)):
        if w[i] == 0:
            continue
        a, y = data.stage(t)
        e = data.propensity(t, s)
        out += w[i] * (float(np.sum(np.where(a == s, y - mu_hat, 0.0))) / e / len(a) + mu_hat)
    return out


def sample_mean(data: TrialData, s: int) -> float:
    """Pooled arm-s mean over both stages (0/0 := 1)."""
    hits = np.concatenate([data.a1 == s, data.a2 == s])
    if not hits.any():
        return 1.0
    y = np.concatenate([data.y1, data.y2])
    return float(y[hits].mean())


@dataclass
class SplitResult:
    stat: float
    p_value: float
    reject: bool
    abstain: bool


def sample_split_test(data: TrialData, alpha: float, side: str) -> SplitResult:
    """Normal-calibrated IPW test that uses only the follow-up stage."""
    _check_side(side)
    p = data.p2_arm0
    if data.n2 == 0 or p < PROPENSITY_EPS or p > 1.0 - PROPENSITY_EPS:
        return SplitResult(math.nan, 1.0, False, True)
    a, y = data.a2, data.y2
    n2 = len(a)
    u0 = np.where(a == 0, y, 0.0) / p
    u1 = np.where(a == 1, y, 0.0) / (1.0 - p)
    t_stat = u0.mean() - u1.mean()
    var = (np.sum((u0 - u0.mean()) ** 2) + np.sum((u1 - u1.mean()) ** 2)) / n2**2
    if not var > 0:
        return SplitResult(math.nan, 1.0, False, True)
    z = float(t_stat / math.sqrt(var))
    if side == "left":
        z = -z
    p_value = float(ndtr(-z))
    return SplitResult(z, p_value, p_value < alpha, False)


def _check_side(side: str):
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
