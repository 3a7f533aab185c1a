"""Independent oracle for the m = 1 sample-mean equivalence check.

Simulates two-stage Thompson trials (Bernoulli arms, e0 = 1/2, clip 0.05,
N1 = N2 = N/2) without the package and evaluates, per replication,

    D_N = sqrt(N) * |(SM(0) - SM(1)) - (WAIPW(0) - WAIPW(1))|

with WAIPW in its m = 1 pooled form
    sum 1(A=s)(Y - mu) / sum_t N_t e_t(s) + mu,   mu = true arm mean.

The per-arm analogue is recorded too. Writes medians per seed and the
frozen threshold (max over seeds of the N = 20000 median, times 1.5) to
oracle_results/m1_equivalence.json.
"""
import argparse
import json
import math
import os

import numpy as np
from scipy.special import ndtr

P1 = 0.5
THETA = 0.01
E0 = 0.5
CLIP = 0.05
MARGIN = 1.5


def one_trial(n, rng):
    n1 = n2 = n // 2
    mu = (P1 + THETA, P1)
    a1 = (rng.random(n1) >= E0).astype(int)  # arm 0 with prob e0
    y1 = (rng.random(n1) < np.where(a1 == 0, mu[0], mu[1])).astype(float)
    s0 = np.sum((a1 == 0) * y1) / E0 / math.sqrt(n1)
    s1 = np.sum((a1 == 1) * y1) / (1 - E0) / math.sqrt(n1)
    p2 = min(1 - CLIP, max(CLIP, float(ndtr(s0 - s1))))
    a2 = (rng.random(n2) >= p2).astype(int)
    y2 = (rng.random(n2) < np.where(a2 == 0, mu[0], mu[1])).astype(float)
    a = np.concatenate([a1, a2])
    y = np.concatenate([y1, y2])
    props = {0: (E0, p2), 1: (1 - E0, 1 - p2)}
    sm, wa = [], []
    for s in (0, 1):
        hit = a == s
        sm.append(y[hit].mean() if hit.any() else 1.0)
        denom = n1 * props[s][0] + n2 * props[s][1]
        wa.append(np.sum(hit * (y - mu[s])) / denom + mu[s])
    root = math.sqrt(n)
    diff = root * abs((sm[0] - sm[1]) - (wa[0] - wa[1]))
    arm = max(root * abs(sm[s] - wa[s]) for s in (0, 1))
    return diff, arm


def medians(n, reps, seed):
    rng = np.random.default_rng(seed)
    res = np.array([one_trial(n, rng) for _ in range(reps)])
    return float(np.median(res[:, 0])), float(np.median(res[:, 1]))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "oracle_results", "m1_equivalence.json"))
    args = ap.parse_args()
    runs = []
    for k in range(args.seeds):
        d20, a20 = medians(20000, args.reps, 5000 + k)
        d5, a5 = medians(5000, args.reps, 9000 + k)
        runs.append({"seed": k, "diff_20000": d20, "diff_5000": d5, "arm_20000": a20, "arm_5000": a5, "shrink": d5 / d20})
        print(runs[-1])
    d20 = [r["diff_20000"] for r in runs]
    shrink = [r["shrink"] for r in runs]
    summary = {
        "reps": args.reps,
        "runs": runs,
        "diff_20000_max": max(d20),
        "diff_20000_mean": float(np.mean(d20)),
        "shrink_min": min(shrink),
        "shrink_mean": float(np.mean(shrink)),
        "threshold": MARGIN * max(d20),
    }
    os.makedirs(os.path.dirname(args.out), exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps({k: v for k, v in summary.items() if k != "runs"}, indent=2))


if __name__ == "__main__":
    main()
