"""Finite-N draws of sqrt(N) T_N - c_N against the limit law, per c_N.

    python3 scripts/run_sampling_distribution.py [--config configs/sampling_distribution.toml]

Prints KS distance, skewness of both samples and the W1 distance of the limit
at c to the strong-signal limit.
"""
import argparse
import math
import os

from twostage import config as cfgmod
from twostage import limitdist as ld
from twostage import montecarlo as mc
from twostage import rng as rngmod

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=os.path.join(HERE, "..", "configs", "sampling_distribution.toml"))
    ap.add_argument("--limit-draws", type=int, default=100_000)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    cfg = cfgmod.load(args.config)
    h = cfg.histogram
    draws = mc.sampling_histogram(h, threads=args.threads or cfg.threads)
    out = cfg.output_dir
    mc.write_csv(os.path.join(out, "histogram.csv"), ("c_n", "rep", "value"), mc.histogram_rows(draws))
    base = ld.LimitParams.from_model(
        h.model, h.design.rule, h.design.e0, -math.inf, q=h.design.q, weighting=ld.weighting_for_m(h.m)
    )
    ref = ld.sample_limit(base, args.limit_draws, rngmod.stream(cfg.seed, rngmod.LIMIT, 99))
    print(f"{'c_N':>6}{'KS':>8}{'skew_N':>9}{'skew_lim':>10}{'W1_to_-inf':>12}")
    for i, c in enumerate(h.c_grid):
        lim = ld.sample_limit(base.with_(c=c), args.limit_draws, rngmod.stream(cfg.seed, rngmod.LIMIT, i))
        print(
            f"{c:>6g}{ld.ks_distance(draws[c], lim):>8.4f}{ld.skewness(draws[c]):>9.3f}"
            f"{ld.skewness(lim):>10.3f}{ld.wasserstein1(lim, ref):>12.4f}"
        )
    print(f"output in {out}")


if __name__ == "__main__":
    main()
