"""Null calibration study (rejection rates and QQ deviations).

    python3 scripts/run_calibration.py [--config configs/thompson_null_gaussian.toml] [--quick]

Writes the study CSV, per-replication p-values and QQ rows under the config's
output directory and prints rejection rates with the max QQ deviation.
"""
import argparse
import dataclasses
import os

from twostage import config as cfgmod
from twostage import montecarlo as mc

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=os.path.join(HERE, "..", "configs", "thompson_null_gaussian.toml"))
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--quick", action="store_true", help="200 replications, B = 500")
    args = ap.parse_args()
    cfg = cfgmod.load(args.config)
    study = cfg.study
    if args.quick:
        study = dataclasses.replace(study, reps=200, B=500)
    res = mc.run_study(study, threads=args.threads or cfg.threads)
    out = cfg.output_dir
    res.write(os.path.join(out, "study.csv"))
    res.write_pvalues(os.path.join(out, "study_pvalues.csv"))
    rows, _ = mc.qq_rows(res)
    mc.write_csv(os.path.join(out, "qq.csv"), mc.QQ_FIELDS, rows)
    band = mc.ks_band(study.reps)
    print(f"{'method':<14}{'eps':>6}{'side':>7}{'rate':>8}{'qq_dev':>9}")
    for r in res.rows:
        dev = mc.qq_max_deviation(res.pvalues_for(r["method"], r["theta"], r["epsilon"], r["side"]))
        print(f"{r['method']:<14}{r['epsilon']:>6.2f}{r['side']:>7}{r['rejection_rate']:>8.4f}{dev:>9.4f}")
    print(f"KS band {band:.4f}; output in {out}")


if __name__ == "__main__":
    main()
