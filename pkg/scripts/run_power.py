"""Power curves over the theta grid.

    python3 scripts/run_power.py [--config configs/thompson_power_bernoulli.toml] [--quick]
"""
import argparse
import dataclasses
import os

from twostage import config as cfgmod
from twostage import montecarlo as mc

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=os.path.join(HERE, "..", "configs", "thompson_power_bernoulli.toml"))
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--quick", action="store_true", help="200 replications, B = 500, right side only")
    args = ap.parse_args()
    cfg = cfgmod.load(args.config)
    study = cfg.study
    if args.quick:
        study = dataclasses.replace(study, reps=200, B=500, sides=("right",))
    res = mc.run_study(study, threads=args.threads or cfg.threads)
    out = cfg.output_dir
    res.write(os.path.join(out, "study.csv"))
    res.write_pvalues(os.path.join(out, "study_pvalues.csv"))
    for side in study.sides:
        for eps in study.epsilon_grid:
            print(f"side={side} eps={eps}")
            print("  theta " + " ".join(f"{m:>12}" for m in study.methods))
            for theta in study.theta_grid:
                rates = [res.row(m, theta, eps, side)["rejection_rate"] for m in study.methods]
                print(f"  {theta:>5.2f} " + " ".join(f"{r:>12.4f}" for r in rates))
    print(f"output in {out}")


if __name__ == "__main__":
    main()
