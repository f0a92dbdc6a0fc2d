#!/usr/bin/env python3
"""End-to-end experiment: generate a cohort at full registry scale, train the
boosted model, evaluate with bootstrap intervals, run the decision-curve
analysis, and export the attribution summary.

Usage:
    python scripts/run_pipeline.py --outdir runs/full --seed 20200217
    python scripts/run_pipeline.py --outdir runs/dev --n 20000 --n-trees 60
"""

import argparse
import sys
import time
from pathlib import Path

from covtriage.cli import main as cli


def sh(args: list[str]) -> None:
    print(f"$ covtriage {' '.join(args)}")
    rc = cli(args)
    if rc != 0:
        sys.exit(rc)


def run() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--outdir", default="runs/full")
    p.add_argument("--n", type=int, default=149_471)
    p.add_argument("--seed", type=int, default=20200217)
    p.add_argument("--n-trees", type=int, default=200)
    p.add_argument("--bootstrap", type=int, default=1000)
    args = p.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    cohort = out / "cohort.csv"
    model = out / "model.json"

    t0 = time.time()
    sh(["generate", "--out", str(cohort), "--n", str(args.n), "--seed", str(args.seed)])
    sh(["train", "--cohort", str(cohort), "--out", str(model),
        "--seed", str(args.seed), "--n-trees", str(args.n_trees)])
    sh(["evaluate", "--cohort", str(cohort), "--model", str(model),
        "--out", str(out / "report.json"), "--bootstrap", str(args.bootstrap)])
    sh(["dca", "--cohort", str(cohort), "--model", str(model),
        "--out", str(out / "dca.csv")])
    sh(["explain", "--cohort", str(cohort), "--model", str(model),
        "--out", str(out / "summary.csv")])
    print(f"pipeline finished in {time.time() - t0:.0f}s; artifacts in {out}/")
    print(f"serve it: covtriage serve --model {model} --bind 127.0.0.1:8000")


if __name__ == "__main__":
    run()
