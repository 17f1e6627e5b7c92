#!/usr/bin/env python3
"""Target the four-photon GHZ state by Bayesian optimization in the latent
space of a trained model.

Writes the GHZ target file, runs the BO loop against a labeled dataset and
prints the top findings.

Usage:
    python scripts/run_bo_ghz.py --ckpt runs/level45/model \
        --data runs/level45/train.txt --out runs/level45/bo.csv
"""

import argparse
import subprocess
import sys
from pathlib import Path

from qovae.bayesopt import ghz_target, save_target


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ckpt", required=True)
    ap.add_argument("--data", required=True)
    ap.add_argument("--out", default="bo.csv")
    ap.add_argument("--lambda", dest="lam", type=float, default=0.1)
    ap.add_argument("--iters", type=int, default=5)
    ap.add_argument("--batch", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    target = Path(args.out).with_suffix(".target.txt")
    save_target(target, ghz_target())
    cmd = [sys.executable, "-m", "qovae.cli", "bo", "--ckpt", args.ckpt,
           "--data", args.data, "--target", str(target),
           "--lambda", str(args.lam), "--iters", str(args.iters),
           "--batch", str(args.batch), "--seed", str(args.seed),
           "--out", args.out]
    print("+", " ".join(cmd), flush=True)
    sys.exit(subprocess.run(cmd).returncode)


if __name__ == "__main__":
    main()
