#!/usr/bin/env python3
"""End-to-end level experiment: sample a fixed entanglement band, train,
generate, and compare distributions.

Desk-scale version of the level study (e.g. 4.0 < S < 5.0): the trained
model should reproduce the training mode of S exactly and track the mean.

Usage:
    python scripts/run_level_experiment.py --s-min 4.0 --s-max 5.0 \
        --count 3000 --epochs 200 --workdir runs/level45
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path


def sh(*args):
    print("+", " ".join(str(a) for a in args), flush=True)
    proc = subprocess.run([str(a) for a in args], text=True)
    if proc.returncode != 0:
        sys.exit(proc.returncode)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--s-min", type=float, default=4.0)
    ap.add_argument("--s-max", type=float, default=5.0)
    ap.add_argument("--count", type=int, default=3000)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--n-gen", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--workdir", default="runs/level")
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    config = work / "config.json"
    config.write_text(json.dumps({
        "model": {"latent_dim": 6, "lr": 2e-3, "batch": 8,
                  "epochs": args.epochs, "seed": 0}}, indent=2))
    data = work / "train.txt"
    ckpt = work / "model"
    gen = work / "generated.txt"

    sh(sys.executable, "-m", "qovae.cli", "gen-data", "--count", args.count,
       "--s-min", args.s_min, "--s-max", args.s_max, "--seed", args.seed,
       "--workers", args.workers, "--out", data)
    sh(sys.executable, "-m", "qovae.cli", "train", "--data", data,
       "--config", config, "--out", ckpt)
    sh(sys.executable, "-m", "qovae.cli", "sample", "--ckpt", ckpt,
       "--n", args.n_gen, "--seed", "1", "--out", gen)
    sh(sys.executable, "-m", "qovae.cli", "analyze", "--gen", gen,
       "--train", data, "--out", work / "report")
    print(f"done; see {work / 'report' / 'summary.json'}")


if __name__ == "__main__":
    main()
