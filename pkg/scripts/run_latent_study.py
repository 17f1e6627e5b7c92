#!/usr/bin/env python3
"""Train a 2-D latent model on a mixed dataset and export the latent map,
an interpolation path, and distance-vs-entanglement data for plotting.

Usage:
    python scripts/run_latent_study.py --workdir runs/latent2d
"""

import argparse
import csv
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
    ap.add_argument("--count", type=int, default=2000)
    ap.add_argument("--epochs", type=int, default=150)
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--workdir", default="runs/latent2d")
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    config = work / "config.json"
    config.write_text(json.dumps({
        "model": {"latent_dim": 2, "lr": 2e-3, "batch": 8,
                  "epochs": args.epochs, "seed": 2}}, indent=2))
    data = work / "train.txt"
    ckpt = work / "model"

    sh(sys.executable, "-m", "qovae.cli", "gen-data", "--count", args.count,
       "--mix", "0.5", "--seed", "5", "--workers", "2", "--out", data)
    sh(sys.executable, "-m", "qovae.cli", "train", "--data", data,
       "--config", config, "--out", ckpt)
    sh(sys.executable, "-m", "qovae.cli", "latent-map", "--ckpt", ckpt,
       "--data", data, "--out", work / "latent_map.csv")

    # pick two setups from the dataset for an interpolation example
    with open(data, encoding="utf-8") as fh:
        tokens = [line.split("\t")[0] for line in fh if line.strip()]
    sh(sys.executable, "-m", "qovae.cli", "interpolate", "--ckpt", ckpt,
       "--from", tokens[0], "--to", tokens[1], "--steps", "6",
       "--out", work / "interp_path.csv")

    # distance vs entanglement difference, via the library API
    from qovae.analysis import distance_vs_ds
    from qovae.encoding import Vocabulary, read_dataset
    from qovae.model import Qovae

    model, meta = Qovae.load(str(ckpt))
    vocab = Vocabulary()
    records = read_dataset(data, vocab)
    pairs, binned = distance_vs_ds(model, records, vocab, n_pairs=args.pairs)
    with open(work / "distance_ds.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["distance", "abs_ds"])
        writer.writerows(pairs)
    with open(work / "distance_ds_binned.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_center", "mean_abs_ds", "count"])
        writer.writerows(binned)
    print(f"done; outputs in {work}")


if __name__ == "__main__":
    main()
