"""Command-line entry point for the whole pipeline.

Subcommands: gen-data, simulate, train, sample, interpolate, latent-map,
analyze, bo, validate.  Structured single-object outputs are JSON, tabular
outputs are CSV (UTF-8, LF).  Errors print a machine-readable JSON object
on stderr; exit codes: 2 bad arguments or token parse errors, 3 input
data/schema errors, 4 numeric or simulation failures, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, bayesopt
from .datagen import (DatasetFilter, GenerationError, label, generate_dataset,
                      n_two_photon)
from .encoding import (ParseError, SetupRecord, ToolboxConfig, Vocabulary,
                       parse, read_dataset, render, write_dataset)
from .entanglement import BIPARTITION_NAMES, summarize
from .model import Qovae, QovaeConfig, TrainingDivergedError, encode_dataset
from .quantum import AmplitudeOverflowError, EmptyStateError, run_setup
from .ring import Amplitude

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class CliError(Exception):
    def __init__(self, message: str, code: int, kind: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _fail(message: str, code: int, kind: str) -> "CliError":
    return CliError(message, code, kind)


def load_run_config(path: str | None) -> tuple[ToolboxConfig, dict]:
    """Read the combined toolbox + model config file (JSON)."""
    if path is None:
        return ToolboxConfig(), {}
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    toolbox = ToolboxConfig(
        holo_shifts=tuple(raw.get("toolbox", {}).get("holo_shifts", (-2, -1, 1, 2))),
        max_len=int(raw.get("toolbox", {}).get("max_len", 12)),
        dc_order=int(raw.get("toolbox", {}).get("dc_order", 1)))
    return toolbox, raw.get("model", {})


def _vocab_from_meta(meta: dict) -> Vocabulary:
    tb = meta.get("toolbox", {})
    return Vocabulary(ToolboxConfig(holo_shifts=tuple(tb.get("holo_shifts", (-2, -1, 1, 2))),
                                    max_len=int(tb.get("max_len", 12)),
                                    dc_order=int(tb.get("dc_order", 1))))


def _load_model(prefix: str) -> tuple[Qovae, Vocabulary]:
    model, meta = Qovae.load(prefix)
    vocab = _vocab_from_meta(meta)
    if vocab.digest() != meta.get("vocab_digest"):
        raise _fail("checkpoint vocabulary digest mismatch", EXIT_DATA, "schema")
    return model, vocab


# -- subcommands -------------------------------------------------------------

def cmd_gen_data(args) -> int:
    toolbox, _ = load_run_config(args.config)
    vocab = Vocabulary(toolbox)
    filt = DatasetFilter(s_min=args.s_min, s_max=args.s_max,
                         len_min=None, len_max=None,
                         ntp_min=args.ntp_min, mix=args.mix)
    try:
        records, stats = generate_dataset(
            args.count, vocab, seed=args.seed, min_len=args.min_len,
            max_len=args.max_len if args.max_len else vocab.max_len,
            filt=filt, workers=args.workers)
    except GenerationError as exc:
        raise _fail(str(exc), EXIT_NUMERIC, "generation") from exc
    write_dataset(args.out, [r.record() for r in records])
    stats_path = Path(args.out).with_suffix(Path(args.out).suffix + ".stats.json")
    stats_path.write_text(json.dumps(stats.to_dict(), indent=2) + "\n",
                          encoding="utf-8")
    print(json.dumps(stats.to_dict()))
    return 0


def cmd_simulate(args) -> int:
    toolbox, _ = load_run_config(args.config)
    vocab = Vocabulary(toolbox)
    setup = parse(args.setup, vocab)
    out: dict = {"tokens": render(setup), "n_devices": len(setup),
                 "n_tp": n_two_photon(setup)}
    try:
        state = run_setup(setup, dc_order=toolbox.dc_order)
        kets = []
        for ket, amp in state:
            c = complex(amp) / state.norm
            kets.append({"ket": ",".join(str(o) for _, o in ket),
                         "re": c.real, "im": c.imag, "exact": repr(amp)})
        out["kets"] = kets
        out["empty"] = False
    except EmptyStateError:
        state = None
        out["kets"] = []
        out["empty"] = True
    summ = summarize(state)
    out["entanglement"] = {"s": list(summ.s), "srv": list(summ.srv),
                           "total": summ.total,
                           "bipartitions": list(BIPARTITION_NAMES)}
    print(json.dumps(out, indent=2))
    return 0


def cmd_train(args) -> int:
    toolbox, model_cfg = load_run_config(args.config)
    vocab = Vocabulary(toolbox)
    records = read_dataset(args.data, vocab)
    if not records:
        raise _fail("training dataset is empty", EXIT_DATA, "data")
    model_cfg.setdefault("vocab_size", vocab.size)
    model_cfg.setdefault("max_len", vocab.max_len)
    if args.epochs is not None:
        model_cfg["epochs"] = args.epochs
    if args.seed is not None:
        model_cfg["seed"] = args.seed
    config = QovaeConfig.from_dict(model_cfg)
    if config.vocab_size != vocab.size or config.max_len != vocab.max_len:
        raise _fail("model config does not match the toolbox vocabulary",
                    EXIT_DATA, "schema")
    xs = encode_dataset(records, vocab)
    model = Qovae(config)
    try:
        result = model.train(xs)
    except TrainingDivergedError as exc:
        raise _fail(str(exc), EXIT_NUMERIC, "divergence") from exc
    meta_extra = {"toolbox": {"holo_shifts": list(toolbox.holo_shifts),
                              "max_len": toolbox.max_len,
                              "dc_order": toolbox.dc_order},
                  "best_epoch": result.best_epoch,
                  "train_seconds": result.wall_time_s}
    model.save(args.out, vocab.digest(), meta_extra)
    final = model.store.flat.copy()
    model.store.set_flat(result.best_params)
    model.save(args.out + "-best", vocab.digest(), meta_extra)
    model.store.set_flat(final)
    with open(args.out + ".log.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "recon", "kl", "val_recon", "val_kl"])
        for row in result.log:
            writer.writerow([row.epoch, f"{row.recon:.6f}", f"{row.kl:.6f}",
                             f"{row.val_recon:.6f}", f"{row.val_kl:.6f}"])
    print(json.dumps({"epochs": len(result.log), "best_epoch": result.best_epoch,
                      "best_val_loss": result.best_val_loss,
                      "train_seconds": result.wall_time_s}))
    return 0


def cmd_sample(args) -> int:
    model, vocab = _load_model(args.ckpt)
    labeled = analysis.generate_setups(model, vocab, args.n, seed=args.seed,
                                       mode=args.mode)
    write_dataset(args.out, [r.record() for r in labeled])
    svals = [r.s for r in labeled]
    print(json.dumps({"generated": len(labeled),
                      "frac_entangled": float(np.mean([s > 0 for s in svals])) if svals else 0.0,
                      "mean_s": float(np.mean(svals)) if svals else 0.0}))
    return 0


def cmd_interpolate(args) -> int:
    model, vocab = _load_model(args.ckpt)
    s_from = parse(getattr(args, "from"), vocab)
    s_to = parse(args.to, vocab)
    steps = analysis.interpolation_path(model, s_from, s_to, vocab, steps=args.steps)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "t", "tokens", "s", "error"])
        for st in steps:
            writer.writerow([st.step, f"{st.t:.6f}", st.tokens,
                             "" if st.s is None else f"{st.s:.6f}",
                             st.error or ""])
    print(json.dumps({"steps": len(steps), "out": args.out}))
    return 0


def cmd_latent_map(args) -> int:
    model, vocab = _load_model(args.ckpt)
    records = read_dataset(args.data, vocab)
    axes = tuple(int(a) for a in args.axes.split(","))
    if len(axes) != 2:
        raise _fail("--axes needs two comma-separated indices", EXIT_USAGE, "usage")
    rows = analysis.latent_map(model, records, vocab, axes=axes)
    if not rows:
        raise _fail("latent map over an empty dataset", EXIT_DATA, "data")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(json.dumps({"rows": len(rows), "out": args.out}))
    return 0


def cmd_analyze(args) -> int:
    toolbox, _ = load_run_config(args.config)
    vocab = Vocabulary(toolbox)
    gen_records = read_dataset(args.gen, vocab)
    train_records = read_dataset(args.train, vocab)
    if not gen_records or not train_records:
        raise _fail("analyze needs non-empty generated and training sets",
                    EXIT_DATA, "data")
    gen = analysis.relabel(gen_records, vocab)
    train = analysis.relabel(train_records, vocab)
    report = analysis.compare_distributions(gen, train, vocab)
    unique, novel = analysis.uniqueness_novelty([r.tokens for r in gen],
                                                [r.tokens for r in train])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "entropy_kde.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bipartition", "x", "training", "generated"])
        for name in BIPARTITION_NAMES:
            grid = report.entropy_grids[name]
            tr = report.entropy_kde[name]["training"]
            ge = report.entropy_kde[name]["generated"]
            for x, t, g in zip(grid, tr, ge):
                writer.writerow([name, f"{x:.6f}", f"{t:.8f}", f"{g:.8f}"])

    with open(out_dir / "rank_hist.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bipartition", "set", "rank", "count"])
        for name in BIPARTITION_NAMES:
            for set_name, hist in report.rank_hist[name].items():
                for rank in sorted(hist):
                    writer.writerow([name, set_name, rank, hist[rank]])

    with open(out_dir / "device_hist.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "set", "count", "freq"])
        for kind, by_set in report.device_hist.items():
            for set_name, hist in by_set.items():
                for count in sorted(hist):
                    writer.writerow([kind, set_name, count, hist[count]])

    with open(out_dir / "ket_freq.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["set", "ket", "count"])
        for set_name, freqs in report.ket_freq.items():
            for ket in sorted(freqs):
                writer.writerow([set_name, ket, freqs[ket]])

    summary = {"stats": report.stats,
               "uniqueness": unique, "novelty": novel,
               "n_generated": len(gen), "n_training": len(train)}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                          encoding="utf-8")
    print(json.dumps(summary))
    return 0


def cmd_bo(args) -> int:
    model, vocab = _load_model(args.ckpt)
    records = read_dataset(args.data, vocab)
    if len(records) < 2:
        raise _fail("bo needs at least 2 dataset records", EXIT_DATA, "data")
    target = bayesopt.load_target(args.target)
    objective = bayesopt.TargetObjective(target=target, lam=args.lam,
                                         max_len=vocab.max_len, metric=args.metric)
    evals = bayesopt.bo_loop(model, records, vocab, objective,
                             iterations=args.iters, batch_q=args.batch,
                             seed=args.seed)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "iteration", "y", "similarity", "tokens"])
        for i, ev in enumerate(evals):
            writer.writerow([i, ev.iteration, f"{ev.y:.6f}",
                             f"{ev.similarity:.6f}", ev.tokens])
    best = evals[0] if evals else None
    print(json.dumps({"evaluations": len(evals),
                      "best_y": best.y if best else None,
                      "best_similarity": best.similarity if best else None,
                      "best_tokens": best.tokens if best else None}))
    return 0


def cmd_validate(args) -> int:
    path = Path(args.path)
    if not path.exists():
        raise _fail(f"no such file: {path}", EXIT_DATA, "data")
    if args.kind == "dataset":
        records = read_dataset(path)
        print(json.dumps({"kind": "dataset", "records": len(records), "ok": True}))
    elif args.kind == "target":
        table = bayesopt.load_target(path)
        print(json.dumps({"kind": "target", "kets": len(table), "ok": True}))
    elif args.kind == "config":
        load_run_config(str(path))
        print(json.dumps({"kind": "config", "ok": True}))
    elif args.kind == "latent-map":
        with open(path, encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"proj_x", "proj_y", "s", "length", "last_device",
                        "second_last_device", "functional_group"}
            missing = required - set(reader.fieldnames or [])
            if missing:
                raise _fail(f"latent-map CSV missing columns {sorted(missing)}",
                            EXIT_DATA, "schema")
            n = sum(1 for _ in reader)
        print(json.dumps({"kind": "latent-map", "rows": n, "ok": True}))
    else:
        raise _fail(f"unknown validation kind {args.kind!r}", EXIT_USAGE, "usage")
    return 0


# -- argument wiring ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qovae",
                                     description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="random-search dataset generation")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--s-min", type=float, default=None)
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--ntp-min", type=int, default=None)
    p.add_argument("--mix", type=float, default=None,
                   help="target entangled fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", default=None, help="toolbox/model config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("simulate", help="simulate one setup and print the state")
    p.add_argument("--setup", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the VAE on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="checkpoint path prefix")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="sample setups from a trained model")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("sample", "argmax"), default="sample")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("interpolate", help="spherical path between two setups")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--from", required=True)
    p.add_argument("--to", required=True)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("latent-map", help="latent coordinates with structure labels")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--axes", default="0,1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_latent_map)

    p = sub.add_parser("analyze", help="generated-vs-training distribution report")
    p.add_argument("--gen", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bo", help="Bayesian optimization toward a target state")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--metric", choices=bayesopt.METRICS, default="fidelity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bo)

    p = sub.add_parser("validate", help="check a file against its schema")
    p.add_argument("--kind", required=True,
                   choices=("dataset", "target", "config", "latent-map"))
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc)}), file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(json.dumps({"error": "parse", "message": str(exc),
                          "position": exc.position, "line": exc.line}),
              file=sys.stderr)
        return EXIT_USAGE
    except (AmplitudeOverflowError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"error": "numeric", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
