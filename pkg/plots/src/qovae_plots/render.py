"""Render analysis CSV reports into figure files.

Usage: ``qovae-render <report_dir> <out_dir>`` (or
``python -m qovae_plots.render <report_dir> <out_dir>``).

Consumes only the documented CSV outputs of the analysis pipeline:

* ``entropy_kde.csv``  (bipartition, x, training, generated)
* ``rank_hist.csv``    (bipartition, set, rank, count)
* ``device_hist.csv``  (kind, set, count, freq)
* ``ket_freq.csv``     (set, ket, count)
* any ``*latent*.csv`` latent map (proj_x, proj_y, s, length, last_device,
  functional_group, ...)
* any ``*interp*.csv`` interpolation path (step, t, tokens, s, error)

Whatever is present gets rendered; an empty report directory is a no-op.
A file with a wrong schema fails loudly, naming the missing column.
"""

from __future__ import annotations

import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

BIPARTITION_ORDER = ("a", "b", "c", "d", "ab", "ac", "ad")


class SchemaError(ValueError):
    pass


def _read_csv(path: Path, required: set[str]) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = required - set(reader.fieldnames or [])
        if missing:
            raise SchemaError(f"{path.name}: missing column(s) {sorted(missing)}")
        return list(reader)


def render_entropy_grid(report_dir: Path, out_dir: Path) -> list[Path]:
    kde_path = report_dir / "entropy_kde.csv"
    if not kde_path.exists():
        return []
    rows = _read_csv(kde_path, {"bipartition", "x", "training", "generated"})
    by_part = defaultdict(list)
    for r in rows:
        by_part[r["bipartition"]].append(
            (float(r["x"]), float(r["training"]), float(r["generated"])))
    rank_rows = []
    rank_path = report_dir / "rank_hist.csv"
    if rank_path.exists():
        rank_rows = _read_csv(rank_path, {"bipartition", "set", "rank", "count"})
    ranks = defaultdict(lambda: defaultdict(dict))
    for r in rank_rows:
        ranks[r["bipartition"]][r["set"]][int(r["rank"])] = int(r["count"])

    parts = [p for p in BIPARTITION_ORDER if p in by_part] or sorted(by_part)
    n_rows = 2 if rank_rows else 1
    fig, axes = plt.subplots(n_rows, len(parts),
                             figsize=(2.2 * len(parts), 2.6 * n_rows),
                             squeeze=False)
    for col, part in enumerate(parts):
        data = sorted(by_part[part])
        xs = [d[0] for d in data]
        ax = axes[0][col]
        ax.plot(xs, [d[1] for d in data], label="training", color="tab:blue")
        ax.plot(xs, [d[2] for d in data], label="generated", color="tab:orange")
        ax.set_title(part)
        ax.set_yticks([])
        if col == 0:
            ax.set_ylabel("entropy density")
            ax.legend(fontsize=6)
        if rank_rows:
            ax = axes[1][col]
            all_ranks = sorted(set(ranks[part].get("training", {}))
                               | set(ranks[part].get("generated", {})))
            width = 0.4
            for off, (name, color) in enumerate((("training", "tab:blue"),
                                                 ("generated", "tab:orange"))):
                hist = ranks[part].get(name, {})
                total = sum(hist.values()) or 1
                ax.bar([x + (off - 0.5) * width for x in all_ranks],
                       [hist.get(x, 0) / total for x in all_ranks],
                       width=width, color=color)
            ax.set_xticks(all_ranks)
            if col == 0:
                ax.set_ylabel("rank freq")
    fig.tight_layout()
    out = out_dir / "bipartition_grid.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


LATENT_COLORS = (("s", "viridis", True), ("length", "plasma", True),
                 ("last_device", "tab20", False),
                 ("functional_group", "tab10", False))


def render_latent_maps(csv_path: Path, out_dir: Path) -> list[Path]:
    rows = _read_csv(csv_path, {"proj_x", "proj_y", "s", "length",
                                "last_device", "functional_group"})
    if not rows:
        return []
    xs = np.array([float(r["proj_x"]) for r in rows])
    ys = np.array([float(r["proj_y"]) for r in rows])
    outputs = []
    stem = csv_path.stem
    for column, cmap, numeric in LATENT_COLORS:
        fig, ax = plt.subplots(figsize=(5, 4.5))
        if numeric:
            values = np.array([float(r[column]) for r in rows])
            sc = ax.scatter(xs, ys, c=values, s=6, cmap=cmap)
            fig.colorbar(sc, ax=ax, label=column)
        else:
            labels = [r[column] for r in rows]
            uniq = sorted(set(labels))
            cmap_obj = plt.get_cmap(cmap, max(len(uniq), 1))
            for i, lab in enumerate(uniq):
                mask = np.array([l == lab for l in labels])
                ax.scatter(xs[mask], ys[mask], s=6, color=cmap_obj(i),
                           label=lab if len(uniq) <= 12 else None)
            if len(uniq) <= 12:
                ax.legend(fontsize=6, markerscale=2)
        ax.set_xlabel("latent x")
        ax.set_ylabel("latent y")
        ax.set_title(f"latent space by {column}")
        fig.tight_layout()
        out = out_dir / f"{stem}_{column}.png"
        fig.savefig(out, dpi=150)
        plt.close(fig)
        outputs.append(out)
    return outputs


def render_device_hist(report_dir: Path, out_dir: Path) -> list[Path]:
    path = report_dir / "device_hist.csv"
    if not path.exists():
        return []
    rows = _read_csv(path, {"kind", "set", "count", "freq"})
    kinds = sorted({r["kind"] for r in rows})
    fig, axes = plt.subplots(1, len(kinds), figsize=(2.4 * len(kinds), 2.6),
                             squeeze=False)
    for col, kind in enumerate(kinds):
        ax = axes[0][col]
        for off, (name, color) in enumerate((("training", "tab:blue"),
                                             ("generated", "tab:orange"))):
            sub = {int(r["count"]): int(r["freq"]) for r in rows
                   if r["kind"] == kind and r["set"] == name}
            total = sum(sub.values()) or 1
            counts = sorted(sub)
            ax.bar([c + (off - 0.5) * 0.4 for c in counts],
                   [sub[c] / total for c in counts], width=0.4, color=color)
        ax.set_title(kind)
    fig.tight_layout()
    out = out_dir / "device_hist.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def render_ket_freq(report_dir: Path, out_dir: Path) -> list[Path]:
    path = report_dir / "ket_freq.csv"
    if not path.exists():
        return []
    rows = _read_csv(path, {"set", "ket", "count"})
    kets = sorted({r["ket"] for r in rows})
    if not kets:
        return []
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(kets)), 3.2))
    for off, (name, color) in enumerate((("training", "tab:blue"),
                                         ("generated", "tab:orange"))):
        sub = {r["ket"]: int(r["count"]) for r in rows if r["set"] == name}
        total = sum(sub.values()) or 1
        ax.bar([i + (off - 0.5) * 0.4 for i in range(len(kets))],
               [sub.get(k, 0) / total for k in kets], width=0.4,
               color=color, label=name)
    ax.set_xticks(range(len(kets)))
    ax.set_xticklabels(kets, rotation=90, fontsize=6)
    ax.set_ylabel("ket frequency")
    ax.legend(fontsize=7)
    fig.tight_layout()
    out = out_dir / "ket_freq.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def render_interpolation(csv_path: Path, out_dir: Path) -> list[Path]:
    rows = _read_csv(csv_path, {"step", "t", "tokens", "s"})
    if not rows:
        return []
    steps = [int(r["step"]) for r in rows]
    svals = [float(r["s"]) if r["s"] else np.nan for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(steps, svals, marker="o")
    ax.set_xlabel("interpolation step")
    ax.set_ylabel("entanglement S")
    fig.tight_layout()
    out = out_dir / f"{csv_path.stem}_s.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def render(report_dir: str | Path, out_dir: str | Path) -> list[Path]:
    report_dir = Path(report_dir)
    out_dir = Path(out_dir)
    if not report_dir.is_dir():
        raise SchemaError(f"report directory {report_dir} does not exist")
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    outputs += render_entropy_grid(report_dir, out_dir)
    outputs += render_device_hist(report_dir, out_dir)
    outputs += render_ket_freq(report_dir, out_dir)
    for path in sorted(report_dir.glob("*.csv")):
        name = path.stem.lower()
        if "latent" in name:
            outputs += render_latent_maps(path, out_dir)
        elif "interp" in name:
            outputs += render_interpolation(path, out_dir)
    return outputs


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: qovae-render <report_dir> <out_dir>", file=sys.stderr)
        return 2
    try:
        outputs = render(argv[0], argv[1])
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 3
    if not outputs:
        print("no renderable reports found; nothing to do")
    else:
        for path in outputs:
            print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
