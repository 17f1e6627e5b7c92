"""Latent-space and distribution analyses of trained models.

Covers spherical interpolation between encoded setups, latent maps for
structure inspection, distance-vs-entanglement scatter data, kernel
density estimates of the per-bipartition entropies, generated-vs-training
distribution reports and uniqueness/novelty scores.  All outputs are plain
records (lists of tuples / dicts) so the CLI can serialize them as CSV or
JSON without this module touching files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .datagen import LabeledSetup, device_kind_counts, label, n_two_photon
from .encoding import Setup, SetupRecord, Vocabulary, encode_onehot, parse, render
from .entanglement import BIPARTITION_NAMES
from .model import Qovae
from .quantum import AmplitudeOverflowError, EmptyStateError, four_photon_table, run_setup

FUNCTIONAL_GROUPS = ("BS", "DC", "REF", "DP", "HOLO", "NONE")


def functional_group(setup: Setup, position: int = -1) -> str:
    """Device-kind equivalence class of the device at `position`."""
    if not setup or abs(position) > len(setup) or position >= len(setup):
        return "NONE"
    return setup[position].kind


def slerp(z1: np.ndarray, z2: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation along the great circle from z1 to z2.

    Falls back to linear interpolation for nearly parallel inputs; nearly
    antipodal inputs have no unique great circle and raise ValueError.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    n1 = np.linalg.norm(z1)
    n2 = np.linalg.norm(z2)
    if n1 == 0.0 or n2 == 0.0:
        raise ValueError("slerp endpoints must be nonzero")
    cos = float(np.clip(np.dot(z1, z2) / (n1 * n2), -1.0, 1.0))
    omega = math.acos(cos)
    if omega < 1e-6:
        return (1.0 - t) * z1 + t * z2
    if math.pi - omega < 1e-6:
        raise ValueError("slerp endpoints are antipodal")
    s = math.sin(omega)
    return (math.sin((1.0 - t) * omega) * z1 + math.sin(t * omega) * z2) / s


@dataclass
class PathStep:
    step: int
    t: float
    tokens: str
    s: float | None        # None when labeling failed (overflow)
    error: str | None = None


def interpolation_path(model: Qovae, setup1: Setup, setup2: Setup,
                       vocab: Vocabulary, steps: int = 6) -> list[PathStep]:
    """Encode both setups, slerp between the means, decode and label."""
    z1, _ = model.encode(encode_onehot(setup1, vocab))
    z2, _ = model.encode(encode_onehot(setup2, vocab))
    out = []
    for k in range(steps):
        t = k / (steps - 1) if steps > 1 else 0.0
        z = slerp(z1, z2, t)
        decoded = model.decode_setup(z, vocab, mode="argmax")
        try:
            rec = label(decoded, dc_order=vocab.config.dc_order)
            out.append(PathStep(step=k, t=t, tokens=rec.tokens, s=rec.s))
        except AmplitudeOverflowError as exc:
            out.append(PathStep(step=k, t=t, tokens=render(decoded), s=None,
                                error=str(exc)))
    return out


def distance_vs_ds(model: Qovae, records: list[SetupRecord], vocab: Vocabulary,
                   n_pairs: int, seed: int = 0,
                   n_bins: int = 20) -> tuple[list[tuple[float, float]],
                                              list[tuple[float, float, int]]]:
    """Latent-distance / entanglement-difference pairs plus binned means."""
    rng = np.random.default_rng(seed)
    xs = np.stack([encode_onehot(parse(r.tokens, vocab), vocab) for r in records])
    mus = model.encode_means(xs)
    svals = np.array([r.s if r.s is not None else 0.0 for r in records])
    pairs = []
    for _ in range(n_pairs):
        i, j = rng.integers(0, len(records), size=2)
        dist = float(np.linalg.norm(mus[i] - mus[j]))
        ds = float(abs(svals[i] - svals[j]))
        pairs.append((dist, ds))
    dists = np.array([p[0] for p in pairs])
    dss = np.array([p[1] for p in pairs])
    edges = np.linspace(0.0, float(dists.max()) + 1e-12, n_bins + 1)
    binned = []
    for b in range(n_bins):
        mask = (dists >= edges[b]) & (dists < edges[b + 1])
        if np.any(mask):
            binned.append((float(0.5 * (edges[b] + edges[b + 1])),
                           float(dss[mask].mean()), int(mask.sum())))
    return pairs, binned


def distance_ds_correlation(binned: list[tuple[float, float, int]]) -> tuple[float, float]:
    """Spearman correlation between bin center distance and mean |dS|."""
    xs = [b[0] for b in binned]
    ys = [b[1] for b in binned]
    rho, p = spearmanr(xs, ys)
    return float(rho), float(p)


def latent_map(model: Qovae, records: list[SetupRecord], vocab: Vocabulary,
               axes: tuple[int, int] = (0, 1)) -> list[dict]:
    """One row per training setup: latent coordinates plus structure labels.

    Columns: z0..z{k-1} (full latent mean), proj_x/proj_y (the chosen
    2-D axes), s, length, last_device, second_last_device,
    functional_group.
    """
    xs = np.stack([encode_onehot(parse(r.tokens, vocab), vocab) for r in records])
    mus = model.encode_means(xs)
    rows = []
    for rec, mu in zip(records, mus):
        setup = parse(rec.tokens, vocab)
        row = {f"z{i}": float(mu[i]) for i in range(mus.shape[1])}
        row.update({
            "proj_x": float(mu[axes[0]]),
            "proj_y": float(mu[axes[1]]),
            "s": rec.s if rec.s is not None else 0.0,
            "length": len(setup),
            "last_device": render(setup[-1:]) if setup else "NONE",
            "second_last_device": render(setup[-2:-1]) if len(setup) >= 2 else "NONE",
            "functional_group": functional_group(setup, -1),
        })
        rows.append(row)
    return rows


def kde(values, grid) -> np.ndarray:
    """Gaussian kernel density estimate with Scott's bandwidth sigma*n^(-1/5)."""
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if values.size < 2:
        raise ValueError("kde needs at least 2 values")
    sd = float(values.std())
    if sd == 0.0:
        raise ValueError("kde bandwidth degenerates on zero-variance input")
    h = sd * values.size ** (-0.2)
    diff = (grid[:, None] - values[None, :]) / h
    dens = np.exp(-0.5 * diff ** 2).sum(axis=1)
    dens /= values.size * h * math.sqrt(2.0 * math.pi)
    return dens


def mode_of_s(values, decimals: int = 6) -> float:
    """Most frequent S value after rounding; ties go to the smaller value."""
    counts: dict[float, int] = {}
    for v in values:
        key = round(float(v), decimals)
        counts[key] = counts.get(key, 0) + 1
    best = max(sorted(counts), key=lambda k: (counts[k], -k))
    return best


def relabel(records: list[SetupRecord], vocab: Vocabulary) -> list[LabeledSetup]:
    """Fully re-simulate records (fills per-bipartition entropies)."""
    out = []
    for rec in records:
        out.append(label(parse(rec.tokens, vocab), dc_order=vocab.config.dc_order))
    return out


def _ket_frequencies(labeled: list[LabeledSetup], vocab: Vocabulary,
                     oam_values=(0, 1)) -> dict[str, int]:
    """How often each restricted-OAM basis ket appears across final states."""
    counts: dict[str, int] = {}
    for rec in labeled:
        try:
            state = run_setup(rec.devices, dc_order=vocab.config.dc_order)
        except (EmptyStateError, AmplitudeOverflowError):
            continue
        for oams in four_photon_table(state):
            if all(o in oam_values for o in oams):
                key = ",".join(str(o) for o in oams)
                counts[key] = counts.get(key, 0) + 1
    return counts


@dataclass
class DistributionReport:
    """Everything needed to compare generated and training distributions."""

    entropy_grids: dict[str, list[float]]            # bipartition -> grid
    entropy_kde: dict[str, dict[str, list[float]]]   # bipartition -> set -> density
    rank_hist: dict[str, dict[str, dict[int, int]]]  # bipartition -> set -> rank -> count
    device_hist: dict[str, dict[str, dict[int, int]]]  # kind -> set -> count -> freq
    ket_freq: dict[str, dict[str, int]]              # set -> ket -> count
    stats: dict[str, dict[str, float]]               # set -> mode/mean/sd/frac


def compare_distributions(gen: list[LabeledSetup], train: list[LabeledSetup],
                          vocab: Vocabulary, grid_points: int = 200) -> DistributionReport:
    sets = {"generated": gen, "training": train}
    entropy_grids: dict[str, list[float]] = {}
    entropy_kde: dict[str, dict[str, list[float]]] = {}
    rank_hist: dict[str, dict[str, dict[int, int]]] = {}
    for k, name in enumerate(BIPARTITION_NAMES):
        all_vals = [rec.entropies[k] for recs in sets.values() for rec in recs]
        hi = max(all_vals) if all_vals else 1.0
        grid = np.linspace(-0.2, hi + 0.5, grid_points)
        entropy_grids[name] = grid.tolist()
        entropy_kde[name] = {}
        rank_hist[name] = {}
        for set_name, recs in sets.items():
            vals = np.array([rec.entropies[k] for rec in recs])
            try:
                dens = kde(vals, grid).tolist()
            except ValueError:
                dens = [0.0] * grid_points
            entropy_kde[name][set_name] = dens
            hist: dict[int, int] = {}
            for rec in recs:
                hist[rec.srv[k]] = hist.get(rec.srv[k], 0) + 1
            rank_hist[name][set_name] = hist

    device_hist: dict[str, dict[str, dict[int, int]]] = {}
    for kind in ("BS", "DC", "REF", "DP", "HOLO"):
        device_hist[kind] = {}
        for set_name, recs in sets.items():
            hist = {}
            for rec in recs:
                n = device_kind_counts(rec.devices)[kind]
                hist[n] = hist.get(n, 0) + 1
            device_hist[kind][set_name] = hist

    ket_freq = {name: _ket_frequencies(recs, vocab) for name, recs in sets.items()}

    stats = {}
    for set_name, recs in sets.items():
        svals = np.array([rec.s for rec in recs])
        stats[set_name] = {
            "mode_s": mode_of_s(svals) if len(svals) else 0.0,
            "mean_s": float(svals.mean()) if len(svals) else 0.0,
            "sd_s": float(svals.std()) if len(svals) else 0.0,
            "frac_entangled": float((svals > 0).mean()) if len(svals) else 0.0,
            "count": float(len(svals)),
        }
    return DistributionReport(entropy_grids=entropy_grids, entropy_kde=entropy_kde,
                              rank_hist=rank_hist, device_hist=device_hist,
                              ket_freq=ket_freq, stats=stats)


def uniqueness_novelty(gen_tokens: list[str], train_tokens: list[str]) -> tuple[float, float]:
    """(unique fraction among generated, fraction not present in training)."""
    if not gen_tokens:
        return 0.0, 0.0
    train_set = set(train_tokens)
    unique = len(set(gen_tokens)) / len(gen_tokens)
    novel = sum(1 for t in gen_tokens if t not in train_set) / len(gen_tokens)
    return unique, novel


def generate_setups(model: Qovae, vocab: Vocabulary, n: int, seed: int = 0,
                    mode: str = "sample") -> list[LabeledSetup]:
    """Sample latents from the prior, decode and label the results.

    Overflow-labeled decodes are kept out of the list (they are reported
    by callers via the count difference); empty-state decodes label S = 0.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 17)))
    out = []
    for _ in range(n):
        z = rng.standard_normal(model.config.latent_dim)
        setup = model.decode_setup(z, vocab, mode=mode, rng=rng)
        try:
            out.append(label(setup, dc_order=vocab.config.dc_order))
        except AmplitudeOverflowError:
            continue
    return out
