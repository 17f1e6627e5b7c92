"""Gaussian-process Bayesian optimization over the learned latent space.

The objective scores a setup against a target four-photon state: state
overlap (or a probability-based distance) minus a length penalty
lambda * length / (4 * max_len).  An exact GP with an RBF kernel is fit on
the encoded training latents (subsampled to at most 2000 points); each
iteration proposes a batch of candidates by maximizing expected
improvement from random multi-starts inside the latent bounding box,
decodes them, scores them and folds them back into the GP data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .encoding import Setup, SetupRecord, Vocabulary, encode_onehot, parse, render
from .model import Qovae
from .quantum import (AmplitudeOverflowError, EmptyStateError,
                      four_photon_table, run_setup)

StateTable = dict[tuple[int, int, int, int], complex]

METRICS = ("fidelity", "prob-fidelity", "neg-mse", "neg-kl")

_KL_FLOOR = 1e-12


def normalize_target(table: StateTable) -> StateTable:
    norm2 = sum(abs(a) ** 2 for a in table.values())
    if norm2 <= 0.0:
        raise ValueError("target state has zero norm")
    scale = math.sqrt(norm2)
    return {k: a / scale for k, a in table.items()}


def load_target(path: str | Path) -> StateTable:
    """Read `amplitude_real amplitude_imag i j k l` lines into a state."""
    table: StateTable = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"target line {lineno}: expected 6 fields, got {len(parts)}")
        re_a, im_a = float(parts[0]), float(parts[1])
        ket = tuple(int(v) for v in parts[2:])
        table[ket] = table.get(ket, 0.0) + complex(re_a, im_a)
    return normalize_target(table)


def save_target(path: str | Path, table: StateTable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ket in sorted(table):
            amp = table[ket]
            fh.write(f"{amp.real} {amp.imag} " + " ".join(str(v) for v in ket) + "\n")


def ghz_target() -> StateTable:
    return normalize_target({(0, 0, 0, 0): 1.0 + 0.0j, (1, 1, 1, 1): 1.0 + 0.0j})


@dataclass
class TargetObjective:
    """Similarity-to-target score with a length penalty."""

    target: StateTable
    lam: float = 0.1
    max_len: int = 12
    metric: str = "fidelity"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("penalty weight must be non-negative")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        self.target = normalize_target(self.target)

    def similarity(self, state: StateTable | None) -> float:
        """Metric term for a normalized state table (None = empty state)."""
        if self.metric == "fidelity":
            if state is None:
                return 0.0
            overlap = sum(self.target[k].conjugate() * state.get(k, 0.0)
                          for k in self.target)
            return abs(overlap) ** 2
        p_star = {k: abs(a) ** 2 for k, a in self.target.items()}
        q = {} if state is None else {k: abs(a) ** 2 for k, a in state.items()}
        if self.metric == "prob-fidelity":
            return sum(math.sqrt(p * q.get(k, 0.0)) for k, p in p_star.items()) ** 2
        if self.metric == "neg-mse":
            kets = set(p_star) | set(q)
            return -math.sqrt(sum((p_star.get(k, 0.0) - q.get(k, 0.0)) ** 2
                                  for k in kets))
        # neg-kl
        return -sum(p * math.log(p / max(q.get(k, 0.0), _KL_FLOOR))
                    for k, p in p_star.items() if p > 0.0)

    def __call__(self, setup: Setup, dc_order: int = 1) -> tuple[float, float]:
        """(objective value, raw similarity term) for one setup."""
        try:
            state = four_photon_table(run_setup(setup, dc_order=dc_order))
        except EmptyStateError:
            state = None
        sim = self.similarity(state)
        return sim - self.lam * len(setup) / (4.0 * self.max_len), sim


@dataclass
class GpModel:
    """Exact GP regression state (RBF kernel, fixed noise)."""

    z: np.ndarray
    alpha: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    y_mean: float
    length_scale: float
    signal_var: float
    noise_var: float
    log_marginal: float


def _rbf(z1: np.ndarray, z2: np.ndarray, length_scale: float,
         signal_var: float) -> np.ndarray:
    d2 = np.sum(z1 ** 2, axis=1)[:, None] + np.sum(z2 ** 2, axis=1)[None, :] \
        - 2.0 * (z1 @ z2.T)
    np.clip(d2, 0.0, None, out=d2)
    return signal_var * np.exp(-0.5 * d2 / length_scale ** 2)


def _chol_with_jitter(k: np.ndarray, noise_var: float) -> tuple[np.ndarray, float]:
    jitter = noise_var
    while jitter <= 1e-2:
        try:
            return np.linalg.cholesky(k + jitter * np.eye(k.shape[0])), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise np.linalg.LinAlgError("kernel matrix not positive definite even with jitter")


def gp_fit(z: np.ndarray, y: np.ndarray, noise_var: float = 1e-4,
           max_points: int = 2000, seed: int = 0) -> GpModel:
    """Fit kernel hyperparameters by grid search on log marginal likelihood."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if z.shape[0] != y.shape[0] or z.shape[0] < 2:
        raise ValueError("need matching inputs/targets with n >= 2")
    if z.shape[0] > max_points:
        keep = np.random.default_rng(seed).choice(z.shape[0], size=max_points,
                                                  replace=False)
        keep.sort()
        z, y = z[keep], y[keep]
    y_mean = float(y.mean())
    yc = y - y_mean
    n = z.shape[0]
    best = None
    for length_scale in np.logspace(-1.0, 1.0, 13):
        for signal_var in (0.1, 1.0, 10.0):
            k = _rbf(z, z, length_scale, signal_var)
            try:
                chol, jitter = _chol_with_jitter(k, noise_var)
            except np.linalg.LinAlgError:
                continue
            alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, yc))
            lml = (-0.5 * float(yc @ alpha) - float(np.sum(np.log(np.diag(chol))))
                   - 0.5 * n * math.log(2.0 * math.pi))
            if best is None or lml > best.log_marginal:
                best = GpModel(z=z, alpha=alpha, chol=chol, y_mean=y_mean,
                               length_scale=float(length_scale),
                               signal_var=signal_var, noise_var=jitter,
                               log_marginal=lml)
    if best is None:
        raise np.linalg.LinAlgError("no hyperparameter setting produced a valid fit")
    return best


def gp_predict(model: GpModel, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at query points (n_query, dim)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    k_star = _rbf(model.z, z, model.length_scale, model.signal_var)
    mean = k_star.T @ model.alpha + model.y_mean
    v = np.linalg.solve(model.chol, k_star)
    var = model.signal_var - np.sum(v * v, axis=0)
    return mean, np.clip(var, 0.0, None)


def expected_improvement(model: GpModel, z: np.ndarray, best_y: float) -> np.ndarray:
    mean, var = gp_predict(model, z)
    sigma = np.sqrt(var)
    ei = np.zeros_like(mean)
    ok = sigma >= 1e-12
    u = (mean[ok] - best_y) / sigma[ok]
    ei[ok] = (mean[ok] - best_y) * norm.cdf(u) + sigma[ok] * norm.pdf(u)
    return np.clip(ei, 0.0, None)


@dataclass
class BoEvaluation:
    iteration: int
    tokens: str
    y: float
    similarity: float
    z: list[float]


def _propose(model: GpModel, best_y: float, lo: np.ndarray, hi: np.ndarray,
             batch_q: int, rng: np.random.Generator,
             n_starts: int = 256) -> list[np.ndarray]:
    dim = lo.shape[0]
    diag = float(np.linalg.norm(hi - lo))
    min_sep = 0.1 * diag
    starts = rng.uniform(lo, hi, size=(n_starts, dim))
    refined = []
    bounds = list(zip(lo, hi))

    def neg_ei(zq):
        return -float(expected_improvement(model, zq[None, :], best_y)[0])

    for s in starts:
        res = minimize(neg_ei, s, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 20})
        refined.append((-res.fun, res.x))
    refined.sort(key=lambda t: -t[0])
    chosen: list[np.ndarray] = []
    for _, zc in refined:
        if all(np.linalg.norm(zc - prev) >= min_sep for prev in chosen):
            chosen.append(zc)
        if len(chosen) >= batch_q:
            break
    return chosen


def bo_loop(model: Qovae, records: list[SetupRecord], vocab: Vocabulary,
            objective: TargetObjective, iterations: int = 5, batch_q: int = 10,
            seed: int = 0, n_starts: int = 256,
            max_gp_points: int = 2000) -> list[BoEvaluation]:
    """Batched EI optimization; returns every candidate evaluation, best first."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 23)))
    xs = np.stack([encode_onehot(parse(r.tokens, vocab), vocab) for r in records])
    latents = model.encode_means(xs)
    ys = []
    for rec in records:
        try:
            y, _ = objective(parse(rec.tokens, vocab), dc_order=vocab.config.dc_order)
        except AmplitudeOverflowError:
            y = -1.0
        ys.append(y)
    z_data = latents.copy()
    y_data = np.array(ys)
    std = latents.std(axis=0)
    lo = latents.min(axis=0) - std
    hi = latents.max(axis=0) + std

    evaluations: list[BoEvaluation] = []
    for it in range(iterations):
        gp = gp_fit(z_data, y_data, seed=seed + it, max_points=max_gp_points)
        best_y = float(y_data.max())
        candidates = _propose(gp, best_y, lo, hi, batch_q, rng, n_starts)
        decoded = [model.decode_setup(z, vocab, mode="argmax") for z in candidates]
        if all(len(s) == 0 for s in decoded):
            warnings.warn(f"iteration {it}: all candidates decode to empty setups")
        new_y = []
        for z, setup in zip(candidates, decoded):
            try:
                y, sim = objective(setup, dc_order=vocab.config.dc_order)
            except AmplitudeOverflowError:
                y, sim = -1.0, 0.0
            evaluations.append(BoEvaluation(iteration=it, tokens=render(setup),
                                            y=y, similarity=sim,
                                            z=[float(v) for v in z]))
            new_y.append(y)
        z_data = np.vstack([z_data, np.array(candidates)])
        y_data = np.concatenate([y_data, np.array(new_y)])
    evaluations.sort(key=lambda e: -e.y)
    return evaluations


def random_latent_baseline(model: Qovae, records: list[SetupRecord],
                           vocab: Vocabulary, objective: TargetObjective,
                           budget: int, seed: int = 0) -> list[BoEvaluation]:
    """Equal-budget uniform sampling in the same latent box, for comparison."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 29)))
    xs = np.stack([encode_onehot(parse(r.tokens, vocab), vocab) for r in records])
    latents = model.encode_means(xs)
    std = latents.std(axis=0)
    lo = latents.min(axis=0) - std
    hi = latents.max(axis=0) + std
    out = []
    for i in range(budget):
        z = rng.uniform(lo, hi)
        setup = model.decode_setup(z, vocab, mode="argmax")
        try:
            y, sim = objective(setup, dc_order=vocab.config.dc_order)
        except AmplitudeOverflowError:
            y, sim = -1.0, 0.0
        out.append(BoEvaluation(iteration=i, tokens=render(setup), y=y,
                                similarity=sim, z=[float(v) for v in z]))
    out.sort(key=lambda e: -e.y)
    return out
