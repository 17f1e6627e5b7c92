"""Random-search generation of labeled experiment datasets.

Sampling follows the training-data recipe: setup length uniform on
{min_len..max_len}, every device independently uniform over the non-PAD
vocabulary.  Each draw gets its own child RNG derived from (seed, draw
index), so the emitted dataset is a pure function of the seed no matter
how many workers label setups in parallel.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from .encoding import Setup, SetupRecord, Vocabulary, render
from .entanglement import summarize
from .quantum import AmplitudeOverflowError, EmptyStateError, run_setup
from .ring import Amplitude  # noqa: F401  (re-export convenience for callers)


class GenerationError(RuntimeError):
    """Sampling could not reach the requested count at a sane acceptance rate."""


def n_two_photon(setup: Setup) -> int:
    """Count of beam splitters plus down-converters."""
    return sum(1 for d in setup if d.kind in ("BS", "DC"))


def device_kind_counts(setup: Setup) -> dict[str, int]:
    counts = {"BS": 0, "DC": 0, "REF": 0, "DP": 0, "HOLO": 0}
    for d in setup:
        counts[d.kind] += 1
    return counts


@dataclass
class LabeledSetup:
    """A setup with its simulated entanglement labels."""

    devices: Setup
    tokens: str
    s: float
    srv: tuple[int, ...]
    entropies: tuple[float, ...]
    n_tp: int
    length: int

    @property
    def entangled(self) -> bool:
        return self.s > 0.0

    def record(self) -> SetupRecord:
        return SetupRecord(tokens=self.tokens, s=self.s, srv=self.srv,
                           entropies=self.entropies)


def label(setup: Setup, dc_order: int = 1) -> LabeledSetup:
    """Simulate a setup and attach S, SRV and per-bipartition entropies.

    An empty post-selected state counts as unentangled (S = 0); amplitude
    overflow propagates so callers can skip the draw.
    """
    try:
        state = run_setup(setup, dc_order=dc_order)
    except EmptyStateError:
        state = None
    summ = summarize(state)
    return LabeledSetup(devices=setup, tokens=render(setup), s=summ.total,
                        srv=summ.srv, entropies=summ.s,
                        n_tp=n_two_photon(setup), length=len(setup))


def sample_setup(rng: np.random.Generator, vocab: Vocabulary,
                 min_len: int = 3, max_len: int | None = None) -> Setup:
    """One uniformly random setup: length, then devices, all uniform."""
    if max_len is None:
        max_len = vocab.max_len
    if not 1 <= min_len <= max_len:
        raise ValueError("need 1 <= min_len <= max_len")
    length = int(rng.integers(min_len, max_len + 1))
    idx = rng.integers(1, vocab.size, size=length)
    return tuple(vocab.devices[int(i)] for i in idx)


def _draw(seed: int, index: int, vocab: Vocabulary, min_len: int,
          max_len: int) -> LabeledSetup | None:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, index)))
    setup = sample_setup(rng, vocab, min_len, max_len)
    try:
        return label(setup, dc_order=vocab.config.dc_order)
    except AmplitudeOverflowError:
        return None


_POOL_ARGS: dict = {}


def _pool_init(seed: int, vocab: Vocabulary, min_len: int, max_len: int) -> None:
    _POOL_ARGS.update(seed=seed, vocab=vocab, min_len=min_len, max_len=max_len)


def _pool_draw(index: int) -> LabeledSetup | None:
    return _draw(_POOL_ARGS["seed"], index, _POOL_ARGS["vocab"],
                 _POOL_ARGS["min_len"], _POOL_ARGS["max_len"])


@dataclass
class DatasetFilter:
    """Acceptance predicate over labeled setups."""

    s_min: float | None = None          # exclusive lower bound on S
    s_max: float | None = None          # exclusive upper bound on S
    len_min: int | None = None
    len_max: int | None = None
    ntp_min: int | None = None
    mix: float | None = None            # target entangled fraction, else None

    def base_accept(self, rec: LabeledSetup) -> bool:
        if self.s_min is not None and not rec.s > self.s_min:
            return False
        if self.s_max is not None and not rec.s < self.s_max:
            return False
        if self.len_min is not None and rec.length < self.len_min:
            return False
        if self.len_max is not None and rec.length > self.len_max:
            return False
        if self.ntp_min is not None and rec.n_tp < self.ntp_min:
            return False
        return True


@dataclass
class GenerationStats:
    requested: int
    accepted: int
    draws: int
    overflow_skips: int
    duplicate_skips: int
    entangled: int
    wall_time_s: float
    seed: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.draws if self.draws else 0.0

    @property
    def entangled_fraction(self) -> float:
        return self.entangled / self.accepted if self.accepted else 0.0

    def to_dict(self) -> dict:
        return {"requested": self.requested, "accepted": self.accepted,
                "draws": self.draws, "overflow_skips": self.overflow_skips,
                "duplicate_skips": self.duplicate_skips,
                "entangled": self.entangled,
                "entangled_fraction": self.entangled_fraction,
                "acceptance_rate": self.acceptance_rate,
                "wall_time_s": self.wall_time_s, "seed": self.seed}


def generate_dataset(count: int, vocab: Vocabulary, seed: int = 0,
                     min_len: int = 3, max_len: int | None = None,
                     filt: DatasetFilter | None = None, workers: int = 1,
                     acceptance_floor: float = 1e-4,
                     chunk: int = 512) -> tuple[list[LabeledSetup], GenerationStats]:
    """Sample, label and filter setups until `count` records are accepted.

    Records are deduplicated on the canonical token string.  With a mix
    target, entangled and unentangled quotas are filled independently.
    The output is identical for any worker count because draws are merged
    in draw-index order.
    """
    if max_len is None:
        max_len = vocab.max_len
    filt = filt or DatasetFilter()
    quota_ent = count if filt.mix is None else math.ceil(filt.mix * count)
    quota_unent = count if filt.mix is None else count - quota_ent

    accepted: list[LabeledSetup] = []
    seen: set[str] = set()
    n_ent = n_unent = 0
    draws = overflow = dupes = 0
    start = time.monotonic()

    def consume(rec: LabeledSetup | None) -> bool:
        nonlocal draws, overflow, dupes, n_ent, n_unent
        draws += 1
        if rec is None:
            overflow += 1
            return False
        if not filt.base_accept(rec):
            return False
        if rec.tokens in seen:
            dupes += 1
            return False
        if filt.mix is not None:
            if rec.entangled and n_ent >= quota_ent:
                return False
            if not rec.entangled and n_unent >= quota_unent:
                return False
        seen.add(rec.tokens)
        accepted.append(rec)
        if rec.entangled:
            n_ent += 1
        else:
            n_unent += 1
        return len(accepted) >= count

    def rate_check() -> None:
        if draws >= max(5000, 4 * count) and draws > 0:
            rate = len(accepted) / draws
            if rate < acceptance_floor:
                raise GenerationError(
                    f"acceptance rate {rate:.2e} below floor {acceptance_floor:.0e} "
                    f"after {draws} draws")

    done = False
    if workers <= 1:
        index = 0
        while not done:
            done = consume(_draw(seed, index, vocab, min_len, max_len))
            index += 1
            if index % chunk == 0:
                rate_check()
    else:
        with Pool(workers, initializer=_pool_init,
                  initargs=(seed, vocab, min_len, max_len)) as pool:
            index = 0
            while not done:
                block = range(index, index + chunk)
                for rec in pool.map(_pool_draw, block, chunksize=max(1, chunk // workers)):
                    done = consume(rec)
                    if done:
                        break
                index += chunk
                rate_check()

    stats = GenerationStats(requested=count, accepted=len(accepted), draws=draws,
                            overflow_skips=overflow, duplicate_skips=dupes,
                            entangled=n_ent, wall_time_s=time.monotonic() - start,
                            seed=seed)
    return accepted, stats
