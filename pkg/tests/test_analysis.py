import math

import numpy as np
import pytest

from conftest import GOLDEN_SETUP, random_setup
from qovae.analysis import (DistributionReport, compare_distributions,
                            distance_ds_correlation, distance_vs_ds,
                            functional_group, generate_setups,
                            interpolation_path, kde, latent_map, mode_of_s,
                            slerp, uniqueness_novelty, relabel)
from qovae.datagen import label, sample_setup
from qovae.encoding import SetupRecord, render
from qovae.model import Qovae, QovaeConfig


@pytest.fixture(scope="module")
def small_model(vocab):
    cfg = QovaeConfig(latent_dim=3, conv_filters=6, enc_hidden=16, dec_seed=8,
                      gru_hidden=12, vocab_size=vocab.size, max_len=vocab.max_len,
                      seed=4)
    return Qovae(cfg)


@pytest.fixture(scope="module")
def labeled_records(vocab):
    rng = np.random.default_rng(31)
    recs = []
    while len(recs) < 40:
        recs.append(label(sample_setup(rng, vocab, 3, 8)).record())
    return recs


def test_slerp_endpoints(rng):
    z1 = rng.standard_normal(4)
    z2 = rng.standard_normal(4)
    assert np.allclose(slerp(z1, z2, 0.0), z1, atol=1e-12)
    assert np.allclose(slerp(z1, z2, 1.0), z2, atol=1e-12)


def test_slerp_preserves_common_norm(rng):
    z1 = rng.standard_normal(5)
    z2 = rng.standard_normal(5)
    r = 2.5
    z1 *= r / np.linalg.norm(z1)
    z2 *= r / np.linalg.norm(z2)
    for t in np.linspace(0, 1, 11):
        assert np.linalg.norm(slerp(z1, z2, t)) == pytest.approx(r, abs=1e-9)


def test_slerp_orthogonal_midpoint():
    z1 = np.array([1.0, 0.0])
    z2 = np.array([0.0, 1.0])
    mid = slerp(z1, z2, 0.5)
    assert np.allclose(mid, (z1 + z2) / math.sqrt(2), atol=1e-12)


def test_slerp_degenerate_cases():
    z = np.array([1.0, 2.0])
    near = z * (1 + 1e-9)
    out = slerp(z, near, 0.5)  # parallel: linear fallback
    assert np.allclose(out, z, atol=1e-6)
    with pytest.raises(ValueError):
        slerp(z, -z, 0.3)
    with pytest.raises(ValueError):
        slerp(np.zeros(2), z, 0.1)


def test_kde_standard_normal():
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(10_000)
    grid = np.linspace(-5, 5, 501)
    dens = kde(vals, grid)
    at_zero = dens[250]
    assert abs(at_zero - 0.3989) < 0.02
    integral = np.trapezoid(dens, grid)
    assert abs(integral - 1.0) < 1e-3


def test_kde_symmetry():
    vals = np.array([-2.0, -1.0, 1.0, 2.0])
    grid = np.linspace(-4, 4, 81)
    dens = kde(vals, grid)
    assert np.allclose(dens, dens[::-1], atol=1e-12)


def test_kde_degenerate_input():
    with pytest.raises(ValueError):
        kde([1.0, 1.0, 1.0], np.linspace(0, 2, 10))
    with pytest.raises(ValueError):
        kde([1.0], np.linspace(0, 2, 10))


def test_mode_of_s_tie_break():
    assert mode_of_s([1.5, 1.5, 2.5, 2.5, 3.0]) == 1.5
    assert mode_of_s([4.3944491, 4.3944487, 0.0]) == 4.394449  # rounding merges


def test_uniqueness_novelty_edges():
    assert uniqueness_novelty(["a"] * 10, ["b"]) == (0.1, 1.0)
    unique, novel = uniqueness_novelty(["a", "b"], ["a", "b"])
    assert unique == 1.0 and novel == 0.0


def test_functional_group():
    assert functional_group(GOLDEN_SETUP, -1) == "HOLO"
    assert functional_group(GOLDEN_SETUP, -2) == "REF"
    assert functional_group((), -1) == "NONE"


def test_interpolate_self_is_constant(small_model, vocab):
    steps = interpolation_path(small_model, GOLDEN_SETUP, GOLDEN_SETUP, vocab,
                               steps=5)
    assert len(steps) == 5
    assert len({st.tokens for st in steps}) == 1
    assert steps[0].t == 0.0 and steps[-1].t == 1.0


def test_distance_vs_ds_identical_records(small_model, vocab):
    rec = label(GOLDEN_SETUP).record()
    pairs, binned = distance_vs_ds(small_model, [rec, rec], vocab, n_pairs=25)
    assert len(pairs) == 25
    # identical setups: same S exactly; latent distance only up to BLAS
    # row-position jitter in the batched encoder matmuls
    assert all(d < 1e-12 and ds == 0.0 for d, ds in pairs)


def test_distance_vs_ds_counts(small_model, vocab, labeled_records):
    pairs, binned = distance_vs_ds(small_model, labeled_records, vocab,
                                   n_pairs=200, seed=3)
    assert len(pairs) == 200
    assert sum(n for _, _, n in binned) == 200
    rho, p = distance_ds_correlation(binned)
    assert -1.0 <= rho <= 1.0 and 0.0 <= p <= 1.0


def test_latent_map_schema(small_model, vocab, labeled_records):
    rows = latent_map(small_model, labeled_records, vocab)
    assert len(rows) == len(labeled_records)
    expected = {"z0", "z1", "z2", "proj_x", "proj_y", "s", "length",
                "last_device", "second_last_device", "functional_group"}
    assert expected == set(rows[0])
    for row, rec in zip(rows, labeled_records):
        assert row["length"] == len(rec.tokens.split())


def test_compare_distributions_identical_sets(vocab, labeled_records):
    labeled = relabel(labeled_records, vocab)
    report = compare_distributions(labeled, labeled, vocab, grid_points=50)
    assert isinstance(report, DistributionReport)
    assert report.stats["generated"] == report.stats["training"]
    for name in report.entropy_kde:
        assert report.entropy_kde[name]["generated"] == \
            report.entropy_kde[name]["training"]
        assert report.rank_hist[name]["generated"] == \
            report.rank_hist[name]["training"]
    for kind in report.device_hist:
        hist = report.device_hist[kind]["training"]
        assert sum(hist.values()) == len(labeled)


def test_generate_setups_reproducible(small_model, vocab):
    a = generate_setups(small_model, vocab, 10, seed=5)
    b = generate_setups(small_model, vocab, 10, seed=5)
    assert [r.tokens for r in a] == [r.tokens for r in b]
    assert all(r.length <= vocab.max_len for r in a)
