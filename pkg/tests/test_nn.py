import math

import numpy as np
import pytest

from oracles import conv1d_loop, numeric_gradient
from qovae.nn import (Adam, Conv1d, Dense, GRU, ParamStore, adam_step,
                      load_checkpoint, log_softmax, relu, save_checkpoint,
                      sigmoid, softmax)


def make_store():
    return ParamStore()


def test_param_store_views_alias_flat(rng):
    store = make_store()
    Dense(store, "lin", 3, 2)
    store.allocate(rng)
    store.flat[:] = np.arange(store.size, dtype=float)
    assert store["lin.W"][0, 0] == 0.0
    store["lin.W"][0, 0] = 99.0
    assert store.flat[0] == 99.0
    assert store.size == 3 * 2 + 2


def test_param_store_rejects_duplicates(rng):
    store = make_store()
    Dense(store, "a", 2, 2)
    with pytest.raises(ValueError):
        Dense(store, "a", 2, 2)


def test_softmax_uniform_and_shift_invariance(rng):
    assert np.allclose(softmax(np.zeros(3)), [1 / 3] * 3)
    v = rng.standard_normal(12)
    assert np.allclose(softmax(v), softmax(v + 5.7), atol=1e-12)
    assert abs(softmax(v).sum() - 1.0) < 1e-12


def test_log_softmax_matches_log_of_softmax(rng):
    v = rng.standard_normal((4, 9))
    assert np.allclose(log_softmax(v), np.log(softmax(v)), atol=1e-12)


def test_sigmoid_stable_extremes():
    assert sigmoid(np.array([-745.0]))[0] == pytest.approx(0.0, abs=1e-300)
    assert sigmoid(np.array([745.0]))[0] == pytest.approx(1.0)
    assert sigmoid(np.array([0.0]))[0] == 0.5


def test_conv1d_width1_identity_selector(rng):
    store = make_store()
    conv = Conv1d(store, "c", 4, 4, 1)
    store.allocate(rng)
    store["c.W"][...] = 0.0
    for f in range(4):
        store["c.W"][f, 0, f] = 1.0
    store["c.b"][...] = 0.0
    x = rng.standard_normal((2, 6, 4))
    y, _ = conv.forward(x)
    assert np.allclose(y, relu(x))


def test_conv1d_ones_filter_counts_onehots(rng):
    store = make_store()
    conv = Conv1d(store, "c", 5, 1, 3)
    store.allocate(rng)
    store["c.W"][...] = 1.0
    store["c.b"][...] = 0.0
    x = np.zeros((1, 8, 5))
    for t in range(8):
        x[0, t, t % 5] = 1.0
    y, _ = conv.forward(x)
    assert np.allclose(y, 3.0)  # every window holds exactly 3 ones


def test_conv1d_matches_loop_oracle(rng):
    for _ in range(5):
        store = make_store()
        conv = Conv1d(store, "c", 6, 3, 3)
        store.allocate(rng)
        x = rng.standard_normal((3, 10, 6))
        y, _ = conv.forward(x)
        ref = conv1d_loop(x, store["c.W"], store["c.b"])
        assert np.max(np.abs(y - ref)) < 1e-12


def test_gru_zero_params_keep_zero_state(rng):
    store = make_store()
    gru = GRU(store, "g", 3, 4)
    store.allocate(rng)
    store.flat[:] = 0.0
    x = rng.standard_normal((2, 5, 3))
    h, _ = gru.forward(x)
    assert np.allclose(h, 0.0)


def test_gru_single_step_hand_computed(rng):
    store = make_store()
    gru = GRU(store, "g", 1, 1)
    store.allocate(rng)
    wz, uz, bz = 0.3, -0.2, 0.1
    wr, ur, br = -0.4, 0.5, 0.2
    wh, uh, bh = 0.7, -0.6, -0.1
    for key, val in (("Wz", wz), ("Uz", uz), ("bz", bz), ("Wr", wr), ("Ur", ur),
                     ("br", br), ("Wh", wh), ("Uh", uh), ("bh", bh)):
        store[f"g.{key}"][...] = val
    x = np.array([[[0.9]]])
    h, _ = gru.forward(x)
    z = 1 / (1 + math.exp(-(wz * 0.9 + bz)))
    hc = math.tanh(wh * 0.9 + bh)  # h_prev = 0 so the reset gate drops out
    expected = z * hc
    assert abs(h[0, 0, 0] - expected) < 1e-12


def test_gru_contractive_convergence(rng):
    store = make_store()
    gru = GRU(store, "g", 4, 6)
    store.allocate(rng)
    store.flat[:] *= 0.3  # shrink into the contractive regime
    x = np.repeat(rng.standard_normal((1, 1, 4)), 40, axis=1)
    h, _ = gru.forward(x)
    deltas = np.linalg.norm(np.diff(h[0], axis=0), axis=1)
    assert deltas[-1] < deltas[0]
    assert deltas[-1] < 1e-3


def _check_layer_gradients(build, x_shape, rng, n_checks=25, tol=1e-4):
    store = make_store()
    layer = build(store)
    store.allocate(rng)
    x = rng.standard_normal(x_shape)
    dy_shape = layer.forward(x)[0].shape
    dy = rng.standard_normal(dy_shape)

    def loss():
        y, _ = layer.forward(x)
        return float(np.sum(y * dy))

    store.zero_grad()
    y, cache = layer.forward(x)
    layer.backward(dy, cache)
    idx = rng.choice(store.size, size=min(n_checks, store.size), replace=False)
    num = numeric_gradient(loss, store.flat, indices=idx)
    for i in idx:
        a, n = store.grad[i], num[i]
        assert abs(a - n) <= tol * max(1.0, abs(a), abs(n)), f"param {i}: {a} vs {n}"

    # input gradient via the same pairing
    store.zero_grad()
    y, cache = layer.forward(x)
    dx = layer.backward(dy, cache)
    flat_x = x.reshape(-1)
    for i in rng.choice(flat_x.size, size=min(10, flat_x.size), replace=False):
        old = flat_x[i]
        flat_x[i] = old + 1e-5
        fp = loss()
        flat_x[i] = old - 1e-5
        fm = loss()
        flat_x[i] = old
        n = (fp - fm) / 2e-5
        a = dx.reshape(-1)[i]
        assert abs(a - n) <= tol * max(1.0, abs(a), abs(n))


def test_dense_gradients(rng):
    for shape in ((2, 5), (7, 3), (1, 4)):
        _check_layer_gradients(lambda s: Dense(s, "d", shape[1], 4),
                               shape, rng)


def test_conv_gradients(rng):
    for batch, t_len, d, f, w in ((2, 8, 3, 4, 3), (1, 5, 2, 3, 2), (3, 6, 4, 2, 4)):
        _check_layer_gradients(lambda s: Conv1d(s, "c", d, f, w),
                               (batch, t_len, d), rng)


def test_gru_gradients(rng):
    for batch, t_len, d, h in ((2, 4, 3, 5), (1, 6, 2, 3), (3, 3, 4, 4)):
        _check_layer_gradients(lambda s: GRU(s, "g", d, h),
                               (batch, t_len, d), rng)


def test_zero_upstream_gradient_gives_zero_grads(rng):
    store = make_store()
    layer = Dense(store, "d", 4, 3)
    store.allocate(rng)
    x = rng.standard_normal((5, 4))
    y, cache = layer.forward(x)
    store.zero_grad()
    layer.backward(np.zeros_like(y), cache)
    assert np.all(store.grad == 0.0)


def test_gradient_linearity(rng):
    store = make_store()
    layer = Dense(store, "d", 4, 3)
    store.allocate(rng)
    x = rng.standard_normal((5, 4))
    dy = rng.standard_normal((5, 3))
    y, cache = layer.forward(x)
    store.zero_grad()
    layer.backward(dy, cache)
    g1 = store.grad.copy()
    store.zero_grad()
    y, cache = layer.forward(x)
    layer.backward(3.5 * dy, cache)
    assert np.allclose(store.grad, 3.5 * g1, atol=1e-12)


def test_mlp_composition_identity(rng):
    # a 3-layer MLP applied at once equals composing the single layers
    store = make_store()
    l1, l2, l3 = (Dense(store, "m1", 5, 6), Dense(store, "m2", 6, 6),
                  Dense(store, "m3", 6, 2))
    store.allocate(rng)
    x = rng.standard_normal((4, 5))
    h1 = relu(l1.forward(x)[0])
    h2 = relu(l2.forward(h1)[0])
    composed = l3.forward(h2)[0]
    again = l3.forward(relu(l2.forward(relu(l1.forward(x)[0]))[0]))[0]
    assert np.array_equal(composed, again)


def test_adam_zero_grad_keeps_params():
    params = np.array([1.0, -2.0, 3.0])
    opt = Adam(3, lr=0.1)
    adam_step(params, np.zeros(3), opt)
    assert np.allclose(params, [1.0, -2.0, 3.0])


def test_adam_first_step_magnitude_is_lr():
    # update = lr * g / (|g| + eps), so magnitude ~ lr across 12 decades
    for g in (1e-6, 1.0, 1e6):
        params = np.zeros(1)
        opt = Adam(1, lr=0.01)
        opt.step(params, np.array([g]))
        assert abs(params[0]) == pytest.approx(0.01, rel=0.02)


def test_adam_quadratic_bowl_convergence():
    target = np.array([1.5, -0.7, 2.2, 0.0])
    params = np.zeros(4)
    opt = Adam(4, lr=0.05)
    for _ in range(5000):
        opt.step(params, params - target)
        if np.max(np.abs(params - target)) < 1e-6:
            break
    assert np.max(np.abs(params - target)) < 1e-6


def test_adam_determinism(rng):
    g = rng.standard_normal(10)
    p1, p2 = np.ones(10), np.ones(10)
    o1, o2 = Adam(10, lr=0.01), Adam(10, lr=0.01)
    for _ in range(50):
        o1.step(p1, g * p1)
        o2.step(p2, g * p2)
    assert np.array_equal(p1, p2)


def test_checkpoint_roundtrip(tmp_path, rng):
    store = make_store()
    Dense(store, "a", 3, 4)
    GRU(store, "g", 4, 2)
    store.allocate(rng)
    prefix = tmp_path / "model"
    save_checkpoint(prefix, store, {"config": {"x": 1}, "vocab_digest": "d" * 64})
    manifest, flat = load_checkpoint(prefix)
    assert np.array_equal(flat, store.flat)
    assert manifest["meta"]["vocab_digest"] == "d" * 64
    names = [p["name"] for p in manifest["params"]]
    assert names[0] == "a.W"
    offsets = {p["name"]: p["offset"] for p in manifest["params"]}
    assert offsets["a.b"] == 12


def test_checkpoint_size_mismatch(tmp_path, rng):
    store = make_store()
    Dense(store, "a", 3, 4)
    store.allocate(rng)
    prefix = tmp_path / "model"
    save_checkpoint(prefix, store, {})
    bin_path = tmp_path / "model.params.bin"
    bin_path.write_bytes(bin_path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_checkpoint(prefix)
