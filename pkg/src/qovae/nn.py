"""Dense-tensor kernels with hand-chained reverse-mode gradients.

Exactly the layers the model needs: valid (no padding) 1-D convolution
with fused ReLU, fully-connected layers, gated recurrent units, softmax
and the usual elementwise activations, plus Adam.  Everything is float64
numpy; each layer owns views into one flat parameter buffer so the
optimizer sees a single vector while layers see structured tensors.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


class ParamStore:
    """Flat float64 parameter and gradient buffers with named views.

    Layers declare named tensors; :meth:`allocate` then carves views out
    of one contiguous array, so `flat` is the optimizer's vector and the
    views alias the very same memory.
    """

    def __init__(self):
        self.names: list[str] = []
        self.shapes: dict[str, tuple[int, ...]] = {}
        self.offsets: dict[str, int] = {}
        self.fan_in: dict[str, int] = {}
        self.init: dict[str, str] = {}
        self.gain: dict[str, float] = {}
        self.size = 0
        self.flat: np.ndarray | None = None
        self.grad: np.ndarray | None = None
        self._views: dict[str, np.ndarray] = {}
        self._gviews: dict[str, np.ndarray] = {}

    def declare(self, name: str, shape: tuple[int, ...], fan_in: int = 0,
                init: str = "uniform", gain: float = 1.0) -> None:
        if self.flat is not None:
            raise RuntimeError("store already allocated")
        if name in self.shapes:
            raise ValueError(f"duplicate parameter {name!r}")
        self.names.append(name)
        self.shapes[name] = tuple(shape)
        self.offsets[name] = self.size
        self.fan_in[name] = fan_in
        self.init[name] = init
        self.gain[name] = gain
        self.size += int(np.prod(shape))

    def allocate(self, rng: np.random.Generator) -> None:
        """Carve out views and initialize.

        Weights: uniform(+-sqrt(1/fan_in)); biases (fan_in == 0): zero.
        Recurrent square matrices use an orthogonal draw instead, which
        keeps the hidden-state trajectory alive over long sequences (a
        decayed trajectory stalls learning of position-dependent outputs).
        """
        self.flat = np.zeros(self.size)
        self.grad = np.zeros(self.size)
        for name in self.names:
            off, shape = self.offsets[name], self.shapes[name]
            n = int(np.prod(shape))
            view = self.flat[off:off + n].reshape(shape)
            self._views[name] = view
            self._gviews[name] = self.grad[off:off + n].reshape(shape)
            if self.init[name] == "orthogonal":
                q, r = np.linalg.qr(rng.standard_normal(shape))
                view[...] = q * np.sign(np.diag(r))
                continue
            fan = self.fan_in[name]
            if fan > 0:
                # "he" keeps the signal from decaying through stacked ReLU
                # layers; the plain fan rule loses ~0.4x per layer
                base = 6.0 if self.init[name] == "he" else 1.0
                bound = self.gain[name] * (base / fan) ** 0.5
                view[...] = rng.uniform(-bound, bound, size=shape)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._views[name]

    def g(self, name: str) -> np.ndarray:
        return self._gviews[name]

    def zero_grad(self) -> None:
        self.grad[:] = 0.0

    def set_flat(self, values: np.ndarray) -> None:
        if values.shape != self.flat.shape:
            raise ValueError("flat parameter size mismatch")
        self.flat[:] = values

    def manifest(self) -> list[dict]:
        return [{"name": n, "shape": list(self.shapes[n]), "offset": self.offsets[n]}
                for n in self.names]


class Dense:
    """y = x @ W + b."""

    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int,
                 gain: float = 1.0, init: str = "uniform"):
        self.store = store
        self.w_name = f"{name}.W"
        self.b_name = f"{name}.b"
        store.declare(self.w_name, (n_in, n_out), fan_in=n_in, gain=gain,
                      init=init)
        store.declare(self.b_name, (n_out,))

    def forward(self, x: np.ndarray):
        w = self.store[self.w_name]
        y = x @ w + self.store[self.b_name]
        return y, x

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        x = cache
        x2 = x.reshape(-1, x.shape[-1])
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.store.g(self.w_name)[...] += x2.T @ dy2
        self.store.g(self.b_name)[...] += dy2.sum(axis=0)
        return dy @ self.store[self.w_name].T


class Conv1d:
    """Valid 1-D convolution over the sequence axis, bias, then ReLU.

    Input (B, T, d), filters (n_f, width, d), output (B, T-width+1, n_f):
    out[b, t, f] = relu(sum_l w[f, l] . x[b, t+l] + bias[f]).
    """

    def __init__(self, store: ParamStore, name: str, n_in: int,
                 n_filters: int, width: int, init: str = "he"):
        self.store = store
        self.width = width
        self.w_name = f"{name}.W"
        self.b_name = f"{name}.b"
        store.declare(self.w_name, (n_filters, width, n_in),
                      fan_in=width * n_in, init=init)
        store.declare(self.b_name, (n_filters,))

    def forward(self, x: np.ndarray):
        w = self.store[self.w_name]
        windows = np.lib.stride_tricks.sliding_window_view(x, self.width, axis=1)
        # windows: (B, T', d, width); filters indexed (f, width, d)
        pre = np.einsum("btdl,fld->btf", windows, w, optimize=True)
        pre += self.store[self.b_name]
        return relu(pre), (x, windows, pre > 0)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        x, windows, active = cache
        dpre = dy * active
        self.store.g(self.b_name)[...] += dpre.sum(axis=(0, 1))
        self.store.g(self.w_name)[...] += np.einsum("btdl,btf->fld", windows, dpre,
                                                    optimize=True)
        w = self.store[self.w_name]
        dx = np.zeros_like(x)
        t_out = dpre.shape[1]
        for l in range(self.width):
            dx[:, l:l + t_out, :] += dpre @ w[:, l, :]
        return dx


class GRU:
    """Gated recurrent unit layer over (B, T, n_in) with h_0 = 0.

    Per step: update gate z' = sigma(W_i x + U_i h + b_i), reset gate
    r = sigma(W_r x + U_r h + b_r), candidate h' = tanh(W_h x +
    U_h (r * h) + b_h), new state h = (1 - z') * h_prev + z' * h'.
    """

    def __init__(self, store: ParamStore, name: str, n_in: int, n_hidden: int,
                 input_gain: float = 1.0):
        self.store = store
        self.n_hidden = n_hidden
        self.p = {}
        for gate in ("z", "r", "h"):
            for kind, shape, fan, init, gain in (
                    ("W", (n_in, n_hidden), n_in, "uniform", input_gain),
                    ("U", (n_hidden, n_hidden), n_hidden, "orthogonal", 1.0),
                    ("b", (n_hidden,), 0, "uniform", 1.0)):
                key = f"{kind}{gate}"
                pname = f"{name}.{key}"
                store.declare(pname, shape, fan_in=fan, init=init, gain=gain)
                self.p[key] = pname

    def _w(self, key: str) -> np.ndarray:
        return self.store[self.p[key]]

    def forward(self, x: np.ndarray):
        s = self.store
        wz, uz, bz = self._w("Wz"), self._w("Uz"), self._w("bz")
        wr, ur, br = self._w("Wr"), self._w("Ur"), self._w("br")
        wh, uh, bh = self._w("Wh"), self._w("Uh"), self._w("bh")
        batch, t_len, _ = x.shape
        h = np.zeros((batch, self.n_hidden))
        out = np.empty((batch, t_len, self.n_hidden))
        steps = []
        for t in range(t_len):
            xt = x[:, t, :]
            z = sigmoid(xt @ wz + h @ uz + bz)
            r = sigmoid(xt @ wr + h @ ur + br)
            hc = np.tanh(xt @ wh + (r * h) @ uh + bh)
            h_new = (1.0 - z) * h + z * hc
            steps.append((xt, h, z, r, hc))
            h = h_new
            out[:, t, :] = h
        return out, steps

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        steps = cache
        g = self.store.g
        uz, ur, uh = self._w("Uz"), self._w("Ur"), self._w("Uh")
        wz, wr, wh = self._w("Wz"), self._w("Wr"), self._w("Wh")
        dx = np.empty((dout.shape[0], len(steps), wz.shape[0]))
        dh_next = np.zeros((dout.shape[0], self.n_hidden))
        for t in range(len(steps) - 1, -1, -1):
            xt, h_prev, z, r, hc = steps[t]
            dh = dout[:, t, :] + dh_next
            dz = dh * (hc - h_prev)
            dhc = dh * z
            dh_prev = dh * (1.0 - z)
            dhc_pre = dhc * (1.0 - hc * hc)
            g(self.p["Wh"])[...] += xt.T @ dhc_pre
            g(self.p["Uh"])[...] += (r * h_prev).T @ dhc_pre
            g(self.p["bh"])[...] += dhc_pre.sum(axis=0)
            drh = dhc_pre @ uh.T
            dr = drh * h_prev
            dh_prev += drh * r
            dz_pre = dz * z * (1.0 - z)
            dr_pre = dr * r * (1.0 - r)
            g(self.p["Wz"])[...] += xt.T @ dz_pre
            g(self.p["Uz"])[...] += h_prev.T @ dz_pre
            g(self.p["bz"])[...] += dz_pre.sum(axis=0)
            g(self.p["Wr"])[...] += xt.T @ dr_pre
            g(self.p["Ur"])[...] += h_prev.T @ dr_pre
            g(self.p["br"])[...] += dr_pre.sum(axis=0)
            dh_prev += dz_pre @ uz.T + dr_pre @ ur.T
            dx[:, t, :] = dz_pre @ wz.T + dr_pre @ wr.T + dhc_pre @ wh.T
            dh_next = dh_prev
        return dx


class Adam:
    """Adam with bias correction over a flat parameter vector."""

    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: Adam) -> np.ndarray:
    """Functional wrapper: one Adam update, returns the updated params."""
    state.step(params, grads)
    return params


def save_checkpoint(prefix: str | Path, store: ParamStore, meta: dict) -> None:
    """Manifest JSON (layer names/shapes/offsets plus meta) + raw '<f8' array."""
    prefix = Path(prefix)
    manifest = {"format": "qovae-checkpoint-v1", "params": store.manifest(),
                "meta": meta}
    prefix.with_suffix(prefix.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    store.flat.astype("<f8").tofile(prefix.with_suffix(prefix.suffix + ".params.bin"))


def load_checkpoint(prefix: str | Path) -> tuple[dict, np.ndarray]:
    prefix = Path(prefix)
    manifest = json.loads(prefix.with_suffix(prefix.suffix + ".manifest.json")
                          .read_text(encoding="utf-8"))
    flat = np.fromfile(prefix.with_suffix(prefix.suffix + ".params.bin"), dtype="<f8")
    expected = sum(int(np.prod(p["shape"])) for p in manifest["params"])
    if flat.size != expected:
        raise ValueError(f"checkpoint has {flat.size} values, manifest expects {expected}")
    return manifest, flat.astype(np.float64)
