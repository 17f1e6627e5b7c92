"""Sequence VAE over one-hot device matrices.

Encoder: three 1-D conv layers, flatten, three-layer MLP emitting the mean
and log standard deviation of a diagonal Gaussian over the latent space.
Decoder: a single ReLU layer maps a latent sample to a seed vector that is
fed, repeated, into a 3-layer GRU stack; a softmax head turns each hidden
state into a categorical distribution over the device vocabulary (PAD
included), so the reconstruction likelihood is a product of T independent
categoricals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .encoding import Setup, SetupRecord, Vocabulary, encode_onehot, parse
from .nn import (Adam, Conv1d, Dense, GRU, ParamStore, load_checkpoint,
                 log_softmax, relu, save_checkpoint, softmax)


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class QovaeConfig:
    """Architecture and training knobs.

    latent_dim 6 is the high-capacity variant, 2 the low-dimensional one
    used for direct latent-space inspection.
    """

    latent_dim: int = 6
    conv_filters: int = 18
    conv_width: int = 3
    conv_layers: int = 3
    enc_hidden: int = 128
    dec_seed: int = 64
    gru_hidden: int = 128
    gru_layers: int = 3
    max_len: int = 12
    vocab_size: int = 67
    lr: float = 1e-3
    batch: int = 64
    epochs: int = 200
    seed: int = 0
    val_frac: float = 0.1
    dec_init_gain: float = 1.0

    def __post_init__(self):
        t_out = self.max_len - self.conv_layers * (self.conv_width - 1)
        if t_out < 1:
            raise ValueError("convolution stack longer than the sequence")

    @property
    def conv_out_len(self) -> int:
        return self.max_len - self.conv_layers * (self.conv_width - 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "QovaeConfig":
        return cls(**raw)


@dataclass
class EpochStats:
    epoch: int
    recon: float
    kl: float
    val_recon: float
    val_kl: float

    @property
    def loss(self) -> float:
        return self.recon + self.kl

    @property
    def val_loss(self) -> float:
        return self.val_recon + self.val_kl


@dataclass
class TrainResult:
    log: list[EpochStats]
    best_epoch: int
    best_val_loss: float
    best_params: np.ndarray = field(repr=False)
    wall_time_s: float = 0.0


class Qovae:
    """The variational autoencoder over experiment sequences."""

    def __init__(self, config: QovaeConfig):
        self.config = config
        self.store = ParamStore()
        c = config
        self.convs = []
        n_in = c.vocab_size
        for i in range(c.conv_layers):
            self.convs.append(Conv1d(self.store, f"enc.conv{i + 1}", n_in,
                                     c.conv_filters, c.conv_width))
            n_in = c.conv_filters
        flat_dim = c.conv_out_len * c.conv_filters
        self.enc_fc1 = Dense(self.store, "enc.fc1", flat_dim, c.enc_hidden,
                             init="he")
        self.enc_fc2 = Dense(self.store, "enc.fc2", c.enc_hidden, c.enc_hidden,
                             init="he")
        self.enc_out = Dense(self.store, "enc.out", c.enc_hidden, 2 * c.latent_dim)
        self.dec_seed = Dense(self.store, "dec.seed", c.latent_dim, c.dec_seed,
                              gain=c.dec_init_gain, init="he")
        self.grus = []
        n_in = c.dec_seed
        for i in range(c.gru_layers):
            self.grus.append(GRU(self.store, f"dec.gru{i + 1}", n_in,
                                 c.gru_hidden, input_gain=c.dec_init_gain))
            n_in = c.gru_hidden
        self.dec_out = Dense(self.store, "dec.out", c.gru_hidden, c.vocab_size,
                             gain=c.dec_init_gain)
        self.store.allocate(np.random.default_rng(config.seed))

    # -- encoder -----------------------------------------------------------

    def _encode(self, x: np.ndarray):
        caches = []
        h = x
        for conv in self.convs:
            h, cache = conv.forward(h)
            caches.append(cache)
        batch = h.shape[0]
        flat_shape = h.shape
        h = h.reshape(batch, -1)
        h1, c1 = self.enc_fc1.forward(h)
        a1 = relu(h1)
        h2, c2 = self.enc_fc2.forward(a1)
        a2 = relu(h2)
        out, c3 = self.enc_out.forward(a2)
        mu = out[:, :self.config.latent_dim]
        logsig = out[:, self.config.latent_dim:]
        caches.extend([flat_shape, (c1, h1), (c2, h2), c3])
        return mu, logsig, caches

    def _encode_backward(self, dmu: np.ndarray, dlogsig: np.ndarray, caches) -> None:
        c3 = caches[-1]
        c2, h2 = caches[-2]
        c1, h1 = caches[-3]
        flat_shape = caches[-4]
        dout = np.concatenate([dmu, dlogsig], axis=1)
        da2 = self.enc_out.backward(dout, c3)
        dh2 = da2 * (h2 > 0)
        da1 = self.enc_fc2.backward(dh2, c2)
        dh1 = da1 * (h1 > 0)
        dflat = self.enc_fc1.backward(dh1, c1)
        dh = dflat.reshape(flat_shape)
        for conv, cache in zip(reversed(self.convs), reversed(caches[:-4])):
            dh = conv.backward(dh, cache)

    def encode(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic posterior parameters (mu, log sigma) for a batch."""
        single = x.ndim == 2
        if single:
            x = x[None]
        mu, logsig, _ = self._encode(x)
        if single:
            return mu[0], logsig[0]
        return mu, logsig

    def encode_means(self, xs: np.ndarray, chunk: int = 256) -> np.ndarray:
        mus = []
        for i in range(0, xs.shape[0], chunk):
            mu, _, _ = self._encode(xs[i:i + chunk])
            mus.append(mu)
        return np.concatenate(mus, axis=0)

    # -- decoder -----------------------------------------------------------

    def _decode(self, z: np.ndarray):
        seed_pre, c_seed = self.dec_seed.forward(z)
        seed = relu(seed_pre)
        h = np.repeat(seed[:, None, :], self.config.max_len, axis=1)
        caches = [(c_seed, seed_pre)]
        for gru in self.grus:
            h, cache = gru.forward(h)
            caches.append(cache)
        logits, c_out = self.dec_out.forward(h)
        caches.append(c_out)
        return logits, caches

    def _decode_backward(self, dlogits: np.ndarray, caches) -> np.ndarray:
        dh = self.dec_out.backward(dlogits, caches[-1])
        for gru, cache in zip(reversed(self.grus), reversed(caches[1:-1])):
            dh = gru.backward(dh, cache)
        dseed = dh.sum(axis=1)
        c_seed, seed_pre = caches[0]
        dseed_pre = dseed * (seed_pre > 0)
        return self.dec_seed.backward(dseed_pre, c_seed)

    def decode_probs(self, z: np.ndarray) -> np.ndarray:
        """Per-step categorical distributions over the vocabulary."""
        single = z.ndim == 1
        if single:
            z = z[None]
        logits, _ = self._decode(z)
        probs = softmax(logits, axis=-1)
        return probs[0] if single else probs

    def decode_setup(self, z: np.ndarray, vocab: Vocabulary, mode: str = "argmax",
                     rng: np.random.Generator | None = None) -> Setup:
        """Decode one latent vector into a device sequence.

        Argmax decoding is deterministic (used for optimization and
        interpolation); categorical sampling gives generative diversity.
        The sequence stops at the first PAD step.
        """
        probs = self.decode_probs(np.asarray(z, dtype=float))
        if mode == "argmax":
            idx = np.argmax(probs, axis=-1)
        elif mode == "sample":
            if rng is None:
                raise ValueError("sample mode needs an rng")
            cum = np.cumsum(probs, axis=-1)
            cum /= cum[:, -1:]
            u = rng.random(probs.shape[0])
            idx = np.array([np.searchsorted(cum[t], u[t], side="right")
                            for t in range(probs.shape[0])])
            idx = np.minimum(idx, probs.shape[1] - 1)
        else:
            raise ValueError(f"unknown decode mode {mode!r}")
        devices = []
        for i in idx:
            if int(i) == Vocabulary.PAD:
                break
            devices.append(vocab.devices[int(i)])
        return tuple(devices)

    # -- objective ---------------------------------------------------------

    def elbo(self, x: np.ndarray, rng: np.random.Generator,
             train: bool = False) -> tuple[float, float, float]:
        """Single-sample ELBO estimate; accumulates gradients when training.

        Returns (loss, recon, kl), all averaged over the batch; loss is the
        negative ELBO: categorical cross-entropy summed over the T steps
        plus the analytic KL against the standard normal prior.
        """
        batch = x.shape[0]
        mu, logsig, enc_caches = self._encode(x)
        sigma = np.exp(logsig)
        eps = rng.standard_normal(mu.shape)
        z = mu + sigma * eps
        logits, dec_caches = self._decode(z)
        logp = log_softmax(logits, axis=-1)
        recon = float(-np.sum(x * logp) / batch)
        kl = float(0.5 * np.sum(mu ** 2 + sigma ** 2 - 1.0 - 2.0 * logsig) / batch)
        if train:
            dlogits = (softmax(logits, axis=-1) - x) / batch
            dz = self._decode_backward(dlogits, dec_caches)
            dmu = dz + mu / batch
            dlogsig = dz * eps * sigma + (sigma ** 2 - 1.0) / batch
            self._encode_backward(dmu, dlogsig, enc_caches)
        return recon + kl, recon, kl

    # -- training ----------------------------------------------------------

    def train(self, xs: np.ndarray, progress=None) -> TrainResult:
        """Minibatch Adam on the mean negative ELBO with a 90/10 split."""
        c = self.config
        if xs.shape[0] < 2:
            raise ValueError("dataset too small to split")
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(c.seed, 1)))
        order = rng.permutation(xs.shape[0])
        n_val = max(1, int(round(c.val_frac * xs.shape[0])))
        val = xs[order[:n_val]]
        train_xs = xs[order[n_val:]]
        opt = Adam(self.store.size, lr=c.lr)
        log: list[EpochStats] = []
        best_val = np.inf
        best_epoch = -1
        best_params = self.store.flat.copy()
        t0 = time.monotonic()
        for epoch in range(c.epochs):
            perm = rng.permutation(train_xs.shape[0])
            recon_sum = kl_sum = 0.0
            n_seen = 0
            for i in range(0, train_xs.shape[0], c.batch):
                batch = train_xs[perm[i:i + c.batch]]
                self.store.zero_grad()
                loss, recon, kl = self.elbo(batch, rng, train=True)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
                opt.step(self.store.flat, self.store.grad)
                recon_sum += recon * batch.shape[0]
                kl_sum += kl * batch.shape[0]
                n_seen += batch.shape[0]
            val_rng = np.random.default_rng(np.random.SeedSequence(entropy=(c.seed, 2, epoch)))
            _, val_recon, val_kl = self.elbo(val, val_rng, train=False)
            stats = EpochStats(epoch=epoch, recon=recon_sum / n_seen,
                               kl=kl_sum / n_seen, val_recon=val_recon,
                               val_kl=val_kl)
            log.append(stats)
            if stats.val_loss < best_val:
                best_val = stats.val_loss
                best_epoch = epoch
                best_params = self.store.flat.copy()
            if progress is not None:
                progress(stats)
        return TrainResult(log=log, best_epoch=best_epoch, best_val_loss=best_val,
                           best_params=best_params,
                           wall_time_s=time.monotonic() - t0)

    # -- persistence ---------------------------------------------------------

    def save(self, prefix: str, vocab_digest: str, extra: dict | None = None) -> None:
        meta = {"config": self.config.to_dict(), "vocab_digest": vocab_digest}
        if extra:
            meta.update(extra)
        save_checkpoint(prefix, self.store, meta)

    @classmethod
    def load(cls, prefix: str) -> tuple["Qovae", dict]:
        manifest, flat = load_checkpoint(prefix)
        config = QovaeConfig.from_dict(manifest["meta"]["config"])
        model = cls(config)
        model.store.set_flat(flat)
        return model, manifest["meta"]


def encode_dataset(records: list[SetupRecord], vocab: Vocabulary) -> np.ndarray:
    """Stack records into the (N, T, D) one-hot training tensor."""
    return np.stack([encode_onehot(parse(r.tokens, vocab), vocab) for r in records])
