"""Cross-modal embedding model over attributes and image features.

Four small tanh MLPs share one latent space: an attribute encoder and
decoder (R^d <-> R^l) and an image-feature encoder and decoder
(R^m <-> R^l). Training minimizes a weighted sum of within-modality
reconstruction, cross-modal reconstruction, and latent alignment between a
class's attribute embedding and the mean embedding of its training images.
Everything is plain numpy with hand-written backprop; the attribute
encoder's Jacobian is computed analytically layer by layer, which the
acquisition scores rely on.

Classifiers are multinomial logistic maps trained on latent points: base
classes contribute encoded training images, novel classes contribute
noise-augmented copies of their encoded (possibly imputed) descriptor.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence
import warnings

import numpy as np

from ._rng import make_rng
from .dataset import Dataset, image_split

CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss; carries the offending epoch."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters for the embedding model and the latent classifier.

    ``loss_weights`` weighs (reconstruction, cross-reconstruction, latent
    alignment). ``batch_size`` must stay None: training is full-batch so the
    per-class latent means in the alignment term are exact.
    """

    latent_dim: int = 12
    hidden_dims: tuple[int, ...] = (48,)
    activation: str = "tanh"
    epochs: int = 2000
    batch_size: int | None = None
    learning_rate: float = 0.3
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    n_aug: int = 50
    sigma_aug: float = 0.05
    clf_epochs: int = 500
    clf_lr: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if any(w < 0 for w in self.loss_weights) or len(self.loss_weights) != 3:
            raise ValueError("loss_weights must be three non-negative reals")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.batch_size is not None:
            raise ValueError("only full-batch training is supported (batch_size=None)")


def _tanh(z):
    return np.tanh(z)


def _tanh_prime(z, h):
    return 1.0 - h * h


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_prime(z, h):
    # Kink at 0; finite-difference checks must avoid its neighborhood.
    return (z > 0).astype(float)


_ACTIVATIONS = {"tanh": (_tanh, _tanh_prime), "relu": (_relu, _relu_prime)}


class MLP:
    """Feed-forward net: activation after every layer except the last.

    Weights are (out, in) matrices. Exposed publicly so tests and toy
    setups can build models from explicit parameters.
    """

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray],
                 activation: str = "tanh"):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix")
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        self.activation = activation
        self._act, self._act_prime = _ACTIVATIONS[activation]

    @classmethod
    def init(cls, dims: Sequence[int], activation: str, rng: np.random.Generator) -> "MLP":
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, activation)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def forward(self, x: np.ndarray):
        """Batch forward pass; returns (output, cache for backward)."""
        hs = [x]
        zs = []
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            zs.append(z)
            h = self._act(z) if k < last else z
            hs.append(h)
        return h, (hs, zs)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, d_out: np.ndarray):
        """Given d(loss)/d(output), return (d(loss)/d(input), param grads)."""
        hs, zs = cache
        grads = [None] * len(self.weights)
        delta = d_out
        for k in range(len(self.weights) - 1, -1, -1):
            grads[k] = (delta.T @ hs[k], delta.sum(axis=0))
            d_h = delta @ self.weights[k]
            if k > 0:
                delta = d_h * self._act_prime(zs[k - 1], hs[k])
            else:
                d_in = d_h
        return d_in, grads

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Exact (out_dim, in_dim) Jacobian at a single input point."""
        x = np.asarray(x, dtype=float)
        _, (hs, zs) = self.forward(x[None, :])
        jac = self.weights[0].copy()
        for k in range(1, len(self.weights)):
            prime = self._act_prime(zs[k - 1][0], hs[k][0])
            jac = self.weights[k] @ (prime[:, None] * jac)
        return jac

    def freeze(self):
        for w, b in zip(self.weights, self.biases):
            w.setflags(write=False)
            b.setflags(write=False)


@dataclass(frozen=True)
class EmbeddingModel:
    """Trained attribute/image encoders and decoders over a shared latent space."""

    attr_encoder: MLP
    image_encoder: MLP
    attr_decoder: MLP
    image_decoder: MLP
    config: ModelConfig
    norm_stats: tuple[np.ndarray, np.ndarray] | None = None
    loss_history: tuple[float, ...] = ()

    @property
    def d(self) -> int:
        return self.attr_encoder.in_dim

    @property
    def m(self) -> int:
        return self.image_encoder.in_dim

    @property
    def latent_dim(self) -> int:
        return self.attr_encoder.out_dim

    def _check(self, v: np.ndarray, dim: int, what: str) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != dim:
            raise ValueError(f"{what}: expected length {dim}, got {v.shape[-1]}")
        return v

    def encode_attributes(self, a: np.ndarray) -> np.ndarray:
        a = self._check(a, self.d, "attribute vector")
        return self.attr_encoder(np.atleast_2d(a))[0] if a.ndim == 1 else self.attr_encoder(a)

    def encode_image(self, f: np.ndarray) -> np.ndarray:
        f = self._check(f, self.m, "feature vector")
        return self.image_encoder(np.atleast_2d(f))[0] if f.ndim == 1 else self.image_encoder(f)

    def decode_attributes(self, z: np.ndarray) -> np.ndarray:
        z = self._check(z, self.latent_dim, "latent vector")
        return self.attr_decoder(np.atleast_2d(z))[0] if z.ndim == 1 else self.attr_decoder(z)

    def decode_image(self, z: np.ndarray) -> np.ndarray:
        z = self._check(z, self.latent_dim, "latent vector")
        return self.image_decoder(np.atleast_2d(z))[0] if z.ndim == 1 else self.image_decoder(z)

    def recognize_attributes(self, f: np.ndarray) -> np.ndarray:
        """Attribute vector read off an image: decode_attributes(encode_image(f))."""
        return self.decode_attributes(self.encode_image(f))

    def attribute_jacobian(self, a: np.ndarray) -> np.ndarray:
        """Analytic (latent_dim, d) Jacobian of the attribute encoder at ``a``."""
        a = self._check(a, self.d, "attribute vector")
        if a.ndim != 1:
            raise ValueError("attribute_jacobian takes a single vector")
        if not np.all(np.isfinite(a)):
            raise ValueError("attribute vector must be finite")
        return self.attr_encoder.jacobian(a)


def train_embedding_model(ds: Dataset, cfg: ModelConfig) -> EmbeddingModel:
    """Fit the four nets by full-batch gradient descent; deterministic per seed.

    Uses base classes only: their attribute vectors and the training portion
    of their image rows (see :func:`fieldguide.dataset.image_split`).
    """
    if ds.norm_stats is None:
        raise ValueError("dataset must be normalized before training")
    base_ids = sorted(ds.base)
    attrs = ds.attribute_matrix(base_ids)  # (B, d)
    split = image_split(ds)
    img_rows, img_class_idx = [], []
    for ci, cid in enumerate(base_ids):
        for r in split.train_rows[cid]:
            img_rows.append(r)
            img_class_idx.append(ci)
    feats = ds.features[np.array(img_rows, dtype=int)]  # (n, m)
    class_idx = np.array(img_class_idx, dtype=int)
    n, m = feats.shape
    n_cls, d = attrs.shape
    counts = np.bincount(class_idx, minlength=n_cls).astype(float)
    class_means = np.zeros((n_cls, m))
    np.add.at(class_means, class_idx, feats)
    class_means /= counts[:, None]

    rng = make_rng("fieldguide-embedding-init", cfg.seed)
    l = cfg.latent_dim
    e_a = MLP.init([d, *cfg.hidden_dims, l], cfg.activation, rng)
    e_i = MLP.init([m, *cfg.hidden_dims, l], cfg.activation, rng)
    d_a = MLP.init([l, *cfg.hidden_dims, d], cfg.activation, rng)
    d_i = MLP.init([l, *cfg.hidden_dims, m], cfg.activation, rng)
    w_rec, w_cross, w_align = cfg.loss_weights
    lr = cfg.learning_rate
    history = []

    # Divergence shows up as a non-finite loss and is reported explicitly,
    # so intermediate overflow warnings are just noise.
    np_err = np.seterr(over="ignore", invalid="ignore")
    for epoch in range(cfg.epochs + 1):
        za, ca_ea = e_a.forward(attrs)
        zi, ca_ei = e_i.forward(feats)
        ra, ca_da_a = d_a.forward(za)
        ri, ca_di_i = d_i.forward(zi)
        cross_a, ca_da_i = d_a.forward(zi)   # image latent -> attributes
        cross_i, ca_di_a = d_i.forward(za)   # attribute latent -> features
        latent_means = np.zeros((n_cls, l))
        np.add.at(latent_means, class_idx, zi)
        latent_means /= counts[:, None]

        r_attr = ra - attrs
        r_img = ri - feats
        r_cross_a = cross_a - attrs[class_idx]
        r_cross_i = cross_i - class_means
        r_align = za - latent_means

        loss = (
            w_rec * (np.mean(r_attr**2) + np.mean(r_img**2))
            + w_cross * (np.mean(r_cross_a**2) + np.mean(r_cross_i**2))
            + w_align * np.mean(r_align**2)
        )
        if not np.isfinite(loss):
            np.seterr(**np_err)
            raise TrainingDivergedError(epoch, float(loss))
        history.append(float(loss))
        if epoch == cfg.epochs:
            break

        # Backward. Each decoder sees two batches; gradients accumulate.
        d_za_1, g_da_a = d_a.backward(ca_da_a, 2.0 * w_rec * r_attr / r_attr.size)
        d_zi_1, g_di_i = d_i.backward(ca_di_i, 2.0 * w_rec * r_img / r_img.size)
        d_zi_2, g_da_i = d_a.backward(ca_da_i, 2.0 * w_cross * r_cross_a / r_cross_a.size)
        d_za_2, g_di_a = d_i.backward(ca_di_a, 2.0 * w_cross * r_cross_i / r_cross_i.size)

        d_za_al = 2.0 * w_align * r_align / r_align.size
        # The alignment target is itself a mean of image latents, so its
        # gradient flows back into the image encoder as well.
        d_zi_al = -(d_za_al / counts[:, None])[class_idx]

        _, g_ea = e_a.backward(ca_ea, d_za_1 + d_za_2 + d_za_al)
        _, g_ei = e_i.backward(ca_ei, d_zi_1 + d_zi_2 + d_zi_al)

        _apply(e_a, g_ea, lr)
        _apply(e_i, g_ei, lr)
        _apply(d_a, _sum_grads(g_da_a, g_da_i), lr)
        _apply(d_i, _sum_grads(g_di_i, g_di_a), lr)

    np.seterr(**np_err)
    for net in (e_a, e_i, d_a, d_i):
        net.freeze()
    return EmbeddingModel(
        attr_encoder=e_a,
        image_encoder=e_i,
        attr_decoder=d_a,
        image_decoder=d_i,
        config=cfg,
        norm_stats=ds.norm_stats,
        loss_history=tuple(history),
    )


def _apply(net: MLP, grads, lr: float) -> None:
    for k, (dw, db) in enumerate(grads):
        net.weights[k] -= lr * dw
        net.biases[k] -= lr * db


def _sum_grads(g1, g2):
    return [(dw1 + dw2, db1 + db2) for (dw1, db1), (dw2, db2) in zip(g1, g2)]


# ---------------------------------------------------------------------------
# Latent-space classifier and metrics


@dataclass(frozen=True)
class LatentClassifier:
    """Multinomial logistic classifier on latent points."""

    weights: np.ndarray  # (C, l)
    biases: np.ndarray  # (C,)
    class_ids: tuple[str, ...]

    def __post_init__(self):
        if self.weights.shape[0] != len(self.class_ids):
            raise ValueError("one weight row per class")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("classifier weights must be finite")

    def scores(self, z: np.ndarray) -> np.ndarray:
        return np.atleast_2d(z) @ self.weights.T + self.biases

    def predict(self, z: np.ndarray, allowed: Sequence[str] | None = None) -> list[str]:
        """Top-1 class ids, optionally restricting the label set."""
        s = self.scores(z)
        if allowed is not None:
            cols = [self.class_ids.index(c) for c in allowed]
            picks = np.asarray(cols)[np.argmax(s[:, cols], axis=1)]
        else:
            picks = np.argmax(s, axis=1)
        return [self.class_ids[i] for i in picks]


def train_classifier(
    model: EmbeddingModel,
    ds: Dataset,
    novel_descriptors: Mapping[str, np.ndarray],
    seed: int | None = None,
) -> LatentClassifier:
    """Train the latent classifier; deterministic given (inputs, seed).

    Base classes contribute encoded training images. Each novel class in
    ``novel_descriptors`` contributes ``n_aug`` copies of its encoded
    descriptor perturbed by Gaussian latent noise of std ``sigma_aug``.
    An empty descriptor map yields a seen-only classifier.
    """
    cfg = model.config
    if seed is None:
        seed = cfg.seed
    for y, desc in novel_descriptors.items():
        if np.asarray(desc).shape != (model.d,):
            raise ValueError(f"descriptor for {y!r} must have length {model.d}")

    base_ids = sorted(ds.base)
    novel_ids = sorted(novel_descriptors)
    class_ids = tuple(base_ids + novel_ids)
    split = image_split(ds)

    zs, labels = [], []
    for ci, cid in enumerate(base_ids):
        rows = split.train_rows[cid]
        zs.append(model.encode_image(ds.features[rows]))
        labels.extend([ci] * len(rows))
    for off, y in enumerate(novel_ids):
        mu = model.encode_attributes(np.asarray(novel_descriptors[y], dtype=float))
        noise = make_rng("fieldguide-classifier-aug", seed, y).normal(
            0.0, cfg.sigma_aug, size=(cfg.n_aug, model.latent_dim)
        )
        zs.append(mu[None, :] + noise)
        labels.extend([len(base_ids) + off] * cfg.n_aug)

    z = np.concatenate(zs, axis=0)
    y_idx = np.array(labels, dtype=int)
    n, l = z.shape
    n_cls = len(class_ids)
    onehot = np.zeros((n, n_cls))
    onehot[np.arange(n), y_idx] = 1.0

    w = np.zeros((n_cls, l))
    b = np.zeros(n_cls)
    for _ in range(cfg.clf_epochs):
        logits = z @ w.T + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        g = (p - onehot) / n
        w -= cfg.clf_lr * (g.T @ z)
        b -= cfg.clf_lr * g.sum(axis=0)

    w.setflags(write=False)
    b.setflags(write=False)
    return LatentClassifier(weights=w, biases=b, class_ids=class_ids)


@dataclass(frozen=True)
class Metrics:
    """Macro-averaged accuracies and their harmonic mean, all in [0, 1]."""

    acc_unseen: float
    acc_seen: float
    harmonic: float

    def __post_init__(self):
        for name in ("acc_unseen", "acc_seen", "harmonic"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} out of [0,1]: {v}")


def harmonic_mean(acc_seen: float, acc_unseen: float) -> float:
    """2ab/(a+b); zero when either accuracy is zero."""
    if acc_seen == 0.0 or acc_unseen == 0.0:
        return 0.0
    return 2.0 * acc_seen * acc_unseen / (acc_seen + acc_unseen)


def per_class_accuracy(truth: Sequence[str], pred: Sequence[str],
                       class_ids: Sequence[str]) -> float:
    """Mean over classes of within-class top-1 accuracy (macro average).

    Classes without test samples are excluded and reported via a warning.
    """
    truth = list(truth)
    pred = list(pred)
    per_class = []
    skipped = []
    for cid in class_ids:
        idx = [i for i, t in enumerate(truth) if t == cid]
        if not idx:
            skipped.append(cid)
            continue
        per_class.append(sum(pred[i] == cid for i in idx) / len(idx))
    if skipped:
        warnings.warn(f"classes with zero test images excluded: {skipped[:5]}")
    return float(np.mean(per_class)) if per_class else 0.0


def evaluate(
    classifier: LatentClassifier,
    model: EmbeddingModel,
    ds: Dataset,
    mode: str = "unseen_only",
) -> Metrics:
    """Score the classifier on held-out image rows.

    ``unseen_only`` restricts both label set and test images per side (novel
    images against novel labels, base against base); ``generalized``
    classifies every test image over the full base+novel label set.
    """
    if mode not in ("unseen_only", "generalized"):
        raise ValueError(f"unknown mode {mode!r}")
    split = image_split(ds)
    base_ids = [c for c in classifier.class_ids if c in ds.base]
    novel_ids = [c for c in classifier.class_ids if c in ds.novel]

    def side(ids: list[str], allowed: list[str] | None) -> float:
        if not ids:
            return 0.0
        rows, truth = [], []
        for cid in ids:
            for r in split.test_rows.get(cid, ()):
                rows.append(r)
                truth.append(cid)
        if not rows:
            return 0.0
        z = model.encode_image(ds.features[np.array(rows, dtype=int)])
        pred = classifier.predict(z, allowed=allowed)
        return per_class_accuracy(truth, pred, ids)

    if mode == "unseen_only":
        acc_unseen = side(novel_ids, novel_ids or None)
        acc_seen = side(base_ids, base_ids or None)
    else:
        acc_unseen = side(novel_ids, None)
        acc_seen = side(base_ids, None)
    return Metrics(
        acc_unseen=acc_unseen,
        acc_seen=acc_seen,
        harmonic=harmonic_mean(acc_seen, acc_unseen),
    )


# ---------------------------------------------------------------------------
# Checkpoints


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype=np.float64)
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def _decode_array(doc: dict) -> np.ndarray:
    a = np.frombuffer(base64.b64decode(doc["data"]), dtype=np.float64)
    return a.reshape(doc["shape"]).copy()


def save_model(model: EmbeddingModel, path: str | Path) -> None:
    """Write a JSON checkpoint; read/write round-trips are bit-exact."""
    nets = {
        "attr_encoder": model.attr_encoder,
        "image_encoder": model.image_encoder,
        "attr_decoder": model.attr_decoder,
        "image_decoder": model.image_decoder,
    }
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "config": {
            "latent_dim": model.config.latent_dim,
            "hidden_dims": list(model.config.hidden_dims),
            "activation": model.config.activation,
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "learning_rate": model.config.learning_rate,
            "loss_weights": list(model.config.loss_weights),
            "n_aug": model.config.n_aug,
            "sigma_aug": model.config.sigma_aug,
            "clf_epochs": model.config.clf_epochs,
            "clf_lr": model.config.clf_lr,
            "seed": model.config.seed,
        },
        "norm_stats": (
            None
            if model.norm_stats is None
            else {"min": _encode_array(model.norm_stats[0]),
                  "max": _encode_array(model.norm_stats[1])}
        ),
        "params": {
            name: {
                "weights": [_encode_array(w) for w in net.weights],
                "biases": [_encode_array(b) for b in net.biases],
            }
            for name, net in nets.items()
        },
        "loss_history": _encode_array(np.array(model.loss_history)),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_model(path: str | Path) -> EmbeddingModel:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {doc.get('format_version')!r}")
    c = doc["config"]
    cfg = ModelConfig(
        latent_dim=c["latent_dim"],
        hidden_dims=tuple(c["hidden_dims"]),
        activation=c["activation"],
        epochs=c["epochs"],
        batch_size=c["batch_size"],
        learning_rate=c["learning_rate"],
        loss_weights=tuple(c["loss_weights"]),
        n_aug=c["n_aug"],
        sigma_aug=c["sigma_aug"],
        clf_epochs=c["clf_epochs"],
        clf_lr=c["clf_lr"],
        seed=c["seed"],
    )

    def net(name: str) -> MLP:
        p = doc["params"][name]
        mlp = MLP(
            [_decode_array(w) for w in p["weights"]],
            [_decode_array(b) for b in p["biases"]],
            cfg.activation,
        )
        mlp.freeze()
        return mlp

    stats = doc["norm_stats"]
    norm_stats = None
    if stats is not None:
        norm_stats = (_decode_array(stats["min"]), _decode_array(stats["max"]))
    return EmbeddingModel(
        attr_encoder=net("attr_encoder"),
        image_encoder=net("image_encoder"),
        attr_decoder=net("attr_decoder"),
        image_decoder=net("image_decoder"),
        config=cfg,
        norm_stats=norm_stats,
        loss_history=tuple(float(v) for v in _decode_array(doc["loss_history"])),
    )
