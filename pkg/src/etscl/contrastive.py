"""Supervised contrastive feature learning on flat feature vectors.

Embeddings are L2-normalised projection-head outputs, so every dot product
lies in [-1, 1] and small temperatures stay stable under the max-shifted
log-sum-exp.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .nn import adam_init, adam_step, backward, forward, init_mlp
from .seeding import substreams


@dataclass(frozen=True, eq=False)
class EmbeddingBatch:
    z: np.ndarray       # (2N, D), unit rows
    labels: np.ndarray  # (2N,)
    origin: np.ndarray  # (2N,), source sample of each view

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        labels = np.asarray(self.labels)
        origin = np.asarray(self.origin)
        if z.ndim != 2 or len(labels) != len(z) or len(origin) != len(z):
            raise ValueError("z, labels and origin must describe the same views")
        if not np.allclose(np.linalg.norm(z, axis=1), 1.0, rtol=0, atol=1e-6):
            raise ValueError("embeddings must have unit norm")
        ids, counts = np.unique(origin, return_counts=True)
        if np.any(counts != 2):
            raise ValueError("every origin index must appear exactly twice")
        for i in ids:
            if len(set(labels[origin == i].tolist())) != 1:
                raise ValueError(f"views of sample {i} carry different labels")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def from_pairs(cls, view_a, view_b, labels):
        """Interleave two views per sample: rows 2h and 2h+1 come from sample h."""
        n = len(labels)
        z = np.empty((2 * n, view_a.shape[1]))
        z[0::2], z[1::2] = view_a, view_b
        return cls(z, np.repeat(labels, 2), np.repeat(np.arange(n), 2))


def augment_views(x, rng, jitter_sigma=0.1):
    """Two Gaussian-jittered copies of ``x``; ``rng`` is a seed or a Generator."""
    if jitter_sigma < 0:
        raise ValueError("jitter_sigma must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(rng)
    noise = rng.normal(0.0, 1.0, size=(2,) + x.shape) * jitter_sigma
    return x + noise[0], x + noise[1]


def _check_inputs(z, labels, tau):
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    n_pos = same.sum(axis=1)
    if np.any(n_pos == 0):
        lonely = sorted(set(labels[n_pos == 0].tolist()))
        raise ValueError(f"labels {lonely} have a single view in the batch (no positives)")
    return same, n_pos


def _log_softmax_off_diagonal(z, tau):
    logits = z @ z.T / tau
    np.fill_diagonal(logits, -np.inf)
    shift = logits.max(axis=1, keepdims=True)
    lse = shift[:, 0] + np.log(np.exp(logits - shift).sum(axis=1))
    return logits, lse


def supcon_terms(z, labels, tau):
    """Per-anchor loss contributions; their sum is the batch loss."""
    same, n_pos = _check_inputs(z, labels, tau)
    logits, lse = _log_softmax_off_diagonal(np.asarray(z, dtype=np.float64), tau)
    pos_logit = np.where(same, logits, 0.0).sum(axis=1)
    return lse - pos_logit / n_pos


def supcon_loss_arrays(z, labels, tau):
    terms = supcon_terms(z, labels, tau)
    # order-independent summation so batch permutations give the same value
    return math.fsum(np.sort(terms))


def supcon_gradient_arrays(z, labels, tau):
    z = np.asarray(z, dtype=np.float64)
    same, n_pos = _check_inputs(z, labels, tau)
    logits, lse = _log_softmax_off_diagonal(z, tau)
    q = np.exp(logits - lse[:, None])  # zero on the diagonal
    G = q - same / n_pos[:, None]
    return (G + G.T) @ z / tau


def supcon_loss(batch, tau):
    return supcon_loss_arrays(batch.z, batch.labels, tau)


def supcon_gradient(batch, tau):
    """dL/dz for the normalised embeddings (normalisation Jacobian not applied)."""
    return supcon_gradient_arrays(batch.z, batch.labels, tau)


# ---------------------------------------------------------------------------
# encoder


@dataclass
class EncoderConfig:
    epochs: int = 10
    batch_size: int = 14
    learning_rate: float = 1e-3
    tau: float = 0.05
    jitter_sigma: float = 0.1
    seed: int = 0
    hidden: tuple = (256, 128)
    projection: tuple = (128, 128)
    normalize: bool = True


def init_encoder(in_dim, config, rng):
    sizes = [in_dim, *config.hidden, *config.projection]
    acts = ["relu"] * (len(sizes) - 2) + ["identity"]
    return init_mlp(sizes, acts, rng)


def normalize_rows(h, eps=0.0):
    norms = np.linalg.norm(h, axis=-1, keepdims=True)
    if np.any(norms <= eps):
        raise ValueError("degenerate embedding: projection output is the zero vector")
    return h / norms, norms


def embed(params, x, normalize=True):
    """Forward pass followed by L2 normalisation; works on one vector or a batch."""
    h, _ = forward(params, x)
    if not normalize:
        return h
    z, _ = normalize_rows(np.atleast_2d(h))
    return z[0] if np.ndim(x) == 1 else z


def encoder_loss_and_grads(params, views, labels, tau, normalize=True):
    h, cache = forward(params, views)
    if normalize:
        z, norms = normalize_rows(h)
    else:
        z = h
    loss = supcon_loss_arrays(z, labels, tau)
    gz = supcon_gradient_arrays(z, labels, tau)
    if normalize:
        gz = (gz - z * (z * gz).sum(axis=1, keepdims=True)) / norms
    grads, _ = backward(params, cache, gz)
    return loss, grads


def assemble_batches(n, batch_size, rng):
    """Shuffled sample-index batches; a trailing batch of one sample is dropped."""
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    return [b for b in batches if len(b) >= 2]


@dataclass
class EncoderRun:
    params: object
    epoch_losses: list = field(default_factory=list)


def train_encoder(features, labels, config=None, streams=None):
    """Train one modality encoder with the supervised contrastive loss.

    ``streams`` maps "init", "shuffle" and "augment" to Generators; when
    omitted they are derived from ``config.seed``.
    """
    config = config or EncoderConfig()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or len(features) == 0:
        raise ValueError("dataset is empty")
    if len(labels) != len(features):
        raise ValueError("features and labels differ in length")
    if config.batch_size < 2:
        raise ValueError("batch_size must be at least 2 samples (4 views)")
    if streams is None:
        streams = substreams(config.seed, "init", "shuffle", "augment")
    params = init_encoder(features.shape[1], config, streams["init"])
    state = adam_init(params, lr=config.learning_rate)
    run = EncoderRun(params)
    for _ in range(config.epochs):
        batches = assemble_batches(len(features), config.batch_size, streams["shuffle"])
        if not batches:
            raise ValueError("cannot assemble a batch with at least two samples")
        epoch_losses = []
        for idx in batches:
            a, b = augment_views(features[idx], streams["augment"], config.jitter_sigma)
            views = np.empty((2 * len(idx), features.shape[1]))
            views[0::2], views[1::2] = a, b
            loss, grads = encoder_loss_and_grads(
                params, views, np.repeat(labels[idx], 2), config.tau, config.normalize)
            epoch_losses.append(loss)
            state, params = adam_step(state, params, grads)
        run.epoch_losses.append(float(np.mean(epoch_losses)))
    run.params = params
    return run
