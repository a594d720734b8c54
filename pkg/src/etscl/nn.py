"""Small feedforward networks in numpy: forward/backward, Adam, JSON
checkpoints, and joint training of the three evidential heads."""
import json
from dataclasses import dataclass, field

import numpy as np

from . import evidence, losses

ACTIVATIONS = ("relu", "softplus", "identity")
MODALITIES = ("cfp", "oct", "vessel")


def softplus(x):
    # log(1 + e^x) without overflow
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(kind, x):
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "softplus":
        return softplus(x)
    return x


def _activation_grad(kind, pre):
    if kind == "relu":
        return (pre > 0).astype(np.float64)
    if kind == "softplus":
        return sigmoid(pre)
    return np.ones_like(pre)


@dataclass
class Layer:
    W: np.ndarray  # (fan_in, fan_out); y = x @ W + b
    b: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[1],):
            raise ValueError(f"inconsistent layer shapes W{self.W.shape} b{self.b.shape}")


@dataclass
class MlpParams:
    layers: list

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.W.shape[1] != nxt.W.shape[0]:
                raise ValueError(f"layer dimensions do not chain: {prev.W.shape} -> {nxt.W.shape}")
        for layer in self.layers:
            if not (np.all(np.isfinite(layer.W)) and np.all(np.isfinite(layer.b))):
                raise ValueError("non-finite parameter")

    @property
    def arch(self):
        return [self.layers[0].W.shape[0]] + [layer.W.shape[1] for layer in self.layers]

    @property
    def activations(self):
        return [layer.activation for layer in self.layers]

    def arrays(self):
        return [a for layer in self.layers for a in (layer.W, layer.b)]

    def copy(self):
        return MlpParams([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def with_arrays(self, arrays):
        it = iter(arrays)
        return MlpParams([Layer(next(it), next(it), l.activation) for l in self.layers])

    def same_as(self, other):
        return (self.activations == other.activations
                and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))
                and len(self.layers) == len(other.layers))


def init_mlp(sizes, activations, rng):
    """Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(Layer(rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out), act))
    return MlpParams(layers)


@dataclass
class Cache:
    shapes: list
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    squeeze: bool = False


def forward(params, x):
    """Returns (output, cache). ``x`` is one vector or a (N, d) batch."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != params.layers[0].W.shape[0]:
        raise ValueError(f"input dimension {h.shape[1]} != {params.layers[0].W.shape[0]}")
    cache = Cache([l.W.shape for l in params.layers], squeeze=squeeze)
    for layer in params.layers:
        cache.inputs.append(h)
        pre = h @ layer.W + layer.b
        cache.pre.append(pre)
        h = _activate(layer.activation, pre)
    return (h[0] if squeeze else h), cache


def backward(params, cache, upstream):
    """Reverse-mode pass. Returns (list of (dW, db) per layer, input gradient)."""
    if cache.shapes != [l.W.shape for l in params.layers] or len(cache.inputs) != len(params.layers):
        raise ValueError("cache does not belong to these parameters")
    g = np.asarray(upstream, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != cache.pre[-1].shape:
        raise ValueError(f"upstream gradient shape {g.shape} != output shape {cache.pre[-1].shape}")
    grads = []
    for layer, h, pre in zip(reversed(params.layers), reversed(cache.inputs), reversed(cache.pre)):
        g = g * _activation_grad(layer.activation, pre)
        grads.append((h.T @ g, g.sum(axis=0)))
        g = g @ layer.W.T
    grads.reverse()
    return grads, (g[0] if cache.squeeze else g)


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    zeros = [np.zeros_like(a) for a in params.arrays()]
    return AdamState(zeros, [z.copy() for z in zeros], 0, lr, beta1, beta2, eps)


def adam_step(state, params, grads):
    """One bias-corrected Adam update. Returns new (state, params); inputs untouched."""
    flat = [g for pair in grads for g in pair]
    arrays = params.arrays()
    if len(flat) != len(arrays) or any(g.shape != a.shape for g, a in zip(flat, arrays)):
        raise ValueError("gradient shapes do not match parameters")
    t = state.step + 1
    m = [state.beta1 * mi + (1 - state.beta1) * g for mi, g in zip(state.m, flat)]
    v = [state.beta2 * vi + (1 - state.beta2) * g * g for vi, g in zip(state.v, flat)]
    c1 = 1 - state.beta1 ** t
    c2 = 1 - state.beta2 ** t
    new = [a - state.lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps) for a, mi, vi in zip(arrays, m, v)]
    new_state = AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)
    return new_state, params.with_arrays(new)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params, seed, tau=None, **extra):
    obj = {
        "arch": params.arch,
        "activations": params.activations,
        "weights": [l.W.tolist() for l in params.layers],
        "biases": [l.b.tolist() for l in params.layers],
        "seed": seed,
        "tau": tau,
    }
    obj.update(extra)
    with open(path, "w") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_checkpoint(path):
    """Returns (MlpParams, metadata dict)."""
    with open(path) as fh:
        obj = json.load(fh)
    acts = obj.get("activations") or ["identity"] * (len(obj["arch"]) - 1)
    params = MlpParams([Layer(W, b, a) for W, b, a in zip(obj["weights"], obj["biases"], acts)])
    if params.arch != obj["arch"]:
        raise ValueError(f"{path}: arch {obj['arch']} does not match weights {params.arch}")
    meta = {k: v for k, v in obj.items() if k not in ("weights", "biases")}
    return params, meta


# ---------------------------------------------------------------------------
# stage two: evidential heads trained jointly through the fusion


@dataclass
class ClassifierConfig:
    epochs: int = 200
    # full-batch steps; at 1e-3 the heads are still far from converged after 200 epochs
    lr: float = 1e-2
    anneal_epochs: int = 10
    seed: int = 0
    hidden: tuple = ()
    n_classes: int = 3
    adjusted_kl: bool = True


def init_head(in_dim, config, rng):
    sizes = [in_dim, *config.hidden, config.n_classes]
    acts = ["relu"] * len(config.hidden) + ["softplus"]
    return init_mlp(sizes, acts, rng)


def head_losses_and_grads(heads, inputs, y, lam, adjusted=True, with_grads=True):
    """Forward all heads, fuse, and return (LossReport, per-head parameter grads, alphas)."""
    outs = [forward(h, x) for h, x in zip(heads, inputs)]
    alphas = [e + 1.0 for e, _ in outs]
    fused, tape = evidence.fuse_alphas(alphas)
    report = losses.total_loss(alphas, fused, y, lam, adjusted)
    if not with_grads:
        return report, None, alphas
    g_fused = losses.evidential_loss_grad(fused, y, lam, adjusted)
    g_through = evidence.fuse_alphas_vjp(tape, g_fused)
    grads = []
    for head, (_, cache), alpha, gf in zip(heads, outs, alphas, g_through):
        g_alpha = losses.evidential_loss_grad(alpha, y, lam, adjusted) + gf
        grads.append(backward(head, cache, g_alpha)[0])
    return report, grads, alphas


def train_classifier(embeddings, labels, config=None, rng=None, log=None):
    """Full-batch joint training of one evidential head per modality.

    ``embeddings`` is a list of three (N, D) arrays in CFP, OCT, Vessel order.
    Returns (heads, list of per-epoch LossReport computed before each update).
    """
    config = config or ClassifierConfig()
    if len(embeddings) != 3:
        raise ValueError("expected three modality embedding arrays")
    n = len(labels)
    if any(len(e) != n for e in embeddings):
        raise ValueError(f"length mismatch: {[len(e) for e in embeddings]} vs {n} labels")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    inputs = [np.asarray(e, dtype=np.float64) for e in embeddings]
    heads = [init_head(x.shape[1], config, rng) for x in inputs]
    states = [adam_init(h, lr=config.lr) for h in heads]
    y = losses.one_hot(labels, config.n_classes)
    history = []
    for epoch in range(config.epochs):
        lam = losses.anneal_coefficient(epoch, config.anneal_epochs)
        try:
            report, grads, _ = head_losses_and_grads(heads, inputs, y, lam, config.adjusted_kl)
        except evidence.TotalConflictError as exc:
            raise evidence.TotalConflictError(f"epoch {epoch}: {exc} (row = sample position)") from exc
        history.append(report)
        if log is not None:
            log(epoch, report)
        updated = [adam_step(s, h, g) for s, h, g in zip(states, heads, grads)]
        states = [s for s, _ in updated]
        heads = [h for _, h in updated]
    return heads, history
