"""Evidential training objective: Dirichlet MSE, KL-to-uniform penalty with
annealing, the four-branch total, and analytic gradients w.r.t. alpha."""
import math
from dataclasses import dataclass

import numpy as np

from .evidence import DirichletOpinion
from .special import digamma, lgamma, trigamma


def _one_hot(y, K):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (K,):
        raise ValueError(f"label vector has shape {y.shape}, expected ({K},)")
    if not (np.all((y == 0) | (y == 1)) and y.sum() == 1):
        raise ValueError(f"label must be one-hot, got {y}")
    return y


def one_hot(labels, K):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, K))
    out[np.arange(labels.size), labels] = 1.0
    return out


# ---------------------------------------------------------------------------
# batched forms: alpha and y are (N, K)


def mse_terms(alpha, y):
    S = alpha.sum(axis=-1, keepdims=True)
    p = alpha / S
    return ((y - p) ** 2 + alpha * (S - alpha) / (S * S * (S + 1.0))).sum(axis=-1)


def mse_grad(alpha, y):
    S = alpha.sum(axis=-1, keepdims=True)
    p = alpha / S
    # MSE = sum (y - p)^2 + (1 - sum p^2) / (S + 1)
    gp = -2.0 * (y - p) - 2.0 * p / (S + 1.0)
    direct = -(1.0 - (p * p).sum(axis=-1, keepdims=True)) / (S + 1.0) ** 2
    return (gp - (gp * p).sum(axis=-1, keepdims=True)) / S + direct


def kl_uniform_terms(alpha):
    K = alpha.shape[-1]
    S = alpha.sum(axis=-1)
    return (lgamma(S) - math.lgamma(K) - lgamma(alpha).sum(axis=-1)
            + ((alpha - 1.0) * (digamma(alpha) - digamma(S)[:, None])).sum(axis=-1))


def kl_uniform_grad(alpha):
    K = alpha.shape[-1]
    S = alpha.sum(axis=-1, keepdims=True)
    return (alpha - 1.0) * trigamma(alpha) - (S - K) * trigamma(S)


def adjust(alpha, y):
    return y + (1.0 - y) * alpha


def evidential_loss(alpha, y, lam, adjusted=True):
    """Per-sample loss MSE + lam * KL, shape (N,)."""
    kl_alpha = adjust(alpha, y) if adjusted else alpha
    return mse_terms(alpha, y) + lam * kl_uniform_terms(kl_alpha)


def evidential_loss_grad(alpha, y, lam, adjusted=True):
    grad = mse_grad(alpha, y)
    if lam:
        if adjusted:
            grad = grad + lam * (1.0 - y) * kl_uniform_grad(adjust(alpha, y))
        else:
            grad = grad + lam * kl_uniform_grad(alpha)
    return grad


# ---------------------------------------------------------------------------
# value-level API


def mse_term(o, y):
    y = _one_hot(y, o.K)
    return float(mse_terms(o.alpha[None, :], y[None, :])[0])


def kl_to_uniform(o):
    """KL[Dir(alpha) || Dir(1)], non-negative (clamped at rounding level)."""
    return max(float(kl_uniform_terms(o.alpha[None, :])[0]), 0.0)


def adjusted_alpha(o, y):
    """Replace the true-class parameter by 1 so the penalty only sees misleading evidence."""
    y = _one_hot(y, o.K)
    return DirichletOpinion(adjust(o.alpha, y))


def anneal_coefficient(epoch, anneal_epochs):
    if anneal_epochs < 1:
        raise ValueError("anneal_epochs must be >= 1")
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return min(1.0, epoch / anneal_epochs)


def sample_loss(o, y, lam, adjusted=True):
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"annealing coefficient must be in [0, 1], got {lam}")
    kl_o = adjusted_alpha(o, y) if adjusted else o
    return mse_term(o, y) + lam * kl_to_uniform(kl_o)


def loss_gradient_wrt_evidence(e, y, lam, adjusted=True):
    """d(sample_loss)/de; alpha = e + 1 so this equals the gradient w.r.t. alpha."""
    e = np.asarray(e, dtype=np.float64)
    y = _one_hot(y, e.size)
    return evidential_loss_grad(e[None, :] + 1.0, y[None, :], lam, adjusted)[0]


@dataclass(frozen=True)
class LossReport:
    l_cfp: float
    l_oct: float
    l_vessel: float
    l_fusion: float
    total: float
    lam: float

    CSV_HEADER = "epoch,l_cfp,l_oct,l_vessel,l_fusion,total,lambda"

    def csv_row(self, epoch):
        vals = (self.l_cfp, self.l_oct, self.l_vessel, self.l_fusion, self.total, self.lam)
        return ",".join([str(epoch)] + [repr(float(v)) for v in vals])


def _alpha_matrix(opinions):
    if isinstance(opinions, np.ndarray):
        return np.asarray(opinions, dtype=np.float64)
    rows = [o.alpha if isinstance(o, DirichletOpinion) else o for o in opinions]
    return np.array(rows, dtype=np.float64)


def branch_loss(alpha, y, lam, adjusted=True):
    if len(alpha) == 0:
        return 0.0
    return math.fsum(evidential_loss(alpha, y, lam, adjusted))


def total_loss(opinions_per_modality, fused, labels, lam, adjusted=True):
    """Sum of per-sample losses for the three branches plus the fused opinion.

    ``labels`` may be class indices or one-hot rows.
    """
    if len(opinions_per_modality) != 3:
        raise ValueError("expected opinions for exactly three modalities")
    branches = [_alpha_matrix(ops) for ops in opinions_per_modality] + [_alpha_matrix(fused)]
    n = len(labels)
    if any(len(a) != n for a in branches):
        raise ValueError(f"length mismatch: {[len(a) for a in branches]} opinions vs {n} labels")
    if n == 0:
        return LossReport(0.0, 0.0, 0.0, 0.0, 0.0, float(lam))
    K = branches[0].shape[1]
    labels = np.asarray(labels)
    y = labels.astype(np.float64) if labels.ndim == 2 else one_hot(labels, K)
    parts = [branch_loss(a, y, lam, adjusted) for a in branches]
    return LossReport(*parts, math.fsum(parts), float(lam))
