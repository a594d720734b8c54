"""Accuracy and quadratically weighted Cohen's kappa from a confusion matrix."""
import numpy as np


def confusion(preds, truths, n_classes=None):
    """Counts with rows = true class, columns = predicted class."""
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape or preds.ndim != 1:
        raise ValueError(f"length mismatch: {preds.shape} predictions vs {truths.shape} truths")
    if preds.size == 0:
        raise ValueError("no samples to evaluate")
    if n_classes is None:
        n_classes = int(max(preds.max(), truths.max())) + 1
    if min(preds.min(), truths.min()) < 0 or max(preds.max(), truths.max()) >= n_classes:
        raise ValueError(f"class index out of range [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truths, preds), 1)
    return cm


def accuracy(cm):
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(cm) / total)


def quadratic_weights(K, normalize=True):
    idx = np.arange(K)
    w = (idx[:, None] - idx[None, :]) ** 2.0
    return w / (K - 1) ** 2 if normalize else w


def quadratic_weighted_kappa(cm, normalize_weights=True):
    """Kappa with squared-distance disagreement weights.

    Returns None (undefined) when the chance-disagreement denominator vanishes
    or fewer than two true classes are present.
    """
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    K = cm.shape[0]
    rows = cm.sum(axis=1) / total
    cols = cm.sum(axis=0) / total
    if np.count_nonzero(rows) < 2:
        return None
    w = quadratic_weights(K, normalize_weights)
    observed = (w * cm / total).sum()
    expected = (w * np.outer(rows, cols)).sum()
    if expected == 0:
        return None
    return float(1.0 - observed / expected)


def write_confusion_csv(path, cm):
    cm = np.asarray(cm)
    with open(path, "w") as fh:
        fh.write("true\\pred," + ",".join(str(j) for j in range(cm.shape[1])) + "\n")
        for i, row in enumerate(cm):
            fh.write(f"{i}," + ",".join(str(int(v)) for v in row) + "\n")
