"""Log-gamma, digamma and trigamma for the Dirichlet KL term.

Digamma and trigamma use upward recurrence to x >= 10 followed by the
asymptotic (Bernoulli) series; truncation error is below 1e-13 there.
"""
import math

import numpy as np

_SHIFT = 10.0


def lgamma(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.fromiter((math.lgamma(v) for v in x.ravel()), dtype=np.float64, count=x.size)
    return out.reshape(x.shape) if x.ndim else float(out[0])


def digamma(x):
    x = np.array(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("digamma is only implemented for positive arguments")
    acc = np.zeros_like(x)
    while True:
        small = x < _SHIFT
        if not small.any():
            break
        acc[small] -= 1.0 / x[small]
        x[small] += 1.0
    r = 1.0 / (x * x)
    series = r * (1 / 12 - r * (1 / 120 - r * (1 / 252 - r * (1 / 240 - r * (1 / 132 - r * 691 / 32760)))))
    out = acc + np.log(x) - 0.5 / x - series
    return out if out.ndim else float(out)


def trigamma(x):
    x = np.array(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("trigamma is only implemented for positive arguments")
    acc = np.zeros_like(x)
    while True:
        small = x < _SHIFT
        if not small.any():
            break
        acc[small] += 1.0 / (x[small] * x[small])
        x[small] += 1.0
    r = 1.0 / (x * x)
    # 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
    series = (1 + r * (1 / 6 - r * (1 / 30 - r * (1 / 42 - r * (1 / 30 - r * 5 / 66))))) / x
    out = acc + series + 0.5 * r
    return out if out.ndim else float(out)
