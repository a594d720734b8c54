"""Multiscale Hessian vesselness (Frangi) for 2D grayscale images.

Images are float arrays of shape (height, width) with values in [0, 1];
x runs along columns and y along rows.
"""
import math
from dataclasses import dataclass

import numpy as np

DARK = "dark"    # dark vessels on a bright background (fundus green channel)
BRIGHT = "bright"


@dataclass(frozen=True)
class FrangiParams:
    scales: tuple = (1.0, 2.0, 3.0, 4.0)
    beta: float = 0.5
    c: float = 15.0 / 255.0
    polarity: str = DARK

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        if not scales or min(scales) <= 0:
            raise ValueError("scales must be a non-empty list of positive values")
        if self.beta <= 0 or self.c <= 0:
            raise ValueError("beta and c must be positive")
        if self.polarity not in (DARK, BRIGHT):
            raise ValueError(f"polarity must be {DARK!r} or {BRIGHT!r}")
        object.__setattr__(self, "scales", scales)


def kernel_radius(sigma):
    return int(math.ceil(4.0 * sigma))


def gaussian_kernels(sigma):
    """Sampled Gaussian, first and second derivative kernels for correlation.

    The derivative kernels are moment-corrected so that they are exact on
    linear and quadratic signals: sum(m * d1) = 1, sum(d2) = 0, sum(m^2 * d2) = 2.
    """
    r = kernel_radius(sigma)
    m = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-m * m / (2 * sigma * sigma))
    g0 = g / g.sum()
    d1 = m * g
    d1 /= (m * d1).sum()
    d2 = (m * m / sigma ** 4 - 1 / sigma ** 2) * g
    d2 -= d2.mean()
    d2 *= 2.0 / (m * m * d2).sum()
    return g0, d1, d2


def _correlate_axis(img, kernel, axis):
    r = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    # numpy "symmetric" mirrors including the edge sample (half-sample reflection)
    padded = np.pad(img, pad, mode="symmetric")
    n = img.shape[axis]
    out = np.zeros_like(img)
    for k, w in enumerate(kernel):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(k, k + n)
        out += w * padded[tuple(sl)]
    return out


def gaussian_second_derivatives(img, sigma):
    """Scale-normalised (sigma^2) Hessian components Ixx, Ixy, Iyy."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    img = np.asarray(img, dtype=np.float64)
    g0, d1, d2 = gaussian_kernels(sigma)
    s2 = sigma * sigma
    smooth_y = _correlate_axis(img, g0, 0)
    smooth_x = _correlate_axis(img, g0, 1)
    Ixx = s2 * _correlate_axis(smooth_y, d2, 1)
    Iyy = s2 * _correlate_axis(smooth_x, d2, 0)
    Ixy = s2 * _correlate_axis(_correlate_axis(img, d1, 0), d1, 1)
    return Ixx, Ixy, Iyy


def hessian_eigenvalues(Ixx, Ixy, Iyy):
    """Closed-form eigenvalues ordered |l1| <= |l2| (exact ties: l1 is the smaller)."""
    half_trace = 0.5 * (Ixx + Iyy)
    root = np.sqrt((0.5 * (Ixx - Iyy)) ** 2 + Ixy * Ixy)
    lo, hi = half_trace - root, half_trace + root
    swap = np.abs(lo) > np.abs(hi)
    l1 = np.where(swap, hi, lo)
    l2 = np.where(swap, lo, hi)
    return l1, l2


def vesselness_at_scale(Ixx, Ixy, Iyy, params=None):
    params = params or FrangiParams()
    if not (np.shape(Ixx) == np.shape(Ixy) == np.shape(Iyy)):
        raise ValueError("Hessian component images differ in shape")
    l1, l2 = hessian_eigenvalues(np.asarray(Ixx, float), np.asarray(Ixy, float), np.asarray(Iyy, float))
    valid = l2 > 0 if params.polarity == DARK else l2 < 0
    safe_l2 = np.where(valid, l2, 1.0)
    rb2 = (l1 / safe_l2) ** 2
    s2 = l1 * l1 + l2 * l2
    v = np.exp(-rb2 / (2 * params.beta ** 2)) * (1.0 - np.exp(-s2 / (2 * params.c ** 2)))
    return np.where(valid, v, 0.0)


def check_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"expected a 2D grayscale image, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise ValueError("image values must be finite and within [0, 1]")
    return img


def frangi_filter(img, params=None, return_scales=False):
    """Per-pixel maximum vesselness over ``params.scales``.

    With ``return_scales`` also returns the (n_scales, H, W) stack of per-scale
    responses.
    """
    params = params or FrangiParams()
    img = check_image(img)
    need = 2 * kernel_radius(max(params.scales)) + 1
    if min(img.shape) < need:
        raise ValueError(f"image {img.shape[1]}x{img.shape[0]} is smaller than the "
                         f"{need}x{need} kernel support of scale {max(params.scales)}")
    stack = np.stack([vesselness_at_scale(*gaussian_second_derivatives(img, s), params)
                      for s in params.scales])
    out = np.clip(stack.max(axis=0), 0.0, 1.0)
    return (out, stack) if return_scales else out
