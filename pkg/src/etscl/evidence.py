"""Subjective-logic primitives: evidence, Dirichlet opinions, mass sets and
the reduced Dempster combination over singleton + universe focal elements.

Two layers live here. The value-level API (``DirichletOpinion``, ``MassSet``,
``combine`` ...) validates its inputs and is what the CLI and tests use. The
batched kernels (``alpha_to_mass``, ``combine_masses`` ...) take arrays whose
rows are samples, skip validation, and come with vector-Jacobian products so
the classifier heads can be trained through the fusion.
"""
from dataclasses import dataclass
from functools import reduce

import numpy as np

MASS_TOL = 1e-9
CONFLICT_LIMIT = 1.0 - 1e-12


class TotalConflictError(ValueError):
    """Raised when two mass sets are (numerically) totally conflicting."""


def _frozen(values, name):
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DirichletOpinion:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = _frozen(self.alpha, "alpha")
        if alpha.size < 2:
            raise ValueError("need at least two classes")
        if not np.all(np.isfinite(alpha)) or np.any(alpha < 1.0):
            raise ValueError(f"Dirichlet parameters must be finite and >= 1, got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def K(self):
        return self.alpha.size

    @property
    def strength(self):
        return float(self.alpha.sum())

    @property
    def evidence(self):
        return self.alpha - 1.0

    def to_json(self):
        return {"alpha": [float(a) for a in self.alpha]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["alpha"])


@dataclass(frozen=True, eq=False)
class MassSet:
    """Belief mass per class plus one uncertainty mass, summing to one."""

    b: np.ndarray
    u: float

    def __post_init__(self):
        b = _frozen(self.b, "b")
        u = float(self.u)
        if b.size < 2:
            raise ValueError("need at least two classes")
        if not (np.all(np.isfinite(b)) and np.isfinite(u)):
            raise ValueError("mass components must be finite")
        if np.any(b < -MASS_TOL) or np.any(b > 1 + MASS_TOL) or not (-MASS_TOL <= u <= 1 + MASS_TOL):
            raise ValueError(f"mass components must lie in [0, 1]: b={b}, u={u}")
        total = float(b.sum()) + u
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, expected 1")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "u", u)

    @property
    def K(self):
        return self.b.size

    def allclose(self, other, atol=MASS_TOL):
        return (self.K == other.K and np.allclose(self.b, other.b, rtol=0, atol=atol)
                and abs(self.u - other.u) <= atol)

    def to_json(self):
        return {"b": [float(v) for v in self.b], "u": float(self.u)}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["b"], obj["u"])


@dataclass(frozen=True, eq=False)
class Prediction:
    class_index: int
    probs: np.ndarray
    uncertainty: float


def vacuous(K):
    return MassSet(np.zeros(K), 1.0)


def evidence_to_opinion(e):
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 1:
        raise ValueError("evidence must be a vector")
    if not np.all(np.isfinite(e)) or np.any(e < 0):
        raise ValueError(f"evidence must be finite and non-negative, got {e}")
    return DirichletOpinion(e + 1.0)


def opinion_to_mass(o):
    b, u = alpha_to_mass(o.alpha[None, :])
    return MassSet(b[0], u[0])


def mass_to_opinion(m):
    if m.u <= 0:
        raise ValueError("uncertainty mass is zero: the opinion would need infinite evidence")
    alpha = mass_to_alpha(m.b[None, :], np.array([m.u]))
    return DirichletOpinion(alpha[0])


def combine(m1, m2):
    if m1.K != m2.K:
        raise ValueError(f"class count mismatch: {m1.K} vs {m2.K}")
    b, u, _ = combine_masses(m1.b[None, :], np.array([m1.u]), m2.b[None, :], np.array([m2.u]))
    return MassSet(b[0], u[0])


def fuse_all(masses):
    """Left fold of ``combine`` in list order (CFP, OCT, Vessel for the pipeline)."""
    masses = list(masses)
    if not masses:
        raise ValueError("fuse_all needs at least one mass set")
    return reduce(combine, masses)


def predict(o):
    probs = o.alpha / o.strength
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return Prediction(int(np.argmax(probs)), probs, o.K / o.strength)


# ---------------------------------------------------------------------------
# batched kernels (rows are samples)


def alpha_to_mass(alpha):
    alpha = np.asarray(alpha, dtype=np.float64)
    S = alpha.sum(axis=-1, keepdims=True)
    return (alpha - 1.0) / S, alpha.shape[-1] / S[..., 0]


def alpha_to_mass_vjp(alpha, gb, gu):
    S = alpha.sum(axis=-1, keepdims=True)
    b, u = alpha_to_mass(alpha)
    inner = (gb * b).sum(axis=-1, keepdims=True) + (gu * u)[:, None]
    return (gb - inner) / S


def mass_to_alpha(b, u):
    S = b.shape[-1] / u
    return b * S[:, None] + 1.0


def mass_to_alpha_vjp(b, u, galpha):
    K = b.shape[-1]
    S = K / u
    gb = galpha * S[:, None]
    gS = (galpha * b).sum(axis=-1)
    return gb, gS * (-K / (u * u))


def combine_masses(b1, u1, b2, u2):
    """Reduced Dempster rule. Returns fused (b, u) and the conflict per row."""
    conflict = b1.sum(axis=-1) * b2.sum(axis=-1) - (b1 * b2).sum(axis=-1)
    if np.any(conflict >= CONFLICT_LIMIT):
        rows = np.flatnonzero(conflict >= CONFLICT_LIMIT).tolist()
        raise TotalConflictError(f"total conflict (K'={conflict.max():.17g}) in rows {rows}")
    norm = 1.0 - conflict
    b = (b1 * b2 + b1 * u2[:, None] + b2 * u1[:, None]) / norm[:, None]
    u = u1 * u2 / norm
    return b, u, conflict


def combine_masses_vjp(b1, u1, b2, u2, gb, gu):
    b, u, conflict = combine_masses(b1, u1, b2, u2)
    norm = 1.0 - conflict
    gn = gb / norm[:, None]
    # d(loss)/d(conflict) = -d(loss)/d(norm)
    gconf = ((gb * b).sum(axis=-1) + gu * u) / norm
    gb1 = gn * (b2 + u2[:, None]) + gconf[:, None] * (b2.sum(axis=-1, keepdims=True) - b2)
    gb2 = gn * (b1 + u1[:, None]) + gconf[:, None] * (b1.sum(axis=-1, keepdims=True) - b1)
    gu1 = (gn * b2).sum(axis=-1) + gu * u2 / norm
    gu2 = (gn * b1).sum(axis=-1) + gu * u1 / norm
    return gb1, gu1, gb2, gu2


def fuse_alphas(alphas):
    """Fuse per-modality Dirichlet parameters (list of (N, K) arrays) in order.

    Returns the fused parameters and a tape for ``fuse_alphas_vjp``.
    """
    masses = [alpha_to_mass(a) for a in alphas]
    steps = []
    b, u = masses[0]
    for b2, u2 in masses[1:]:
        steps.append((b, u, b2, u2))
        b, u, _ = combine_masses(b, u, b2, u2)
    return mass_to_alpha(b, u), (alphas, steps, b, u)


def fuse_alphas_vjp(tape, galpha):
    alphas, steps, b, u = tape
    gb, gu = mass_to_alpha_vjp(b, u, galpha)
    g_masses = [None] * len(alphas)
    for idx in range(len(steps) - 1, -1, -1):
        gb, gu, g_masses[idx + 1] = _split(combine_masses_vjp(*steps[idx], gb, gu))
    g_masses[0] = (gb, gu)
    return [alpha_to_mass_vjp(a, *g) for a, g in zip(alphas, g_masses)]


def _split(grads):
    gb1, gu1, gb2, gu2 = grads
    return gb1, gu1, (gb2, gu2)
