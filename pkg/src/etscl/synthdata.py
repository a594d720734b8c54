"""Seeded synthetic multi-modal datasets and tube images.

Each modality is a Gaussian mixture with unit isotropic noise and class means
on a regular simplex, so one scalar per modality (the pairwise distance
between class means) sets how informative that modality is.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

MODALITIES = ("cfp", "oct", "vessel")


@dataclass
class DatasetSpec:
    n_samples: int = 300
    n_classes: int = 3
    dims: tuple = (32, 64, 16)
    separability: tuple = (2.0, 1.5, 1.0)
    conflict_rate: float = 0.1
    label_distribution: tuple = None
    seed: int = 1

    def proportions(self):
        if self.label_distribution is None:
            return np.full(self.n_classes, 1.0 / self.n_classes)
        p = np.asarray(self.label_distribution, dtype=np.float64)
        if p.shape != (self.n_classes,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"label_distribution must be {self.n_classes} proportions summing to 1")
        return p

    def validate(self):
        if self.n_samples < 0 or self.n_classes < 2:
            raise ValueError("need n_samples >= 0 and at least two classes")
        if len(self.dims) != 3 or len(self.separability) != 3:
            raise ValueError("need one dimension and one separability per modality")
        if any(d < self.n_classes - 1 for d in self.dims):
            raise ValueError("modality dimension must be at least n_classes - 1")
        if any(s < 0 for s in self.separability):
            raise ValueError("separability must be >= 0")
        if not 0.0 <= self.conflict_rate <= 1.0:
            raise ValueError("conflict_rate must be in [0, 1]")
        self.proportions()


@dataclass
class Record:
    id: int
    label: int
    cfp: np.ndarray
    oct: np.ndarray
    vessel: np.ndarray
    conflict: list = field(default_factory=lambda: [False, False, False])

    def to_json(self):
        return {"id": self.id, "label": self.label, "cfp": self.cfp.tolist(),
                "oct": self.oct.tolist(), "vessel": self.vessel.tolist(),
                "conflict": [bool(c) for c in self.conflict]}


@dataclass
class MultiModalDataset:
    records: list

    def __len__(self):
        return len(self.records)

    @property
    def labels(self):
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def ids(self):
        return np.array([r.id for r in self.records], dtype=np.int64)

    def features(self, modality):
        rows = [getattr(r, modality) for r in self.records]
        return np.array(rows, dtype=np.float64)

    def conflict_flags(self):
        return np.array([r.conflict for r in self.records], dtype=bool).reshape(-1, 3)

    def subset(self, indices):
        return MultiModalDataset([self.records[i] for i in indices])


def simplex_means(n_classes, dim, separation):
    """Class means with all pairwise distances equal to ``separation``."""
    centered = np.eye(n_classes) - 1.0 / n_classes
    # rows of the centred identity are sqrt(2) apart and span n_classes - 1 dims
    basis = np.linalg.svd(centered)[2][: n_classes - 1]
    coords = centered @ basis.T * (separation / math.sqrt(2.0))
    means = np.zeros((n_classes, dim))
    means[:, : n_classes - 1] = coords
    return means


def generate(spec, rng=None):
    spec.validate()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    K, n = spec.n_classes, spec.n_samples
    labels = rng.choice(K, size=n, p=spec.proportions())
    means = [simplex_means(K, d, s) for d, s in zip(spec.dims, spec.separability)]
    conflict = rng.random((n, 3)) < spec.conflict_rate
    # wrong class = label + offset, offset uniform in 1..K-1
    shift = rng.integers(1, K, size=(n, 3))
    source = np.where(conflict, (labels[:, None] + shift) % K, labels[:, None])
    feats = [means[m][source[:, m]] + rng.normal(size=(n, spec.dims[m])) for m in range(3)]
    records = [Record(i, int(labels[i]), feats[0][i], feats[1][i], feats[2][i], conflict[i].tolist())
               for i in range(n)]
    return MultiModalDataset(records)


def split(ds, train_fraction=2 / 3, rng=None):
    """Stratified seeded split; the train side gets round(fraction * n) samples."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = rng if rng is not None else np.random.default_rng(0)
    n = len(ds)
    n_train = int(math.floor(train_fraction * n + 0.5))
    if n_train == 0 or n_train == n:
        raise ValueError(f"empty side: {n_train} train / {n - n_train} test samples")
    labels = ds.labels
    classes = np.unique(labels)
    groups = [rng.permutation(np.flatnonzero(labels == k)) for k in classes]
    # largest-remainder apportionment keeps per-class ratios and the exact total
    quota = np.array([len(g) * n_train / n for g in groups])
    take = np.floor(quota).astype(int)
    for k in np.argsort(-(quota - take), kind="stable")[: n_train - take.sum()]:
        take[k] += 1
    train = np.sort(np.concatenate([g[:t] for g, t in zip(groups, take)]))
    test = np.sort(np.concatenate([g[t:] for g, t in zip(groups, take)]))
    return ds.subset(train), ds.subset(test)


def write_dataset(ds, path):
    with open(path, "w") as fh:
        for rec in ds.records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def read_dataset(path):
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rec = Record(int(obj["id"]), int(obj["label"]),
                             *(np.asarray(obj[m], dtype=np.float64) for m in MODALITIES),
                             [bool(c) for c in obj.get("conflict", [False] * 3)])
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record ({exc!r})") from exc
            records.append(rec)
    return MultiModalDataset(records)


# ---------------------------------------------------------------------------
# tube images for the vesselness filter


BACKGROUND = 0.8


def generate_tube_image(width, height, tube_width_px, angle_deg, contrast, polarity="dark"):
    """Straight tube through the image centre with a Gaussian cross-section.

    The profile standard deviation is ``tube_width_px / (2 * sqrt(2))``, which
    puts the peak of the sigma^2-normalised Hessian response at sigma = width / 2.
    Returns (image, centerline mask); the mask marks, per column (or per row
    for steep tubes), the pixel closest to the axis.
    """
    if tube_width_px <= 0:
        raise ValueError("tube width must be positive")
    if tube_width_px > min(width, height):
        raise ValueError("tube is wider than the image")
    if contrast < 0:
        raise ValueError("contrast must be >= 0")
    sign = -1.0 if polarity == "dark" else 1.0
    if polarity not in ("dark", "bright"):
        raise ValueError("polarity must be 'dark' or 'bright'")
    peak = BACKGROUND + sign * contrast
    if not 0.0 <= peak <= 1.0:
        raise ValueError(f"contrast {contrast} pushes the tube outside [0, 1]")
    theta = math.radians(angle_deg)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    # perpendicular distance to the line through the centre with direction theta
    dist = np.abs(-(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta))
    std = tube_width_px / (2.0 * math.sqrt(2.0))
    img = BACKGROUND + sign * contrast * np.exp(-dist ** 2 / (2 * std * std))
    mask = np.zeros((height, width), dtype=bool)
    if abs(math.cos(theta)) >= abs(math.sin(theta)):
        for x in range(width):
            y = int(math.floor(cy + (x - cx) * math.tan(theta) + 0.5))
            if 0 <= y < height:
                mask[y, x] = True
    else:
        for y in range(height):
            x = int(math.floor(cx + (y - cy) / math.tan(theta) + 0.5))
            if 0 <= x < width:
                mask[y, x] = True
    return np.clip(img, 0.0, 1.0), mask
