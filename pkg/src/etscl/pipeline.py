"""Two-stage pipeline: contrastive encoders per modality, then jointly trained
evidential heads fused in CFP, OCT, Vessel order."""
from dataclasses import asdict, dataclass, field

import numpy as np

from . import evidence, metrics, synthdata
from .contrastive import EncoderConfig, embed, train_encoder
from .nn import ClassifierConfig, forward, train_classifier
from .seeding import substream, substreams

MODALITIES = synthdata.MODALITIES


def train_encoders(train, config, modalities=MODALITIES, log=None):
    runs = {}
    for m in modalities:
        streams = substreams(config.seed, f"init:{m}", f"shuffle:{m}", f"augment:{m}")
        streams = {k.split(":")[0]: v for k, v in streams.items()}
        runs[m] = train_encoder(train.features(m), train.labels, config, streams)
        if log is not None:
            log(m, runs[m])
    return runs


def embed_all(encoders, ds, normalize=True):
    return [embed(encoders[m], ds.features(m), normalize) for m in MODALITIES]


def head_alphas(heads, embeddings):
    return [forward(h, x)[0] + 1.0 for h, x in zip(heads, embeddings)]


@dataclass
class Evaluation:
    n: int
    accuracy: float
    kappa: float
    mean_uncertainty: float
    confusion: np.ndarray
    preds: np.ndarray
    probs: np.ndarray
    uncertainty: np.ndarray
    branch_uncertainty: np.ndarray  # (N, 3)
    branch_kappa: dict = field(default_factory=dict)
    branch_accuracy: dict = field(default_factory=dict)

    def summary(self):
        return {"n": self.n, "accuracy": self.accuracy, "kappa": self.kappa,
                "mean_uncertainty": self.mean_uncertainty,
                "branch_kappa": self.branch_kappa, "branch_accuracy": self.branch_accuracy}


def _score(alpha, labels, K):
    preds = np.argmax(alpha, axis=1)
    cm = metrics.confusion(preds, labels, K)
    return preds, cm, metrics.accuracy(cm), metrics.quadratic_weighted_kappa(cm)


def evaluate(heads, embeddings, labels):
    """Fused and per-branch scores; 'cfp+oct' is the two-branch fusion."""
    labels = np.asarray(labels)
    alphas = head_alphas(heads, embeddings)
    K = alphas[0].shape[1]
    fused, _ = evidence.fuse_alphas(alphas)
    S = fused.sum(axis=1)
    preds, cm, acc, kappa = _score(fused, labels, K)
    ev = Evaluation(len(labels), acc, kappa, float(np.mean(K / S)), cm, preds, fused / S[:, None],
                    K / S, np.stack([K / a.sum(axis=1) for a in alphas], axis=1))
    candidates = dict(zip(MODALITIES, alphas))
    candidates["cfp+oct"] = evidence.fuse_alphas(alphas[:2])[0]
    for name, alpha in candidates.items():
        _, _, ev.branch_accuracy[name], ev.branch_kappa[name] = _score(alpha, labels, K)
    return ev


@dataclass
class BenchmarkResult:
    spec: dict
    encoder_config: dict
    classifier_config: dict
    encoder_losses: dict
    classifier_losses: list
    test: Evaluation
    conflict_uncertainty: float
    clean_uncertainty: float

    def numbers(self):
        """Every reported number, for determinism comparisons."""
        return {**self.test.summary(), "conflict_uncertainty": self.conflict_uncertainty,
                "clean_uncertainty": self.clean_uncertainty,
                "encoder_losses": self.encoder_losses,
                "classifier_losses": [r.total for r in self.classifier_losses],
                "confusion": self.test.confusion.tolist()}


def run_benchmark(spec=None, encoder_config=None, classifier_config=None, train_fraction=2 / 3):
    spec = spec or synthdata.DatasetSpec()
    encoder_config = encoder_config or EncoderConfig(seed=spec.seed)
    classifier_config = classifier_config or ClassifierConfig(seed=spec.seed, n_classes=spec.n_classes)
    ds = synthdata.generate(spec, substream(spec.seed, "data"))
    train, test = synthdata.split(ds, train_fraction, substream(spec.seed, "split"))
    runs = train_encoders(train, encoder_config)
    encoders = {m: r.params for m, r in runs.items()}
    heads, history = train_classifier(embed_all(encoders, train), train.labels, classifier_config,
                                      rng=substream(classifier_config.seed, "init:heads"))
    ev = evaluate(heads, embed_all(encoders, test), test.labels)
    flagged = test.conflict_flags().any(axis=1)
    return BenchmarkResult(
        asdict(spec), asdict(encoder_config), asdict(classifier_config),
        {m: r.epoch_losses for m, r in runs.items()}, history, ev,
        float(ev.uncertainty[flagged].mean()) if flagged.any() else float("nan"),
        float(ev.uncertainty[~flagged].mean()) if (~flagged).any() else float("nan"),
    )
