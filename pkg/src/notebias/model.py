"""Bag-of-words logistic regression stand-in classifier and external
prediction import."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .lexical import tokenize

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "notebias-linear/1"


@dataclass(frozen=True)
class FeatureSpace:
    tokens: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)


def build_features(train_docs: Sequence[Sequence[str]], max_features: int = 5000) -> FeatureSpace:
    """Top ``max_features`` tokens by document frequency, ties broken
    lexicographically. Takes training documents only."""
    if not train_docs:
        raise ValueError("need at least one training document")
    df: Counter = Counter()
    for doc in train_docs:
        df.update(set(doc))
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
    return FeatureSpace(tuple(t for t, _ in ranked[:max_features]))


def vectorize(space: FeatureSpace, docs: Sequence[Sequence[str]], norm: str = "l2") -> sparse.csr_matrix:
    """Count matrix restricted to the feature space, optionally L2-normalized
    per row."""
    idx = space.index
    cols: list[int] = []
    indptr = [0]
    for doc in docs:
        cols.extend([idx[t] for t in doc if t in idx])
        indptr.append(len(cols))
    # one entry per token occurrence; duplicates are summed into counts
    X = sparse.csr_matrix(
        (np.ones(len(cols)), np.asarray(cols, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(docs), len(space)),
    )
    X.sum_duplicates()
    if norm == "l2":
        sq = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        sq[sq == 0] = 1.0
        X = sparse.diags(1.0 / sq) @ X
        X = X.tocsr()
    elif norm != "none":
        raise ValueError(f"unknown norm {norm!r}")
    return X


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    # unit-norm rows bound the loss curvature by 1/4, so steps below 8 are
    # stable; 4 converges within the default epoch budget
    learning_rate: float = 4.0
    l2: float = 1e-4
    norm: str = "l2"
    # "maxabs" divides each column by its largest training value
    scaling: str = "none"
    max_features: int = 5000

    def __post_init__(self):
        if self.scaling not in ("none", "maxabs"):
            raise ValueError(f"unknown scaling {self.scaling!r}")
        if self.epochs < 0 or self.learning_rate <= 0 or self.l2 < 0:
            raise ValueError("epochs >= 0, learning_rate > 0 and l2 >= 0 required")


@dataclass
class LinearModel:
    space: FeatureSpace
    weights: np.ndarray
    bias: float
    config: TrainConfig = TrainConfig()
    seed: int = 0
    stopwords: frozenset[str] = frozenset()
    scale: np.ndarray | None = None
    history: list[float] = field(default_factory=list, repr=False)

    def decision(self, X) -> np.ndarray:
        """``X`` holds unscaled feature rows from :meth:`featurize`."""
        w = self.weights if self.scale is None else self.weights * self.scale
        return np.asarray(X @ w).ravel() + self.bias

    def predict_proba_matrix(self, X) -> np.ndarray:
        # keep outputs strictly inside (0, 1) even where float64 saturates
        eps = np.finfo(np.float64).eps
        return np.clip(sigmoid(self.decision(X)), eps, 1.0 - eps)

    def tokens(self, text: str) -> list[str]:
        return tokenize(text, self.stopwords)

    def featurize(self, texts: Sequence[str]):
        return vectorize(self.space, [self.tokens(t) for t in texts], self.config.norm)

    def predict_texts(self, texts: Sequence[str]) -> np.ndarray:
        return self.predict_proba_matrix(self.featurize(texts))

    __call__ = predict_texts


def column_scale(X) -> np.ndarray:
    """Reciprocal column max-abs values (1 for all-zero columns)."""
    m = np.asarray(abs(sparse.csr_matrix(X)).max(axis=0).todense()).ravel()
    out = np.ones_like(m)
    nz = m > 0
    out[nz] = 1.0 / m[nz]
    return out


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(w: np.ndarray, b: float, X, y: np.ndarray, l2: float) -> tuple[float, np.ndarray, float]:
    """Mean logistic loss plus ``l2/2 * |w|^2``; bias is not penalized."""
    z = np.asarray(X @ w).ravel() + b
    # log(1 + e^z) - y z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))
    r = sigmoid(z) - y
    n = len(y)
    gw = np.asarray(X.T @ r).ravel() / n + l2 * w
    gb = float(r.sum() / n)
    return loss, gw, gb


def fit_logistic(X, y: np.ndarray, config: TrainConfig = TrainConfig()) -> tuple[np.ndarray, float, list[float]]:
    """Full-batch gradient descent from zero weights."""
    y = np.asarray(y, dtype=np.float64)
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")
    w = np.zeros(X.shape[1])
    b = 0.0
    history = []
    for _ in range(config.epochs):
        loss, gw, gb = loss_and_grad(w, b, X, y, config.l2)
        history.append(loss)
        w = w - config.learning_rate * gw
        b = b - config.learning_rate * gb
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("training diverged; lower the learning rate")
    return w, b, history


def train(
    space: FeatureSpace,
    docs: Sequence[Sequence[str]],
    labels: Sequence[int],
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    stopwords: Iterable[str] = (),
) -> LinearModel:
    """``docs`` are token lists. ``seed`` is recorded only: zero
    initialization and full-batch steps leave nothing to randomize."""
    X = vectorize(space, docs, config.norm)
    scale = column_scale(X) if config.scaling == "maxabs" else None
    Xs = X @ sparse.diags(scale) if scale is not None else X
    w, b, hist = fit_logistic(sparse.csr_matrix(Xs), np.asarray(labels), config)
    return LinearModel(space, w, b, config, seed, frozenset(stopwords), scale, hist)


def train_texts(
    texts: Sequence[str],
    labels: Sequence[int],
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    stopwords: Iterable[str] = (),
) -> LinearModel:
    """Tokenize (keeping stopwords by default), build the feature space and
    train."""
    stopwords = frozenset(stopwords)
    docs = [tokenize(t, stopwords) for t in texts]
    space = build_features(docs, config.max_features)
    return train(space, docs, labels, config, seed, stopwords)


def predict_proba(model: LinearModel, doc: Sequence[str]) -> float:
    return float(model.predict_proba_matrix(vectorize(model.space, [doc], model.config.norm))[0])


# ---------------------------------------------------------------------------
# checkpoints


def save_model(model: LinearModel, path) -> None:
    obj = {
        "format": CHECKPOINT_FORMAT,
        "V": len(model.space),
        "tokens": list(model.space.tokens),
        "weights": [float(x) for x in model.weights],
        "bias": float(model.bias),
        "scale": None if model.scale is None else [float(x) for x in model.scale],
        "metadata": {
            "config": asdict(model.config),
            "seed": model.seed,
            "stopwords": sorted(model.stopwords),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> LinearModel:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {obj.get('format')!r}")
    if len(obj["tokens"]) != obj["V"] or len(obj["weights"]) != obj["V"]:
        raise ValueError(f"{path}: inconsistent checkpoint sizes")
    meta = obj["metadata"]
    return LinearModel(
        FeatureSpace(tuple(obj["tokens"])),
        np.asarray(obj["weights"], dtype=np.float64),
        float(obj["bias"]),
        TrainConfig(**meta["config"]),
        meta["seed"],
        frozenset(meta["stopwords"]),
        None if obj.get("scale") is None else np.asarray(obj["scale"], dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# predictions


@dataclass(frozen=True)
class PredictionRecord:
    patient_id: str
    true_label: str
    probability: float
    attributes: Mapping[str, str]
    bin: int

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")

    @property
    def y(self) -> int:
        return 1 if self.true_label == "case" else 0

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "true_label": self.true_label,
            "probability": self.probability,
            "attributes": dict(self.attributes),
            "bin": self.bin,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PredictionRecord":
        return cls(obj["patient_id"], obj["true_label"], float(obj["probability"]),
                   dict(obj["attributes"]), int(obj["bin"]))


def load_external_predictions(path, patients: Mapping, labels: Mapping[str, tuple[str, int]]):
    """Join ``{patient_id, probability}`` lines with demographics and cohort
    labels. Returns ``(records, warnings)``."""
    records, warnings = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pid = str(obj["patient_id"])
                prob = float(obj["probability"])
            except (ValueError, KeyError, TypeError) as exc:
                warnings.append(f"{path}:{lineno}: malformed row ({exc})")
                continue
            if not 0.0 <= prob <= 1.0:
                warnings.append(f"{path}:{lineno}: probability {prob} outside [0, 1]; row rejected")
                continue
            if pid not in patients or pid not in labels:
                warnings.append(f"{path}:{lineno}: unknown patient {pid!r}; skipped")
                continue
            pat = patients[pid]
            label, bin_ = labels[pid]
            records.append(
                PredictionRecord(pid, label, prob, {"sex": pat.sex, "race": pat.race}, bin_)
            )
    for w in warnings:
        log.warning(w)
    return records, warnings
