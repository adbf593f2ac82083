"""Local surrogate explanations and the influential-word audit."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .lexical import PRONOUNS, tokenize

PredictFn = Callable[[Sequence[str]], np.ndarray]


@dataclass(frozen=True)
class Explanation:
    doc_id: str
    predicted_class: str
    confidence: float
    words: tuple[tuple[str, float], ...]
    uninformative: bool = False

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "class": self.predicted_class,
            "confidence": self.confidence,
            "words": [[w, wt] for w, wt in self.words],
            "uninformative": self.uninformative,
        }


def weighted_ridge(Z: np.ndarray, y: np.ndarray, sample_weight: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Weighted least squares with an unpenalized intercept and L2 penalty
    ``alpha`` on the coefficients."""
    sw = sample_weight / sample_weight.sum()
    zm = sw @ Z
    ym = float(sw @ y)
    Zc = Z - zm
    yc = y - ym
    A = Zc.T @ (Zc * sw[:, None]) + alpha * np.eye(Z.shape[1])
    coef = np.linalg.solve(A, Zc.T @ (sw * yc))
    return coef, ym - float(zm @ coef)


def perturbation_samples(n_features: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Binary presence matrix; row 0 is the unperturbed document."""
    Z = (rng.random((n_samples, n_features)) < 0.5).astype(np.float64)
    Z[0] = 1.0
    return Z


def explain(
    doc: str,
    predict_fn: PredictFn,
    n_samples: int = 500,
    kernel_width: float | None = None,
    k: int = 5,
    seed: int = 0,
    alpha: float = 1e-3,
    doc_id: str = "",
) -> Explanation:
    """Top-``k`` words by surrogate coefficient magnitude.

    Each distinct word is toggled as a unit (all occurrences at once) with
    probability 0.5. Samples are weighted by ``exp(-d^2 / width^2)`` with
    ``d`` the cosine distance to the full presence vector. Weights are
    signed toward the predicted class.
    """
    tokens = tokenize(doc, stopwords=())
    vocab = sorted(set(tokens))
    if not vocab:
        raise ValueError("cannot explain an empty document")
    m = len(vocab)
    if kernel_width is None:
        kernel_width = 0.75 * math.sqrt(m)
    rng = np.random.default_rng(seed)
    Z = perturbation_samples(m, n_samples, rng)

    pos = {w: i for i, w in enumerate(vocab)}
    tok_idx = np.array([pos[t] for t in tokens])
    tok_arr = np.array(tokens, dtype=object)
    texts = [" ".join(tok_arr[Z[s, tok_idx] > 0]) for s in range(n_samples)]
    probs = np.asarray(predict_fn(texts), dtype=np.float64).ravel()

    p0 = float(probs[0])
    positive = p0 >= 0.5
    y = probs if positive else 1.0 - probs
    kept = Z.sum(axis=1)
    # cosine similarity between a 0/1 vector and the all-ones vector
    cos = np.sqrt(kept / m)
    d = 1.0 - cos
    weights = np.exp(-(d**2) / kernel_width**2)

    flat = float(np.ptp(y)) < 1e-12
    if flat:
        coef = np.zeros(m)
    else:
        coef, _ = weighted_ridge(Z, y, weights, alpha)
    order = sorted(range(m), key=lambda i: (-abs(coef[i]), vocab[i]))[:k]
    return Explanation(
        doc_id,
        "case" if positive else "control",
        max(p0, 1 - p0),
        tuple((vocab[i], float(coef[i])) for i in order),
        flat,
    )


# ---------------------------------------------------------------------------
# audit


@dataclass
class InfluenceVocabulary:
    predicted_class: str
    entries: dict[str, tuple[int, float]] = field(default_factory=dict)
    n_examples: int = 0
    biased_words: tuple[str, ...] = ()
    flags: list[str] = field(default_factory=list)

    @property
    def biased_pct(self) -> float:
        if not self.entries:
            return 0.0
        return 100.0 * len(self.biased_words) / len(self.entries)

    @property
    def biased_mean_freq(self) -> float:
        if not self.biased_words:
            return 0.0
        return sum(self.entries[w][0] for w in self.biased_words) / len(self.biased_words)

    def top_influential(self, n: int = 10) -> list[str]:
        return [w for w, _ in sorted(self.entries.items(), key=lambda kv: (-kv[1][1], kv[0]))[:n]]

    def top_frequent(self, n: int = 10) -> list[str]:
        return [w for w, _ in sorted(self.entries.items(), key=lambda kv: (-kv[1][0], -kv[1][1], kv[0]))[:n]]

    def to_json(self) -> dict:
        return {
            "class": self.predicted_class,
            "n_examples": self.n_examples,
            "biased_pct": self.biased_pct,
            "biased_mean_freq": self.biased_mean_freq,
            "biased_words": list(self.biased_words),
            "top_influential": self.top_influential(),
            "top_frequent": self.top_frequent(),
            "entries": {w: [f, m] for w, (f, m) in sorted(self.entries.items())},
            "flags": self.flags,
        }


def collate(
    explanations: Sequence[Explanation],
    predicted_class: str,
    is_biased: Callable[[str], bool],
) -> InfluenceVocabulary:
    """Frequency = number of explanations listing the word; mean |weight|
    over those explanations."""
    freq: dict[str, int] = {}
    total: dict[str, float] = {}
    for ex in explanations:
        for w, wt in ex.words:
            freq[w] = freq.get(w, 0) + 1
            total[w] = total.get(w, 0.0) + abs(wt)
    entries = {w: (freq[w], total[w] / freq[w]) for w in freq}
    biased = tuple(sorted(w for w in entries if is_biased(w)))
    return InfluenceVocabulary(predicted_class, entries, len(explanations), biased)


def merge_vocabularies(vocabs: Sequence[InfluenceVocabulary], is_biased: Callable[[str], bool]) -> InfluenceVocabulary:
    """Pool per-bin vocabularies of one class."""
    if not vocabs:
        raise ValueError("nothing to merge")
    freq: dict[str, int] = {}
    total: dict[str, float] = {}
    for v in vocabs:
        for w, (f, m) in v.entries.items():
            freq[w] = freq.get(w, 0) + f
            total[w] = total.get(w, 0.0) + f * m
    entries = {w: (freq[w], total[w] / freq[w]) for w in freq}
    return InfluenceVocabulary(
        vocabs[0].predicted_class,
        entries,
        sum(v.n_examples for v in vocabs),
        tuple(sorted(w for w in entries if is_biased(w))),
        [f for v in vocabs for f in v.flags],
    )


def gendered_word_check(first_names: frozenset[str] | None = None, pronouns=PRONOUNS) -> Callable[[str], bool]:
    """Case-folded lookup in the pronoun set and first-name dictionary."""
    if first_names is None:
        from .debias import default_first_names

        first_names = default_first_names()

    def check(word: str) -> bool:
        w = word.lower()
        return w in pronouns or w in first_names

    return check


def most_confident(records: Sequence, per_class_top: int = 10) -> dict[str, list]:
    """Top records per predicted class by ``max(p, 1 - p)``."""
    out: dict[str, list] = {"case": [], "control": []}
    for r in records:
        out["case" if r.probability >= 0.5 else "control"].append(r)
    for cls in out:
        out[cls].sort(key=lambda r: (-max(r.probability, 1 - r.probability), r.patient_id))
        out[cls] = out[cls][:per_class_top]
    return out


def audit_influential(
    records: Sequence,
    docs: Mapping[str, str],
    predict_fn: PredictFn,
    per_class_top: int = 10,
    k: int = 5,
    is_biased: Callable[[str], bool] | None = None,
    n_samples: int = 500,
    seed: int = 0,
) -> tuple[dict[str, InfluenceVocabulary], list[Explanation]]:
    """Explain the most confident predictions of each class and collate
    their top words."""
    if is_biased is None:
        is_biased = gendered_word_check()
    chosen = most_confident(records, per_class_top)
    vocabs = {}
    explanations = []
    for cls, recs in chosen.items():
        exps = [
            explain(docs[r.patient_id], predict_fn, n_samples=n_samples, k=k,
                    seed=seed, doc_id=r.patient_id)
            for r in recs
        ]
        v = collate(exps, cls, is_biased)
        if len(recs) < per_class_top:
            v.flags.append(f"only {len(recs)} {cls} predictions available (wanted {per_class_top})")
        vocabs[cls] = v
        explanations.extend(exps)
    return vocabs, explanations


def write_explanations(path, explanations: Sequence[Explanation]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in explanations:
            fh.write(json.dumps(ex.to_json(), sort_keys=True) + "\n")


def format_influence_table(rows: Sequence[tuple[str, InfluenceVocabulary]]) -> str:
    """Rows of (run label, vocabulary) laid out like the audit summary:
    influential words, frequent words, biased share and frequency."""
    lines = ["run\tclass\ttop-10 influential\ttop-10 frequent\tbiased,%\tbiased, av fr"]
    for label, v in rows:
        lines.append(
            f"{label}\t{v.predicted_class}\t{', '.join(v.top_influential())}\t"
            f"{', '.join(v.top_frequent())}\t{v.biased_pct:.0f}\t{v.biased_mean_freq:.2f}"
        )
    return "\n".join(lines) + "\n"
