"""Sentence filtering (random and TF-IDF based) and gender-word
neutralization."""

from __future__ import annotations

import hashlib
import logging
import random
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import NOTE_SEPARATOR
from .lexical import (
    PRONOUNS,
    PUNCTUATION,
    GenderLexicon,
    Span,
    TermLexicon,
    TfIdfModel,
    _data_lines,
    default_stopwords,
    default_term_lexicon,
    join_spans,
    sentence_spans,
    tokenize,
    tokenize_spans,
)

log = logging.getLogger(__name__)

PRONOUN_MAP: dict[str, str] = {
    "he": "they",
    "she": "they",
    "him": "them",
    "his": "their",
    "her": "their",
    "hers": "theirs",
}


def doc_seed(seed: int, doc_id: str) -> int:
    h = hashlib.sha256(f"{seed}:{doc_id}".encode()).digest()
    return int.from_bytes(h[:8], "big")


def _n_remove(n_sentences: int, fraction: float) -> int:
    if not 0 <= fraction < 1:
        raise ValueError("fraction must lie in [0, 1)")
    k = int(fraction * n_sentences)
    return min(k, max(n_sentences - 1, 0))


# ---------------------------------------------------------------------------
# filtering


def rnd_filt(document: str, fraction: float = 0.2, seed: int = 0) -> str:
    """Remove ``floor(fraction * S)`` sentences chosen uniformly at random."""
    spans = sentence_spans(document)
    if not spans:
        log.debug("rnd_filt: empty document left unchanged")
        return document
    k = _n_remove(len(spans), fraction)
    if k == 0:
        return document
    drop = set(random.Random(seed).sample(range(len(spans)), k))
    return join_spans(document, [s for i, s in enumerate(spans) if i not in drop])


@dataclass(frozen=True)
class SentenceScore:
    index: int
    score: float
    sentence: str


def sentence_scores(document: str, model: TfIdfModel, stopwords=None,
                    spans: Sequence[Span] | None = None) -> list[SentenceScore]:
    """Mean TF-IDF of each sentence's content tokens, with term frequency
    counted over the whole document."""
    if spans is None:
        spans = sentence_spans(document)
    sent_tokens = tokenize_spans(document, spans, stopwords)
    counts = Counter(t for toks in sent_tokens for t in toks)
    weight = {t: c * model.idf(t) for t, c in counts.items()}
    out = []
    for i, ((s, e), toks) in enumerate(zip(spans, sent_tokens)):
        sc = sum(map(weight.__getitem__, toks)) / len(toks) if toks else 0.0
        out.append(SentenceScore(i, sc, document[s:e]))
    return out


def removal_set(scores: Sequence[SentenceScore], fraction: float) -> set[int]:
    """Indices of the ``floor(fraction * S)`` lowest scores; among equal
    scores the earlier sentence goes first."""
    k = _n_remove(len(scores), fraction)
    order = sorted(scores, key=lambda s: (s.score, s.index))
    return {s.index for s in order[:k]}


def tfidf_filt(document: str, model: TfIdfModel, fraction: float = 0.2, stopwords=None) -> str:
    spans = sentence_spans(document)
    if not spans:
        log.debug("tfidf_filt: empty document left unchanged")
        return document
    drop = removal_set(sentence_scores(document, model, stopwords, spans), fraction)
    if not drop:
        return document
    return join_spans(document, [s for i, s in enumerate(spans) if i not in drop])


# ---------------------------------------------------------------------------
# names

_WORD = re.compile(r"[^\W\d_]+(?:'[^\W\d_]+)?")
_SENTENCE_END = ".?!"

NON_NAME_CAPITALS = frozenset(
    "monday tuesday wednesday thursday friday saturday sunday january february "
    "march april may june july august september october november december "
    "dr mr mrs ms md rn np pt ot".split()
)


@lru_cache(maxsize=None)
def default_first_names() -> frozenset[str]:
    return frozenset(_data_lines("first_names.txt"))


def _is_capitalized(word: str) -> bool:
    return len(word) >= 2 and word[0].isupper() and word[1:].islower()


def _sentence_initial(text: str, start: int) -> bool:
    i = start - 1
    while i >= 0 and text[i] in " \t\"'([":
        i -= 1
    return i < 0 or text[i] in _SENTENCE_END or text[i] == "\n"


class NameDetector:
    """Heuristic person-name detector.

    A word is a name when it is a capitalized first-name dictionary entry
    (any position), or when it is capitalized mid-sentence and is neither a
    stopword nor a medical term. Sentence-initial surnames are missed.
    """

    def __init__(
        self,
        first_names: Iterable[str] | None = None,
        stopwords: Iterable[str] | None = None,
        terms: TermLexicon | None = None,
    ):
        self.first_names = frozenset(n.lower() for n in first_names) if first_names is not None else default_first_names()
        self.stopwords = frozenset(stopwords) if stopwords is not None else default_stopwords()
        self.terms = terms if terms is not None else default_term_lexicon()

    def is_name_word(self, word: str, sentence_initial: bool) -> bool:
        if not _is_capitalized(word):
            return False
        low = word.lower()
        if low in self.first_names:
            return True
        if sentence_initial:
            return False
        return (
            low not in self.stopwords
            and low not in self.terms.words
            and low not in NON_NAME_CAPITALS
        )

    def __call__(self, text: str) -> list[Span]:
        spans = []
        for m in _WORD.finditer(text):
            word = m.group()
            if "'" in word:
                # possessive: judge the stem only
                stem = word.split("'")[0]
                if self.is_name_word(stem, _sentence_initial(text, m.start())):
                    spans.append((m.start(), m.start() + len(stem)))
                continue
            if self.is_name_word(word, _sentence_initial(text, m.start())):
                spans.append(m.span())
        return spans


def detect_names(text: str, detector: Callable[[str], list[Span]] | None = None) -> list[Span]:
    if detector is None:
        detector = default_detector()
    return detector(text)


@lru_cache(maxsize=None)
def default_detector() -> NameDetector:
    return NameDetector()


def default_gender_lexicon() -> GenderLexicon:
    return GenderLexicon(PRONOUNS, default_detector())


def edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_distance(a: str, b: str) -> float:
    a, b = a.casefold(), b.casefold()
    longest = max(len(a), len(b))
    return edit_distance(a, b) / longest if longest else 0.0


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller index as root keeps groups ordered by first appearance
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass(frozen=True)
class NameGroup:
    identifier: str
    surface_forms: frozenset[str]


def group_names(names: Sequence[str], max_norm_distance: float = 0.25) -> list[NameGroup]:
    """Connected components of the "normalized edit distance <=
    ``max_norm_distance``" relation. ``names`` should be in order of first
    appearance; groups are numbered person1, person2, ... in that order."""
    forms: list[str] = []
    seen = set()
    for n in names:
        if n not in seen:
            seen.add(n)
            forms.append(n)
    keys = [f.casefold() for f in forms]
    uf = UnionFind(len(forms))
    for i in range(len(forms)):
        for j in range(i + 1, len(forms)):
            if normalized_distance(keys[i], keys[j]) <= max_norm_distance:
                uf.union(i, j)
    members: dict[int, list[str]] = {}
    for i, f in enumerate(forms):
        members.setdefault(uf.find(i), []).append(f)
    return [
        NameGroup(f"person{k}", frozenset(group))
        for k, (_, group) in enumerate(sorted(members.items()), 1)
    ]


def _pronoun_pattern(words: Iterable[str]) -> re.Pattern:
    # token boundaries match the tokenizer: whitespace or punctuation
    edge = "\\s" + re.escape(PUNCTUATION)
    alts = "|".join(map(re.escape, sorted(words, key=len, reverse=True)))
    return re.compile(rf"(?<![^{edge}])(?:{alts})(?![^{edge}])", re.IGNORECASE | re.ASCII)


_PRONOUN_RE = _pronoun_pattern(PRONOUN_MAP)


def _match_case(src: str, repl: str) -> str:
    if src.isupper() and len(src) > 1:
        return repl.upper()
    if src[0].isupper():
        return repl[0].upper() + repl[1:]
    return repl


def substitute_pronouns(text: str, pronoun_map: Mapping[str, str] = PRONOUN_MAP) -> str:
    """Whole-token pronoun replacement keeping leading capitalization."""
    pattern = _PRONOUN_RE if pronoun_map is PRONOUN_MAP else _pronoun_pattern(pronoun_map)
    return pattern.sub(lambda m: _match_case(m.group(), pronoun_map[m.group().lower()]), text)


def gen_sub_note(
    text: str,
    detector: Callable[[str], list[Span]] | None = None,
    pronoun_map: Mapping[str, str] = PRONOUN_MAP,
    max_norm_distance: float = 0.25,
) -> str:
    """Replace names with per-note group identifiers, then neutralize
    pronouns."""
    spans = detect_names(text, detector)
    if spans:
        surfaces = [text[s:e] for s, e in spans]
        ident = {}
        for g in group_names(surfaces, max_norm_distance):
            for f in g.surface_forms:
                ident[f] = g.identifier
        parts, last = [], 0
        for (s, e), surf in zip(spans, surfaces):
            parts.append(text[last:s])
            parts.append(ident[surf])
            last = e
        parts.append(text[last:])
        text = "".join(parts)
    return substitute_pronouns(text, pronoun_map)


def gen_sub(
    document: str,
    detector: Callable[[str], list[Span]] | None = None,
    pronoun_map: Mapping[str, str] = PRONOUN_MAP,
    max_norm_distance: float = 0.25,
) -> str:
    """Gender-word substitution; name enumeration restarts for every note
    of a concatenated document."""
    return NOTE_SEPARATOR.join(
        gen_sub_note(chunk, detector, pronoun_map, max_norm_distance)
        for chunk in document.split(NOTE_SEPARATOR)
    )


# ---------------------------------------------------------------------------
# composition

Transform = Callable[[str, str], str]
TRANSFORMS = ("rnd_filt", "tfidf_filt", "gen_sub")


def compose(document: str, pipeline: Sequence[Transform], doc_id: str = "") -> str:
    for step in pipeline:
        document = step(document, doc_id)
    return document


def canonical_transform(name: str) -> str:
    """``"tf-idf_filt"``, ``"TFIDF-filt"`` and ``"tfidf_filt"`` name the
    same transform."""
    key = name.lower().replace("-", "").replace("_", "")
    for t in TRANSFORMS:
        if t.replace("_", "") == key:
            return t
    raise ValueError(f"unknown transform {name!r}; expected one of {TRANSFORMS}")


def make_pipeline(
    names: Sequence[str],
    *,
    tfidf: TfIdfModel | None = None,
    fraction: float = 0.2,
    seed: int = 0,
    detector: Callable[[str], list[Span]] | None = None,
    pronoun_map: Mapping[str, str] = PRONOUN_MAP,
    stopwords=None,
) -> list[Transform]:
    """Build transforms by name. ``tfidf_filt`` needs a fitted model;
    ``rnd_filt`` derives a per-document seed from ``seed`` and the doc id."""
    steps: list[Transform] = []
    for name in map(canonical_transform, names):
        if name == "rnd_filt":
            steps.append(lambda d, i: rnd_filt(d, fraction, doc_seed(seed, i)))
        elif name == "tfidf_filt":
            if tfidf is None:
                raise ValueError("tfidf_filt needs a fitted TfIdfModel")
            steps.append(lambda d, i: tfidf_filt(d, tfidf, fraction, stopwords))
        elif name == "gen_sub":
            steps.append(lambda d, i: gen_sub(d, detector, pronoun_map))
    return steps
