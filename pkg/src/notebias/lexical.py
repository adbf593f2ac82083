"""Tokenization, TF-IDF statistics, sentence segmentation and vocabulary
distribution measures."""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Mapping, Sequence

PUNCTUATION = string.punctuation + "‘’“”–—…"
_PUNCT_TABLE = str.maketrans({c: " " for c in PUNCTUATION})

PRONOUNS = frozenset({"he", "she", "his", "her", "him", "hers"})

Span = tuple[int, int]


def _data_lines(name: str) -> list[str]:
    text = resources.files("notebias.data").joinpath(name).read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip()]


def read_word_list(path) -> frozenset[str]:
    """One entry per line; blank lines and ``#`` comments are ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(
            ln.strip().lower() for ln in fh if ln.strip() and not ln.startswith("#")
        )


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    return frozenset(_data_lines("stopwords.txt"))


def tokenize(text: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Lowercase, map punctuation to spaces, split on whitespace and drop
    stopwords. ``stopwords=None`` means the shipped English list; pass an
    empty set to keep everything."""
    if stopwords is None:
        stopwords = default_stopwords()
    words = text.lower().translate(_PUNCT_TABLE).split()
    if not stopwords:
        return words
    return [w for w in words if w not in stopwords]


def tokenize_spans(text: str, spans: Sequence[Span], stopwords: Iterable[str] | None = None) -> list[list[str]]:
    """``tokenize`` applied to each span of ``text``, normalizing the text
    once when lowercasing keeps character offsets."""
    if stopwords is None:
        stopwords = default_stopwords()
    low = text.lower()
    if len(low) != len(text):
        return [tokenize(text[s:e], stopwords) for s, e in spans]
    low = low.translate(_PUNCT_TABLE)
    if not stopwords:
        return [low[s:e].split() for s, e in spans]
    return [[w for w in low[s:e].split() if w not in stopwords] for s, e in spans]


def word_count(text: str) -> int:
    """Whitespace-separated chunks of the raw text."""
    return len(text.split())


# ---------------------------------------------------------------------------
# vocabulary similarity


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        raise ValueError("jaccard is undefined for two empty vocabularies")
    return len(a & b) / len(union)


def familiarity(a: Iterable[str], b: Iterable[str]) -> float | None:
    """Size of the union over size of the symmetric difference.

    Equal to ``1 / (1 - jaccard(a, b))``. Returns ``None`` for identical
    vocabularies, where the symmetric difference is empty.
    """
    a, b = set(a), set(b)
    union = a | b
    if not union:
        raise ValueError("familiarity is undefined for two empty vocabularies")
    sym = a ^ b
    if not sym:
        return None
    return len(union) / len(sym)


# ---------------------------------------------------------------------------
# term lexicon


class TermLexicon:
    """Medical-term matcher over token lists.

    Multi-word entries are matched greedily, longest first, left to right.
    Entries are normalized with the same tokenizer as documents (no stopword
    removal), so ``x-ray`` becomes the two-token term ``x ray``.
    """

    def __init__(self, terms: Iterable[str]):
        entries = set()
        for term in terms:
            toks = tuple(tokenize(term, stopwords=()))
            if toks:
                entries.add(toks)
        if not entries:
            raise ValueError("term lexicon is empty")
        self.entries = frozenset(entries)
        self.max_len = max(len(e) for e in self.entries)
        self.words = frozenset(w for e in self.entries for w in e)

    @classmethod
    def from_file(cls, path) -> "TermLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls(ln.strip() for ln in fh if ln.strip())

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return (token,) in self.entries

    def matches(self, tokens: Sequence[str]) -> list[tuple[int, int]]:
        """Token index spans ``[i, j)`` of every matched term."""
        out = []
        i, n = 0, len(tokens)
        while i < n:
            if tokens[i] in self.words:
                for width in range(min(self.max_len, n - i), 0, -1):
                    if tuple(tokens[i : i + width]) in self.entries:
                        out.append((i, i + width))
                        i += width
                        break
                else:
                    i += 1
            else:
                i += 1
        return out

    def matched_terms(self, tokens: Sequence[str]) -> list[str]:
        return [" ".join(tokens[i:j]) for i, j in self.matches(tokens)]


@lru_cache(maxsize=None)
def default_term_lexicon() -> TermLexicon:
    return TermLexicon(_data_lines("medical_terms.txt"))


def term_percentage(tokens: Sequence[str], lexicon) -> float:
    """Percentage of tokens covered by a lexicon term (token-level count)."""
    if not tokens:
        return 0.0
    if not isinstance(lexicon, TermLexicon):
        lexicon = TermLexicon(lexicon)
    covered = sum(j - i for i, j in lexicon.matches(tokens))
    return 100.0 * covered / len(tokens)


# ---------------------------------------------------------------------------
# gendered words


@dataclass(frozen=True)
class GenderLexicon:
    """Pronoun set plus a name detector returning one character span per
    detected name token."""

    pronouns: frozenset[str] = PRONOUNS
    name_detector: Callable[[str], list[Span]] | None = None

    def name_spans(self, text: str) -> list[Span]:
        return self.name_detector(text) if self.name_detector is not None else []


def biased_word_percentage(text: str, lexicon: GenderLexicon) -> float:
    """Percentage of tokens that are detected names or gendered pronouns.
    Stopwords are kept in the denominator since the pronouns are stopwords."""
    tokens = tokenize(text, stopwords=())
    if not tokens:
        return 0.0
    pronouns = sum(1 for t in tokens if t in lexicon.pronouns)
    names = len(lexicon.name_spans(text))
    return 100.0 * (pronouns + names) / len(tokens)


# ---------------------------------------------------------------------------
# TF-IDF


@dataclass(frozen=True)
class TfIdfModel:
    document_count: int
    document_frequency: Mapping[str, int] = field(repr=False)
    _idf: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_idf", {t: self._smoothed(df) for t, df in self.document_frequency.items()})

    def _smoothed(self, df: int) -> float:
        # strictly positive, decreasing in df
        return math.log((1 + self.document_count) / (1 + df)) + 1.0

    def idf(self, token: str) -> float:
        v = self._idf.get(token)
        return self._smoothed(0) if v is None else v

    def score(self, token: str, document: Sequence[str] | Counter) -> float:
        counts = document if isinstance(document, Counter) else Counter(document)
        tf = counts.get(token, 0)
        return tf * self.idf(token) if tf else 0.0


def fit_tfidf(documents: Iterable[Sequence[str]]) -> TfIdfModel:
    df: Counter = Counter()
    n = 0
    for doc in documents:
        n += 1
        df.update(set(doc))
    if n == 0:
        raise ValueError("fit_tfidf needs at least one document")
    return TfIdfModel(n, dict(df))


def score(model: TfIdfModel, token: str, document: Sequence[str]) -> float:
    return model.score(token, document)


# ---------------------------------------------------------------------------
# sentences

_SENT_BREAK = re.compile(r"[.?!][ \t\r\f\v]+|[ \t\r\f\v]*\n\s*")


def sentence_spans(text: str) -> list[Span]:
    """Character spans of sentences. Breaks fall at newlines and after
    ``.``, ``?`` or ``!`` followed by whitespace; the delimiter stays with
    the preceding sentence and the whitespace belongs to neither."""
    spans = []
    start = 0
    for m in _SENT_BREAK.finditer(text):
        # a terminator belongs to the sentence it ends
        end = m.start() + 1 if text[m.start()] in ".?!" else m.start()
        if end > start:
            spans.append((start, end))
        start = m.end()
    if start < len(text):
        spans.append((start, len(text)))
    # leading/trailing whitespace inside a span (e.g. text starting with spaces)
    out = []
    for s, e in spans:
        if text[s].isspace() or text[e - 1].isspace():
            chunk = text[s:e]
            s += len(chunk) - len(chunk.lstrip())
            e -= len(chunk) - len(chunk.rstrip())
            if e <= s:
                continue
        out.append((s, e))
    return out


def split_sentences(text: str) -> list[str]:
    return [text[s:e] for s, e in sentence_spans(text)]


def join_spans(text: str, spans: Sequence[Span]) -> str:
    """Rebuild text from a subset of sentence spans, keeping each kept
    sentence's original trailing separator (except after the last one)."""
    if not spans:
        return ""
    parts = []
    for i, (s, e) in enumerate(spans):
        parts.append(text[s:e])
        if i + 1 < len(spans):
            nxt = spans[i + 1][0]
            # separator that originally followed this sentence
            j = e
            while j < len(text) and text[j].isspace():
                j += 1
            sep = text[e:j] if j <= nxt else " "
            parts.append(sep or " ")
    return "".join(parts)


# ---------------------------------------------------------------------------
# distribution statistics


@dataclass(frozen=True)
class DistributionStats:
    n: int
    avg_length_words: float
    term_pct: float
    biased_pct: float

    def __post_init__(self):
        if self.avg_length_words < 0:
            raise ValueError("average length must be non-negative")
        for v in (self.term_pct, self.biased_pct):
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"percentage {v} outside [0, 100]")


@dataclass
class BinStats:
    """Per-group averages plus vocabulary and term-set overlap between the
    first two groups (in sorted order)."""

    groups: dict[str, DistributionStats]
    vocab_jaccard: float | None = None
    vocab_familiarity: float | None = None
    terms_jaccard: float | None = None
    terms_familiarity: float | None = None
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "groups": {k: vars(v) for k, v in self.groups.items()},
            "vocab_jaccard": self.vocab_jaccard,
            "vocab_familiarity": self.vocab_familiarity,
            "terms_jaccard": self.terms_jaccard,
            "terms_familiarity": self.terms_familiarity,
            "flags": self.flags,
        }

    def table(self, bin_label: str = "") -> str:
        keys = sorted(self.groups)
        rows = [["bin", "group", "n", "Av length", "Av terms, %", "Av biased, %"]]
        for k in keys:
            g = self.groups[k]
            rows.append([bin_label, k, str(g.n), f"{g.avg_length_words:.0f}",
                         f"{g.term_pct:.1f}", f"{g.biased_pct:.1f}"])

        def f(x):
            return "n/a" if x is None else f"{x:.2f}"

        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
        lines.append(f"vocab Jaccard {f(self.vocab_jaccard)}  Familiarity {f(self.vocab_familiarity)}")
        lines.append(f"terms Jaccard {f(self.terms_jaccard)}  Familiarity {f(self.terms_familiarity)}")
        lines.extend(f"flag: {x}" for x in self.flags)
        return "\n".join(lines) + "\n"


def _overlap(a: set, b: set, what: str, flags: list[str]) -> tuple[float | None, float | None]:
    if not a and not b:
        flags.append(f"{what}: both vocabularies empty")
        return None, None
    j = jaccard(a, b)
    fam = familiarity(a, b)
    if fam is None:
        flags.append(f"{what}: identical vocabularies, familiarity undefined")
    return j, fam


def bin_stats(
    groups: Mapping[str, Sequence[str]],
    terms: TermLexicon | None = None,
    gender: GenderLexicon | None = None,
    stopwords: Iterable[str] | None = None,
    expected_groups: Iterable[str] = (),
) -> BinStats:
    """Statistics over concatenated patient documents grouped by an
    attribute value. Term share is per document then averaged; overlap
    indices use vocabularies pooled over each group's members."""
    terms = terms if terms is not None else default_term_lexicon()
    gender = gender if gender is not None else GenderLexicon()
    flags: list[str] = []
    stats: dict[str, DistributionStats] = {}
    vocabs: dict[str, set] = {}
    term_sets: dict[str, set] = {}
    for key in sorted(set(groups) | set(expected_groups)):
        docs = groups.get(key, ())
        if not docs:
            flags.append(f"group {key!r} has no members; omitted")
            continue
        lengths, tpct, bpct = [], [], []
        vocab: set = set()
        tset: set = set()
        for text in docs:
            toks = tokenize(text, stopwords)
            lengths.append(word_count(text))
            tpct.append(term_percentage(toks, terms))
            bpct.append(biased_word_percentage(text, gender))
            vocab.update(toks)
            tset.update(" ".join(toks[i:j]) for i, j in terms.matches(toks))
        n = len(docs)
        stats[key] = DistributionStats(n, sum(lengths) / n, sum(tpct) / n, sum(bpct) / n)
        vocabs[key] = vocab
        term_sets[key] = tset
    out = BinStats(stats, flags=flags)
    present = sorted(stats)
    if len(present) >= 2:
        a, b = present[:2]
        out.vocab_jaccard, out.vocab_familiarity = _overlap(vocabs[a], vocabs[b], "vocab", flags)
        out.terms_jaccard, out.terms_familiarity = _overlap(term_sets[a], term_sets[b], "terms", flags)
    else:
        flags.append("fewer than two groups; overlap indices undefined")
    return out


def group_texts(documents: Iterable, attribute: str) -> dict[str, list[str]]:
    """Group objects carrying ``.text`` by an attribute such as ``sex``."""
    out: dict[str, list[str]] = {}
    for d in documents:
        out.setdefault(getattr(d, attribute), []).append(d.text)
    return out
