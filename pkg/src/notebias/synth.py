"""Synthetic patients, notes and diagnoses with controllable demographic
differences in the text."""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import date, datetime, timedelta, timezone
from typing import Mapping, Sequence

import numpy as np

from .cohort import CodeSet, load_codeset
from .corpus import (
    CleaningConfig,
    DiagnosisEvent,
    PatientRecord,
    RawNote,
    build_timelines,
    concat_notes,
    dedup_notes,
    filter_note_types,
    truncate_history,
)
from .lexical import PRONOUNS, default_stopwords, default_term_lexicon, word_count

SIGNAL_TERMS = (
    "anxiety", "anxious", "worry", "worries", "worried", "panic", "nervous",
    "fearful", "phobia", "avoidance", "restlessness", "irritability", "insomnia",
    "palpitations", "stomachache", "tearful", "separation", "reassurance", "rumination",
)

MALE_NAMES = (
    "james john robert michael william david richard joseph thomas charles "
    "christopher daniel matthew anthony steven paul andrew joshua kevin brian "
    "george edward ryan jacob eric jonathan justin brandon benjamin samuel "
    "nathan ethan noah tyler aaron adam henry zachary kyle dylan logan liam "
    "mason lucas oliver caleb owen isaac wyatt levi isaiah eli"
).split()
FEMALE_NAMES = (
    "mary patricia jennifer linda elizabeth susan jessica sarah karen nancy "
    "lisa ashley emily michelle amanda melissa stephanie rebecca laura amy "
    "angela anna nicole emma samantha katherine rachel hannah olivia megan "
    "victoria madison abigail sophia natalie charlotte chloe ella avery lily "
    "zoe nora leah stella hazel audrey claire lucy ruby"
).split()
MALE_PRONOUNS = ("he", "him", "his")
FEMALE_PRONOUNS = ("she", "her", "hers")

KEPT_TYPES = ("Progress Notes", "Telephone Encounters")
OTHER_TYPES = ("Patient Instructions", "Plan of Care Note")
NON_ANXIETY_CODES = (("ICD10CM", "Z00.129"), ("ICD10CM", "J06.9"), ("ICD9CM", "V20.2"))

_SYLLABLES = (
    "ba be bi bo bu da de di do du fa fe fi fo ga ge go ka ke ki ko la le li lo "
    "lu ma me mi mo mu na ne ni no nu pa pe pi po ra re ri ro ru sa se si so su "
    "ta te ti to tu va ve vi vo za ze zo"
).split()
_CODAS = ("", "n", "r", "l", "s", "m", "t", "x")


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SexProfile:
    """Text properties of one sex.

    ``signal_density`` is the share of words in a case document that are
    diagnosis-signal terms. ``lowinfo_fraction`` is the mean share of words
    that sit in sentences made only of function words; signal words live in
    the other sentences. With ``lowinfo_concentration`` > 0 each patient
    draws their own share from a Beta distribution with that mean and
    concentration.
    """

    length_mean: float = 4000.0
    length_sd: float = 1000.0
    signal_density: float = 0.01
    lowinfo_fraction: float = 0.1
    lowinfo_concentration: float = 0.0

    def draw_lowinfo(self, rng: np.random.Generator) -> float:
        mu, k = self.lowinfo_fraction, self.lowinfo_concentration
        if k <= 0 or mu == 0:
            return mu
        return float(rng.beta(mu * k, (1 - mu) * k))


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 2000
    female_ratio: float = 0.5
    other_race_ratio: float = 0.3
    case_ratio: float = 0.5
    bin: int = 5
    male: SexProfile = SexProfile()
    female: SexProfile = SexProfile()
    # controls carry signal words at this fraction of the case density
    control_signal_ratio: float = 0.5
    biased_rate: float = 0.03
    name_share: float = 0.5
    # extra pronoun rate in case documents, for planted-correlation tests
    pronoun_case_boost: float = 0.0
    term_rate: float = 0.21
    stopword_share: float = 0.4
    shared_filler: int = 600
    sex_filler: int = 500
    divergence: float = 0.3
    notes_per_patient: tuple[int, int] = (6, 20)
    sentence_length: tuple[int, int] = (6, 16)
    lowinfo_sentence_length: tuple[int, int] = (6, 16)
    duplicate_rate: float = 0.15
    extra_type_notes: int = 2
    post_index_notes: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("female_ratio", "other_race_ratio", "case_ratio", "control_signal_ratio",
                     "biased_rate", "name_share", "term_rate", "stopword_share",
                     "divergence", "duplicate_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthError(f"{name} must lie in [0, 1], got {v}")
        if self.case_ratio != 0.5:
            raise SynthError("case_ratio is fixed at 0.5 (1:1 matched design)")
        if self.n_patients < 0:
            raise SynthError("n_patients must be >= 0")
        for prof in (self.male, self.female):
            if prof.length_mean <= 0 or prof.length_sd < 0:
                raise SynthError("lengths must be positive")
            if not 0 <= prof.lowinfo_fraction < 1:
                raise SynthError("lowinfo_fraction must lie in [0, 1)")
            if prof.lowinfo_concentration < 0:
                raise SynthError("lowinfo_concentration must be >= 0")
            if not 0 <= prof.signal_density <= 1:
                raise SynthError("signal density must lie in [0, 1]")
            self.slot_probabilities(prof, case=True)
        lo, hi = self.notes_per_patient
        if not 1 <= lo <= hi:
            raise SynthError("notes_per_patient must satisfy 1 <= lo <= hi")

    def profile(self, sex: str) -> SexProfile:
        return self.male if sex == "M" else self.female

    def slot_probabilities(self, prof: SexProfile, case: bool) -> dict[str, float]:
        """Per-word category probabilities inside informative sentences.

        Chosen so that, over a whole document, pronouns + names make up
        ``biased_rate`` of all words, signal words make up the profile's
        density, and lexicon terms (signal included) make up ``term_rate``
        of non-stopword tokens. Signal words take the place of function
        words, so a case document has slightly fewer stopwords.
        """
        inf = 1.0 - prof.lowinfo_fraction
        pron = self.biased_rate * (1 - self.name_share)
        name = self.biased_rate * self.name_share / inf
        if case:
            pron *= 1.0 + self.pronoun_case_boost
        rest = 1.0 - pron - name
        if rest <= 0:
            raise SynthError("biased_rate too high")
        density = prof.signal_density * (1.0 if case else self.control_signal_ratio)
        signal = density / inf
        stop = rest * self.stopword_share - signal
        content = rest * (1 - self.stopword_share)
        # term budget from the case rate, so terms do not track the label
        case_signal = prof.signal_density / inf
        term = self.term_rate * (content + name + case_signal) - case_signal
        if stop < 0 or term < 0:
            raise SynthError(
                f"infeasible config: signal density {density} exceeds the stopword or term budget"
            )
        filler = content - term
        return {"pronoun": pron, "name": name, "stop": stop, "signal": signal,
                "term": term, "filler": filler}


PRESETS: dict[str, SynthConfig] = {}


def _table5_preset(bin_, m_len, f_len, female_ratio, sex_filler, female_density_ratio=0.7) -> SynthConfig:
    male = SexProfile(m_len, 0.3 * m_len, 0.012, 0.0)
    # female dilution: same signal rate inside informative sentences, plus
    # long function-word sentences, so overall density is the given ratio
    f_lowinfo = 1 - female_density_ratio * (1 - male.lowinfo_fraction)
    female = SexProfile(f_len, 0.3 * f_len, female_density_ratio * male.signal_density,
                        f_lowinfo, lowinfo_concentration=8.0)
    return SynthConfig(n_patients=4188, female_ratio=female_ratio, other_race_ratio=0.3,
                       bin=bin_, male=male, female=female,
                       divergence=0.03, sentence_length=(6, 14),
                       lowinfo_sentence_length=(20, 30), sex_filler=sex_filler)


# every filler word is observed at corpus scale, so the pooled vocabulary
# Jaccard between sexes is set by the sex-specific filler sizes; these give
# 0.44, 0.51, 0.59, 0.74 and 0.42
for _b, _m, _f, _fr, _x in ((5, 4139, 3443, 0.36, 463), (8, 4465, 3710, 0.40, 337),
                            (10, 4281, 3549, 0.44, 229), (12, 4061, 3556, 0.55, 89),
                            (15, 3935, 3908, 0.69, 507)):
    PRESETS[f"table5-bin{_b}"] = _table5_preset(_b, _m, _f, _fr, _x)

PRESETS["unbiased"] = replace(
    PRESETS["table5-bin5"],
    female_ratio=0.5,
    female=PRESETS["table5-bin5"].male,
)
PRESETS["planted-pronoun"] = replace(
    PRESETS["unbiased"], pronoun_case_boost=4.0, n_patients=600,
)


def preset(name: str, **overrides) -> SynthConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise SynthError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base


# ---------------------------------------------------------------------------
# vocabulary


def _pseudo_words(n: int, rng: np.random.Generator, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        k = int(rng.integers(2, 4))
        w = "".join(_SYLLABLES[i] for i in rng.integers(0, len(_SYLLABLES), k))
        w += _CODAS[int(rng.integers(0, len(_CODAS)))]
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


@dataclass
class Vocab:
    stop: np.ndarray
    stop_p: np.ndarray
    terms: np.ndarray
    signal: np.ndarray
    filler_shared: np.ndarray
    filler_sex: dict[str, np.ndarray]
    names: dict[str, np.ndarray]
    pronouns: dict[str, np.ndarray]


def _zipf(n: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def build_vocab(config: SynthConfig) -> Vocab:
    rng = np.random.default_rng(12345)  # vocabulary is fixed across seeds
    gendered = set(PRONOUNS) | {"himself", "herself", "she's"}
    stop = [w for w in sorted(default_stopwords()) if w not in gendered and "'" not in w and len(w) > 1]
    lex = default_term_lexicon()
    terms = sorted(e[0] for e in lex.entries if len(e) == 1 and e[0] not in SIGNAL_TERMS)
    taken = set(default_stopwords()) | lex.words | set(MALE_NAMES) | set(FEMALE_NAMES)
    shared = _pseudo_words(config.shared_filler, rng, taken)
    m_fill = _pseudo_words(config.sex_filler, rng, taken)
    f_fill = _pseudo_words(config.sex_filler, rng, taken)
    stop_order = rng.permutation(len(stop))
    return Vocab(
        stop=np.array(stop, dtype=object)[stop_order],
        stop_p=_zipf(len(stop), 0.8),
        terms=np.array(terms, dtype=object),
        signal=np.array(SIGNAL_TERMS, dtype=object),
        filler_shared=np.array(shared, dtype=object),
        filler_sex={"M": np.array(m_fill, dtype=object), "F": np.array(f_fill, dtype=object)},
        names={"M": np.array([n.capitalize() for n in MALE_NAMES], dtype=object),
               "F": np.array([n.capitalize() for n in FEMALE_NAMES], dtype=object)},
        pronouns={"M": np.array(MALE_PRONOUNS, dtype=object),
                  "F": np.array(FEMALE_PRONOUNS, dtype=object)},
    )


# ---------------------------------------------------------------------------
# text


def _words(n: int, kind: np.ndarray, sex: str, vocab: Vocab, config: SynthConfig,
           rng: np.random.Generator) -> np.ndarray:
    out = np.empty(n, dtype=object)
    for code, pick in (
        (0, lambda k: rng.choice(vocab.stop, size=k, p=vocab.stop_p)),
        (1, lambda k: vocab.pronouns[sex][rng.integers(0, 3, k)]),
        (2, lambda k: vocab.names[sex][rng.integers(0, len(vocab.names[sex]), k)]),
        (3, lambda k: vocab.signal[rng.integers(0, len(vocab.signal), k)]),
        (4, lambda k: vocab.terms[rng.integers(0, len(vocab.terms), k)]),
    ):
        mask = kind == code
        k = int(mask.sum())
        if k:
            out[mask] = pick(k)
    mask = kind == 5
    k = int(mask.sum())
    if k:
        own = rng.random(k) < config.divergence
        words = np.empty(k, dtype=object)
        n_own = int(own.sum())
        if n_own:
            fs = vocab.filler_sex[sex]
            words[own] = fs[rng.integers(0, len(fs), n_own)]
        if k - n_own:
            fsh = vocab.filler_shared
            words[~own] = fsh[rng.integers(0, len(fsh), k - n_own)]
        out[mask] = words
    return out


def generate_text(n_words: int, sex: str, case: bool, config: SynthConfig, vocab: Vocab,
                  rng: np.random.Generator, lowinfo: float | None = None) -> tuple[list[str], int]:
    """Sentences totalling ``n_words`` words. Returns the sentences and the
    number of signal words placed. ``lowinfo`` overrides the profile's mean
    share of words in function-word sentences; the signal rate per informative
    sentence stays fixed, so document-level density scales with it."""
    if n_words <= 0:
        return [], 0
    prof = config.profile(sex)
    probs = config.slot_probabilities(prof, case)
    if lowinfo is None:
        lowinfo = prof.lowinfo_fraction
    p_inf = np.array([probs[c] for c in ("stop", "pronoun", "name", "signal", "term", "filler")])
    p_inf = p_inf / p_inf.sum()
    lo, hi = config.sentence_length
    llo, lhi = config.lowinfo_sentence_length
    # sentence-level probability giving the requested word share
    a, b = (llo + lhi) / 2, (lo + hi) / 2
    q = lowinfo * b / (a * (1 - lowinfo) + lowinfo * b) if lowinfo > 0 else 0.0
    n_max = n_words // min(lo, llo) + 1
    is_low = rng.random(n_max) < q
    lengths = np.where(is_low, rng.integers(llo, lhi + 1, n_max), rng.integers(lo, hi + 1, n_max))
    ends = np.cumsum(lengths)
    k = int(np.searchsorted(ends, n_words)) + 1
    ends = ends[:k]
    ends[-1] = n_words
    is_low = is_low[:k]
    starts = np.concatenate(([0], ends[:-1]))
    slot_low = np.repeat(is_low, ends - starts)
    kind = rng.choice(6, size=n_words, p=p_inf)
    low_kind = np.where(rng.random(n_words) < probs["pronoun"], 1, 0)
    kind[slot_low] = low_kind[slot_low]
    words = _words(n_words, kind, sex, vocab, config, rng)
    sentences = []
    for s, e in zip(starts.tolist(), ends.tolist()):
        first = words[s]
        sentences.append(first[0].upper() + first[1:] + (" " if e - s > 1 else "")
                         + " ".join(words[s + 1:e]) + ".")
    return sentences, int((kind == 3).sum())


def _split_words(total: int, k: int, rng: np.random.Generator) -> list[int]:
    shares = rng.dirichlet(np.full(k, 4.0))
    sizes = np.maximum(np.floor(shares * total).astype(int), 1)
    sizes[-1] = max(total - int(sizes[:-1].sum()), 1)
    return [int(s) for s in sizes]


# ---------------------------------------------------------------------------
# corpus


@dataclass(frozen=True)
class TruthRecord:
    patient_id: str
    label: str
    sex: str
    race: str
    index_date: date
    signal_count: int
    document_words: int

    def to_json(self) -> dict:
        d = asdict(self)
        d["index_date"] = self.index_date.isoformat()
        return d


@dataclass
class SynthCorpus:
    patients: list[PatientRecord]
    notes: list[RawNote]
    diagnoses: list[DiagnosisEvent]
    truth: list[TruthRecord]
    config: SynthConfig


def patient_seed(seed: int, index: int) -> int:
    h = hashlib.sha256(f"synth:{seed}:{index}".encode()).digest()
    return int.from_bytes(h[:8], "big")


def _ts(d: date, rng: np.random.Generator) -> datetime:
    return datetime(d.year, d.month, d.day, tzinfo=timezone.utc) + timedelta(
        minutes=int(rng.integers(8 * 60, 18 * 60))
    )


def _make_notes(pid: str, sex: str, case: bool, index: date, config: SynthConfig, vocab: Vocab,
                rng: np.random.Generator) -> tuple[list[RawNote], int, int]:
    prof = config.profile(sex)
    total = max(int(round(rng.normal(prof.length_mean, prof.length_sd))), 50)
    lo, hi = config.notes_per_patient
    k = int(rng.integers(lo, hi + 1))
    sizes = _split_words(total, k, rng)
    # days before index, distinct, inside the 18-month encounter window
    offsets = np.sort(rng.choice(np.arange(1, 540), size=k, replace=False))[::-1]
    notes: list[RawNote] = []
    seq = 0

    def note(ts, ntype, text):
        nonlocal seq
        seq += 1
        return RawNote(pid, f"{pid}-N{seq:03d}", ntype, ts, text)

    sents, n_signal = generate_text(total, sex, case, config, vocab, rng, prof.draw_lowinfo(rng))
    # cut the sentence stream into notes near the target sizes
    bounds = np.cumsum(sizes)[:-1]
    sent_ends = np.cumsum([s.count(" ") + 1 for s in sents])
    cuts = [0, *np.searchsorted(sent_ends, bounds, side="left") + 1, len(sents)]
    for off, a, b in zip(offsets, cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        ntype = KEPT_TYPES[int(rng.random() < 0.3)]
        day = index - timedelta(days=int(off))
        notes.append(note(_ts(day, rng), ntype, " ".join(sents[a:b])))

    # copy-forward duplicates land after their source, still before index
    for src in list(notes):
        if rng.random() < config.duplicate_rate:
            gap = (index - src.timestamp.date()).days
            if gap > 1:
                day = src.timestamp.date() + timedelta(days=int(rng.integers(1, gap)))
                notes.append(note(_ts(day, rng), src.note_type, src.text))
    for _ in range(config.extra_type_notes):
        sents, _ = generate_text(60, sex, case, config, vocab, rng)
        day = index - timedelta(days=int(rng.integers(1, 540)))
        notes.append(note(_ts(day, rng), OTHER_TYPES[int(rng.integers(0, 2))], " ".join(sents)))
    for _ in range(config.post_index_notes):
        sents, _ = generate_text(80, sex, case, config, vocab, rng)
        day = index + timedelta(days=int(rng.integers(0, 200)))
        notes.append(note(_ts(day, rng), KEPT_TYPES[0], " ".join(sents)))
    return notes, n_signal, total


def _birth_for_age(index: date, age: int, rng: np.random.Generator) -> date:
    # birthday strictly inside (index - (age+1) years, index - age years]
    latest = date(index.year - age, index.month, min(index.day, 28))
    return latest - timedelta(days=int(rng.integers(0, 360)))


def generate(config: SynthConfig) -> SynthCorpus:
    """Deterministic under ``config.seed``. Patients come in case/control
    pairs: same sex, births within 30 days, controls with no anxiety code
    before the case's index date."""
    vocab = build_vocab(config)
    codes = sorted(load_codeset().entries)
    n_pairs = config.n_patients // 2
    patients, notes, dx, truth = [], [], [], []
    base = date(2016, 1, 1)
    for i in range(n_pairs):
        rng = np.random.default_rng(patient_seed(config.seed, i))
        sex = "F" if rng.random() < config.female_ratio else "M"
        index = base + timedelta(days=int(rng.integers(0, 5 * 365)))
        case_birth = _birth_for_age(index, config.bin, rng)
        ctrl_birth = case_birth + timedelta(days=int(rng.integers(-30, 31)))
        for role, birth in (("case", case_birth), ("control", ctrl_birth)):
            pid = f"P{2 * i + (role == 'control'):06d}"
            race = "Other" if rng.random() < config.other_race_ratio else "White"
            patients.append(PatientRecord(pid, sex, race, birth))
            pnotes, n_sig, words = _make_notes(pid, sex, role == "case", index, config, vocab, rng)
            notes.extend(pnotes)
            if role == "case":
                voc, code = codes[int(rng.integers(0, len(codes)))]
                dx.append(DiagnosisEvent(pid, code, voc, index))
                if rng.random() < 0.5:
                    voc, code = codes[int(rng.integers(0, len(codes)))]
                    dx.append(DiagnosisEvent(pid, code, voc, index + timedelta(days=int(rng.integers(30, 400)))))
            elif rng.random() < 0.1:
                # diagnosed long after the matched case: still a valid control
                voc, code = codes[int(rng.integers(0, len(codes)))]
                dx.append(DiagnosisEvent(pid, code, voc, index + timedelta(days=int(rng.integers(400, 800)))))
            if rng.random() < 0.3:
                voc, code = NON_ANXIETY_CODES[int(rng.integers(0, len(NON_ANXIETY_CODES)))]
                dx.append(DiagnosisEvent(pid, code, voc, index - timedelta(days=int(rng.integers(1, 500)))))
            truth.append(TruthRecord(pid, role, sex, race, index, n_sig, words))
    notes.sort(key=lambda n: (n.patient_id, n.timestamp, n.note_id))
    dx.sort(key=lambda d: (d.patient_id, d.date, d.vocabulary, d.code))
    return SynthCorpus(patients, notes, dx, truth, config)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.measured - self.expected) <= self.tolerance


@dataclass
class VerifyReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: measured {c.measured:.4f}, "
            f"expected {c.expected:.4f} +/- {c.tolerance:.4f}"
            for c in self.checks
        ]


@dataclass(frozen=True)
class Tolerances:
    sigma: float = 3.0
    # fixed overrides; None means derive from the sampling distribution
    female_ratio: float | None = None
    length: float | None = None
    biased_rate: float | None = None


def patient_documents(corpus: SynthCorpus, cleaning: CleaningConfig = CleaningConfig()) -> dict[str, str]:
    """Cleaned pre-index documents, the way the cohort pipeline sees them."""
    idx = {t.patient_id: t.index_date for t in corpus.truth}
    out = {}
    for pid, tl in build_timelines(corpus.patients, corpus.notes).items():
        tl = tl.replace_notes(filter_note_types(tl.notes, cleaning.note_types))
        tl = truncate_history(dedup_notes(tl, cleaning.dedup_threshold), idx[pid])
        out[pid] = concat_notes(tl)
    return out


def verify(corpus: SynthCorpus, config: SynthConfig | None = None,
           tolerances: Tolerances = Tolerances()) -> VerifyReport:
    """Compare measured corpus statistics with the config at ``sigma``
    standard errors."""
    from .debias import default_gender_lexicon
    from .lexical import biased_word_percentage

    config = config or corpus.config
    report = VerifyReport()
    n_pairs = len(corpus.truth) // 2
    if n_pairs == 0:
        return report
    z = tolerances.sigma
    fem_pairs = sum(1 for t in corpus.truth if t.label == "case" and t.sex == "F")
    p = config.female_ratio
    report.checks.append(Check(
        "female_ratio", p, fem_pairs / n_pairs,
        tolerances.female_ratio if tolerances.female_ratio is not None
        else z * math.sqrt(max(p * (1 - p), 1e-12) / n_pairs),
    ))
    docs = patient_documents(corpus)
    lex = default_gender_lexicon()
    for sex in ("M", "F"):
        members = [t.patient_id for t in corpus.truth if t.sex == sex]
        if not members:
            continue
        prof = config.profile(sex)
        lengths = [word_count(docs[pid]) for pid in members]
        report.checks.append(Check(
            f"length_mean_{sex}", prof.length_mean, float(np.mean(lengths)),
            tolerances.length if tolerances.length is not None
            else z * prof.length_sd / math.sqrt(len(members)) + 1.0,
        ))
    rates = [biased_word_percentage(docs[t.patient_id], lex) / 100 for t in corpus.truth]
    b = config.biased_rate * (1 + 0.5 * config.pronoun_case_boost * (1 - config.name_share))
    mean_len = max(np.mean([word_count(d) for d in docs.values()]), 1.0)
    report.checks.append(Check(
        "biased_rate", b, float(np.mean(rates)),
        tolerances.biased_rate if tolerances.biased_rate is not None
        else z * math.sqrt(b * (1 - b) / (len(rates) * mean_len)) + 0.002,
    ))
    return report


def write_corpus(corpus: SynthCorpus, directory) -> dict[str, int]:
    from pathlib import Path

    from .corpus import write_jsonl

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    return {
        "patients": write_jsonl(d / "patients.jsonl", corpus.patients),
        "notes": write_jsonl(d / "notes.jsonl", corpus.notes),
        "diagnoses": write_jsonl(d / "diagnoses.jsonl", corpus.diagnoses),
        "ground_truth": write_jsonl(d / "ground_truth.jsonl", corpus.truth),
    }
