"""Note, patient and diagnosis ingestion plus per-timeline cleaning
(note-type filtering, near-duplicate removal, most-recent truncation)."""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .lexical import tokenize

log = logging.getLogger(__name__)

VOCABULARIES = ("ICD9CM", "ICD10CM")
SEXES = ("M", "F")


@dataclass(frozen=True)
class RawNote:
    patient_id: str
    note_id: str
    note_type: str
    timestamp: datetime
    text: str

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "note_id": self.note_id,
            "note_type": self.note_type,
            "timestamp": format_timestamp(self.timestamp),
            "text": self.text,
        }


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    sex: str
    race: str
    birth_date: date

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "sex": self.sex,
            "race": self.race,
            "birth_date": self.birth_date.isoformat(),
        }


@dataclass(frozen=True)
class DiagnosisEvent:
    patient_id: str
    code: str
    vocabulary: str
    date: date

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "code": self.code,
            "vocabulary": self.vocabulary,
            "date": self.date.isoformat(),
        }


@dataclass(frozen=True)
class PatientTimeline:
    patient: PatientRecord
    notes: tuple[RawNote, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(sorted(self.notes, key=note_order)))
        for n in self.notes:
            if n.patient_id != self.patient.patient_id:
                raise ValueError(
                    f"note {n.note_id} belongs to {n.patient_id}, "
                    f"not {self.patient.patient_id}"
                )

    @property
    def patient_id(self) -> str:
        return self.patient.patient_id

    def replace_notes(self, notes: Iterable[RawNote]) -> "PatientTimeline":
        return PatientTimeline(self.patient, tuple(notes))

    def __len__(self) -> int:
        return len(self.notes)


def note_order(note: RawNote):
    return (note.timestamp, note.note_id)


@dataclass
class LoadResult:
    records: list
    warnings: list[str] = field(default_factory=list)
    skipped: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------------------
# parsing


def parse_timestamp(value: str) -> datetime:
    """ISO 8601 date-time; naive values are taken as UTC."""
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {value!r}")
    v = value.strip()
    if v.endswith("Z"):
        v = v[:-1] + "+00:00"
    ts = datetime.fromisoformat(v)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_date(value: str) -> date:
    if not isinstance(value, str):
        raise ValueError(f"date must be a string, got {value!r}")
    return date.fromisoformat(value.strip())


def date_start(d: date) -> datetime:
    """Midnight UTC at the start of ``d``."""
    return datetime(d.year, d.month, d.day, tzinfo=timezone.utc)


def _require_str(obj: dict, key: str, allow_empty: bool = False) -> str:
    if key not in obj:
        raise ValueError(f"missing field {key!r}")
    val = obj[key]
    if not isinstance(val, str):
        raise ValueError(f"field {key!r} must be a string")
    if not allow_empty and not val.strip():
        raise ValueError(f"field {key!r} is empty")
    return val


def _note_from_obj(obj: dict) -> RawNote:
    return RawNote(
        patient_id=_require_str(obj, "patient_id"),
        note_id=_require_str(obj, "note_id"),
        note_type=_require_str(obj, "note_type").strip(),
        timestamp=parse_timestamp(_require_str(obj, "timestamp")),
        text=_require_str(obj, "text", allow_empty=True),
    )


def _patient_from_obj(obj: dict) -> PatientRecord:
    sex = _require_str(obj, "sex")
    if sex not in SEXES:
        raise ValueError(f"sex must be one of {SEXES}, got {sex!r}")
    return PatientRecord(
        patient_id=_require_str(obj, "patient_id"),
        sex=sex,
        race=_require_str(obj, "race"),
        birth_date=parse_date(_require_str(obj, "birth_date")),
    )


def _diagnosis_from_obj(obj: dict) -> DiagnosisEvent:
    vocab = _require_str(obj, "vocabulary")
    if vocab not in VOCABULARIES:
        raise ValueError(f"vocabulary must be one of {VOCABULARIES}, got {vocab!r}")
    return DiagnosisEvent(
        patient_id=_require_str(obj, "patient_id"),
        code=_require_str(obj, "code").strip(),
        vocabulary=vocab,
        date=parse_date(_require_str(obj, "date")),
    )


def _read_jsonl(path, parse: Callable[[dict], object], key: Callable | None = None) -> LoadResult:
    result = LoadResult([])
    seen = set()
    # unreadable file propagates (OSError) as fatal
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
                rec = parse(obj)
            except (ValueError, TypeError) as exc:
                result.warnings.append(f"{path}:{lineno}: {exc}")
                result.skipped += 1
                continue
            if key is not None:
                k = key(rec)
                if k in seen:
                    result.warnings.append(f"{path}:{lineno}: duplicate id {k!r}")
                    result.skipped += 1
                    continue
                seen.add(k)
            result.records.append(rec)
    for w in result.warnings:
        log.warning(w)
    return result


def ingest_notes(path) -> LoadResult:
    res = _read_jsonl(path, _note_from_obj, key=lambda n: n.note_id)
    for n in res.records:
        if not n.text.strip():
            res.warnings.append(f"{path}: note {n.note_id} has empty text")
    return res


def ingest_patients(path) -> LoadResult:
    return _read_jsonl(path, _patient_from_obj, key=lambda p: p.patient_id)


def ingest_diagnoses(path) -> LoadResult:
    return _read_jsonl(path, _diagnosis_from_obj)


def write_jsonl(path, records: Iterable) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = rec.to_json() if hasattr(rec, "to_json") else rec
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def build_timelines(
    patients: Iterable[PatientRecord], notes: Iterable[RawNote]
) -> dict[str, PatientTimeline]:
    """Group notes by patient. Notes of unknown patients are dropped with a
    warning; patients without notes get an empty timeline."""
    by_patient: dict[str, list[RawNote]] = {}
    pats = {p.patient_id: p for p in patients}
    for n in notes:
        if n.patient_id not in pats:
            log.warning("note %s references unknown patient %s", n.note_id, n.patient_id)
            continue
        by_patient.setdefault(n.patient_id, []).append(n)
    return {
        pid: PatientTimeline(p, tuple(by_patient.get(pid, ())))
        for pid, p in sorted(pats.items())
    }


# ---------------------------------------------------------------------------
# cleaning


def filter_note_types(notes: Iterable[RawNote], allowed: Iterable[str]) -> list[RawNote]:
    allowed = {a.strip() for a in allowed}
    if not allowed:
        raise ValueError("allowed note types must be non-empty")
    return [n for n in notes if n.note_type.strip() in allowed]


def count_vector(text: str, stopwords=None) -> Counter:
    return Counter(tokenize(text, stopwords))


def _norm(v: Mapping[str, int]) -> float:
    return math.sqrt(sum(x * x for x in v.values()))


def _dot(a: Mapping[str, int], b: Mapping[str, int]) -> int:
    return sum(a[k] * b[k] for k in a.keys() & b.keys())


def cosine(a: Mapping[str, int], b: Mapping[str, int]) -> float:
    if not a or not b:
        raise ValueError("cosine is undefined for an empty vector")
    return _dot(a, b) / (_norm(a) * _norm(b))


def _exact_square(threshold: float) -> tuple[int, int]:
    """``threshold**2`` as an exact fraction of its decimal spelling, so
    0.8 means 4/5 rather than the nearest binary float."""
    f = Fraction(repr(threshold)) ** 2
    return f.numerator, f.denominator


def _dedup(notes: Sequence[RawNote], threshold: float, stopwords) -> tuple[list[RawNote], list[str]]:
    # cos >= t  <=>  dot^2 >= t^2 |a|^2 |b|^2, all integers for count vectors
    p, q = _exact_square(threshold)
    kept: list[RawNote] = []
    kept_vecs: list[tuple[Counter, int]] = []
    flagged: list[str] = []
    for note in sorted(notes, key=note_order):
        vec = count_vector(note.text, stopwords)
        if not vec:
            flagged.append(note.note_id)
            kept.append(note)
            continue
        sq = sum(x * x for x in vec.values())
        if any(q * _dot(vec, other) ** 2 >= p * sq * osq for other, osq in kept_vecs):
            continue
        kept.append(note)
        kept_vecs.append((vec, sq))
    return kept, flagged


def dedup_notes(
    timeline: PatientTimeline, threshold: float = 0.8, stopwords=None
) -> PatientTimeline:
    """Drop each note whose count-vector cosine against an already retained
    note is >= ``threshold``. Scanning is in time order, so the earliest
    copy survives. Notes with no tokens after cleaning are kept unchecked."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    kept, flagged = _dedup(timeline.notes, threshold, stopwords)
    for nid in flagged:
        log.info("note %s has no tokens after cleaning; kept without comparison", nid)
    return timeline.replace_notes(kept)


def dedup_global(
    timelines: Mapping[str, PatientTimeline], threshold: float = 0.8, stopwords=None
) -> dict[str, PatientTimeline]:
    """Corpus-wide variant: a note is compared against retained notes of
    every patient."""
    every = [n for t in timelines.values() for n in t.notes]
    kept, _ = _dedup(every, threshold, stopwords)
    keep_ids = {n.note_id for n in kept}
    return {
        pid: t.replace_notes(n for n in t.notes if n.note_id in keep_ids)
        for pid, t in timelines.items()
    }


def select_recent(timeline: PatientTimeline, k: int = 25) -> PatientTimeline:
    """Keep the ``k`` latest notes; ties at the cutoff keep higher note ids."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(timeline.notes) <= k:
        return timeline
    return timeline.replace_notes(timeline.notes[-k:])


def truncate_history(timeline: PatientTimeline, cutoff: date | datetime) -> PatientTimeline:
    """Notes strictly before ``cutoff`` (a date means midnight UTC)."""
    if not isinstance(cutoff, datetime):
        cutoff = date_start(cutoff)
    return timeline.replace_notes(n for n in timeline.notes if n.timestamp < cutoff)


@dataclass(frozen=True)
class CleaningConfig:
    note_types: tuple[str, ...] = ("Progress Notes", "Telephone Encounters")
    dedup_threshold: float = 0.8
    recent_k: int = 25


def clean_timeline(
    timeline: PatientTimeline,
    config: CleaningConfig,
    cutoff: date | None = None,
    stopwords=None,
) -> PatientTimeline:
    """filter -> dedup -> truncate -> select_recent for one patient."""
    t = timeline.replace_notes(filter_note_types(timeline.notes, config.note_types))
    t = dedup_notes(t, config.dedup_threshold, stopwords)
    if cutoff is not None:
        t = truncate_history(t, cutoff)
    return select_recent(t, config.recent_k)


def map_timelines(fn, timelines: Sequence, threads: int = 1) -> list:
    """Order-preserving map; results do not depend on ``threads``."""
    if threads <= 1:
        return [fn(t) for t in timelines]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, timelines))


NOTE_SEPARATOR = "\n\n"


def concat_notes(timeline: PatientTimeline) -> str:
    """Patient document: non-empty note texts in time order, separated by a
    blank line. Blank lines inside a note are collapsed so the separator
    stays unambiguous."""
    parts = []
    for n in timeline.notes:
        text = n.text.strip()
        if not text:
            continue
        parts.append("\n".join(ln for ln in text.splitlines() if ln.strip()))
    return NOTE_SEPARATOR.join(parts)
