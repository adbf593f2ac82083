"""Case definition, age binning, 1:1 control matching and bin assembly."""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from datetime import date, timedelta
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .corpus import (
    CleaningConfig,
    DiagnosisEvent,
    PatientRecord,
    PatientTimeline,
    clean_timeline,
    concat_notes,
    date_start,
    map_timelines,
)

log = logging.getLogger(__name__)

DEFAULT_BINS = (5, 8, 10, 12, 15)
CASE, CONTROL = "case", "control"


class CohortError(Exception):
    pass


# ---------------------------------------------------------------------------
# code sets


@dataclass(frozen=True)
class CodeSet:
    entries: frozenset[tuple[str, str]]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("code set must be non-empty")

    def __contains__(self, item) -> bool:
        if isinstance(item, DiagnosisEvent):
            item = (item.vocabulary, item.code)
        return item in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def parse_codeset(text: str) -> CodeSet:
    entries = set()
    for ln in text.splitlines():
        if not ln.strip() or ln.startswith("#"):
            continue
        parts = ln.split("\t")
        if len(parts) < 2:
            raise ValueError(f"bad code set line: {ln!r}")
        entries.add((parts[0].strip(), parts[1].strip()))
    return CodeSet(frozenset(entries))


def load_codeset(path=None) -> CodeSet:
    """``vocabulary<TAB>code<TAB>description`` lines; default is the shipped
    anxiety code list."""
    if path is None:
        text = resources.files("notebias.data").joinpath("anxiety_codes.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_codeset(text)


# ---------------------------------------------------------------------------
# dates


def age_in_years(birth: date, on: date) -> int:
    """Completed calendar years (birthday arithmetic). Feb 29 birthdays
    roll over on Mar 1 in non-leap years."""
    years = on.year - birth.year
    if (on.month, on.day) < (birth.month, birth.day):
        years -= 1
    return years


def months_to_days(months: int) -> int:
    return round(months * 365.25 / 12)


@dataclass(frozen=True)
class MatchCriteria:
    birth_window_days: int = 30
    same_sex: bool = True
    encounter_window_months: int = 18

    def __post_init__(self):
        if self.birth_window_days < 0:
            raise ValueError("birth_window_days must be >= 0")
        if self.encounter_window_months < 1:
            raise ValueError("encounter_window_months must be >= 1")

    @property
    def encounter_window_days(self) -> int:
        return months_to_days(self.encounter_window_months)


def has_encounter(timeline: PatientTimeline, cutoff: date, window_days: int) -> bool:
    """Any note in ``[cutoff - window_days, cutoff)``."""
    hi = date_start(cutoff)
    lo = hi - timedelta(days=window_days)
    return any(lo <= n.timestamp < hi for n in timeline.notes)


@dataclass(frozen=True)
class CaseDefinition:
    patient_id: str
    first_dx_date: date
    age_at_dx_years: int
    bin: int


def first_code_dates(diagnoses: Iterable[DiagnosisEvent], codes: CodeSet) -> dict[str, date]:
    first: dict[str, date] = {}
    for ev in diagnoses:
        if ev in codes:
            d = first.get(ev.patient_id)
            if d is None or ev.date < d:
                first[ev.patient_id] = ev.date
    return first


def find_cases(
    diagnoses: Iterable[DiagnosisEvent],
    patients: Mapping[str, PatientRecord],
    codes: CodeSet,
    timelines: Mapping[str, PatientTimeline],
    criteria: MatchCriteria = MatchCriteria(),
) -> list[CaseDefinition]:
    """One case per patient with a matching code and at least one note in the
    encounter window before the first such code."""
    cases = []
    for pid, dx in sorted(first_code_dates(diagnoses, codes).items()):
        pat = patients.get(pid)
        if pat is None:
            log.warning("diagnosis for unknown patient %s; excluded", pid)
            continue
        if dx < pat.birth_date:
            log.warning("patient %s diagnosed before birth; excluded", pid)
            continue
        tl = timelines.get(pid)
        if tl is None or not has_encounter(tl, dx, criteria.encounter_window_days):
            continue
        age = age_in_years(pat.birth_date, dx)
        cases.append(CaseDefinition(pid, dx, age, age))
    return cases


def assign_bin(case: CaseDefinition, bins: Iterable[int]) -> int | None:
    bins = set(bins)
    if not bins:
        raise ValueError("bins must be non-empty")
    if case.age_at_dx_years < 0:
        raise CohortError(f"case {case.patient_id}: diagnosis precedes birth")
    return case.age_at_dx_years if case.age_at_dx_years in bins else None


# ---------------------------------------------------------------------------
# matching


@dataclass
class CohortData:
    """Indexed corpus used for matching."""

    patients: dict[str, PatientRecord]
    timelines: dict[str, PatientTimeline]
    first_dx: dict[str, date]

    @classmethod
    def build(cls, patients, timelines, diagnoses, codes: CodeSet) -> "CohortData":
        pats = {p.patient_id: p for p in patients} if not isinstance(patients, dict) else dict(patients)
        return cls(pats, dict(timelines), first_code_dates(diagnoses, codes))


def control_eligible(
    case: CaseDefinition,
    candidate: PatientRecord,
    data: CohortData,
    criteria: MatchCriteria,
) -> bool:
    case_pat = data.patients[case.patient_id]
    if abs((candidate.birth_date - case_pat.birth_date).days) > criteria.birth_window_days:
        return False
    if criteria.same_sex and candidate.sex != case_pat.sex:
        return False
    dx = data.first_dx.get(candidate.patient_id)
    if dx is not None and dx <= case.first_dx_date:
        return False
    tl = data.timelines.get(candidate.patient_id)
    return tl is not None and has_encounter(
        tl, case.first_dx_date, criteria.encounter_window_days
    )


def match_control(
    case: CaseDefinition,
    candidate_pool: Iterable[str],
    data: CohortData,
    criteria: MatchCriteria,
    rng: random.Random,
) -> PatientRecord | None:
    """Uniform choice among eligible candidates (sorted by id first, so the
    draw depends only on the rng state)."""
    eligible = sorted(
        pid
        for pid in candidate_pool
        if pid != case.patient_id
        and control_eligible(case, data.patients[pid], data, criteria)
    )
    if not eligible:
        return None
    return data.patients[eligible[rng.randrange(len(eligible))]]


def bin_seed(seed: int, bin_: int) -> int:
    h = hashlib.sha256(f"{seed}:bin:{bin_}".encode()).digest()
    return int.from_bytes(h[:8], "big")


# ---------------------------------------------------------------------------
# bins


@dataclass(frozen=True)
class CohortMember:
    timeline: PatientTimeline
    label: str
    pair_id: str
    cutoff: date

    @property
    def patient(self) -> PatientRecord:
        return self.timeline.patient

    @property
    def patient_id(self) -> str:
        return self.timeline.patient_id

    def document(self) -> str:
        return concat_notes(self.timeline)


@dataclass
class CohortBin:
    bin: int
    members: list[CohortMember] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)

    @property
    def cases(self) -> list[CohortMember]:
        return [m for m in self.members if m.label == CASE]

    @property
    def controls(self) -> list[CohortMember]:
        return [m for m in self.members if m.label == CONTROL]

    def pairs(self) -> dict[str, tuple[CohortMember, CohortMember]]:
        out: dict[str, dict[str, CohortMember]] = {}
        for m in self.members:
            out.setdefault(m.pair_id, {})[m.label] = m
        return {k: (v[CASE], v[CONTROL]) for k, v in out.items()}


def build_bin(
    data: CohortData,
    bin_: int,
    cases: Sequence[CaseDefinition],
    criteria: MatchCriteria = MatchCriteria(),
    seed: int = 0,
    cleaning: CleaningConfig = CleaningConfig(),
    exclude: Iterable[str] = (),
    threads: int = 1,
) -> CohortBin:
    """Match every case of ``bin_`` to one control, then clean both
    timelines up to the case's first diagnosis. Pairs where either side ends
    with no notes, or where no control exists, are dropped."""
    bin_cases = sorted(
        (c for c in cases if assign_bin(c, {bin_}) == bin_),
        key=lambda c: (c.first_dx_date, c.patient_id),
    )
    used = set(exclude) | {c.patient_id for c in bin_cases}
    pool = sorted(pid for pid in data.patients if pid not in used)
    rng = random.Random(bin_seed(seed, bin_))
    result = CohortBin(bin_)

    pairs = []
    for case in bin_cases:
        ctrl = match_control(case, pool, data, criteria, rng)
        if ctrl is None:
            log.info("bin %s: no eligible control for case %s", bin_, case.patient_id)
            result.dropped.append(case.patient_id)
            continue
        pool.remove(ctrl.patient_id)
        pairs.append((case, ctrl))

    def process(pair):
        case, ctrl = pair
        return (
            clean_timeline(data.timelines[case.patient_id], cleaning, case.first_dx_date),
            clean_timeline(data.timelines[ctrl.patient_id], cleaning, case.first_dx_date),
        )

    cleaned = map_timelines(process, pairs, threads)
    for (case, ctrl), (case_tl, ctrl_tl) in zip(pairs, cleaned):
        if not case_tl.notes or not ctrl_tl.notes:
            result.dropped.append(case.patient_id)
            continue
        pair_id = f"{bin_}:{case.patient_id}"
        result.members.append(CohortMember(case_tl, CASE, pair_id, case.first_dx_date))
        result.members.append(CohortMember(ctrl_tl, CONTROL, pair_id, case.first_dx_date))

    if not result.members:
        raise CohortError(
            f"bin {bin_} is empty: {len(bin_cases)} cases, "
            f"{len(pairs)} matched, none survived cleaning"
        )
    return result


def build_cohort(
    data: CohortData,
    codes: CodeSet,
    diagnoses: Iterable[DiagnosisEvent],
    bins: Sequence[int] = DEFAULT_BINS,
    criteria: MatchCriteria = MatchCriteria(),
    seed: int = 0,
    cleaning: CleaningConfig = CleaningConfig(),
    threads: int = 1,
) -> dict[int, CohortBin]:
    """All bins, built in ascending order. Cases of any requested bin are
    never used as controls, and a control is used at most once overall."""
    cases = find_cases(diagnoses, data.patients, codes, data.timelines, criteria)
    reserved = {c.patient_id for c in cases if c.bin in set(bins)}
    used: set[str] = set()
    out = {}
    for b in sorted(bins):
        try:
            cb = build_bin(data, b, cases, criteria, seed, cleaning, reserved | used, threads)
        except CohortError as exc:
            log.warning("%s", exc)
            continue
        used |= {m.patient_id for m in cb.controls}
        out[b] = cb
    if not out:
        raise CohortError("no bin could be built")
    return out


# ---------------------------------------------------------------------------
# splits and document export


def split_pairs(cbin: CohortBin, train_fraction: float = 0.8, seed: int = 0) -> dict[str, str]:
    """Seeded split by matched pair: patient_id -> ``"train"``/``"test"``."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    pair_ids = sorted(cbin.pairs())
    rng = random.Random(bin_seed(seed, cbin.bin) ^ 0x5EED)
    rng.shuffle(pair_ids)
    n_train = round(train_fraction * len(pair_ids))
    train = set(pair_ids[:n_train])
    return {m.patient_id: ("train" if m.pair_id in train else "test") for m in cbin.members}


@dataclass(frozen=True)
class Document:
    """A member's concatenated text with everything downstream stages need."""

    patient_id: str
    bin: int
    label: str
    pair_id: str
    split: str
    sex: str
    race: str
    text: str

    @property
    def y(self) -> int:
        return 1 if self.label == CASE else 0

    def attribute(self, name: str) -> str:
        return getattr(self, name)

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "bin": self.bin,
            "label": self.label,
            "pair_id": self.pair_id,
            "split": self.split,
            "sex": self.sex,
            "race": self.race,
            "text": self.text,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Document":
        return cls(
            str(obj["patient_id"]), int(obj["bin"]), obj["label"], obj["pair_id"],
            obj["split"], obj["sex"], obj["race"], obj["text"],
        )

    def with_text(self, text: str) -> "Document":
        return Document(self.patient_id, self.bin, self.label, self.pair_id,
                        self.split, self.sex, self.race, text)


def bin_documents(cbin: CohortBin, train_fraction: float = 0.8, seed: int = 0) -> list[Document]:
    splits = split_pairs(cbin, train_fraction, seed)
    return [
        Document(
            m.patient_id, cbin.bin, m.label, m.pair_id, splits[m.patient_id],
            m.patient.sex, m.patient.race, m.document(),
        )
        for m in cbin.members
    ]


def read_documents(path) -> list[Document]:
    with open(path, encoding="utf-8") as fh:
        return [Document.from_json(json.loads(ln)) for ln in fh if ln.strip()]
