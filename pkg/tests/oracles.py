"""Independent reference implementations used as test oracles.

Each one is written from the stated definition, without calling the code
under test, and favours obviousness over speed.
"""

from __future__ import annotations

import math
import random
import re
import string
from datetime import date, datetime, timedelta, timezone
from importlib import resources

import numpy as np

_PUNCT = re.compile("[" + re.escape(string.punctuation + "‘’“”–—…") + "]")


def stopword_list() -> set[str]:
    text = resources.files("notebias.data").joinpath("stopwords.txt").read_text("utf-8")
    return {ln.strip() for ln in text.splitlines() if ln.strip()}


def tokens(text: str, stop: set[str]) -> list[str]:
    return [w for w in _PUNCT.sub(" ", text.lower()).split() if w not in stop]


# ---------------------------------------------------------------------------
# near-duplicate removal


def cosine_matrix(texts: list[str], stop: set[str]) -> np.ndarray:
    toks = [tokens(t, stop) for t in texts]
    vocab = sorted({w for ts in toks for w in ts})
    col = {w: i for i, w in enumerate(vocab)}
    M = np.zeros((len(texts), len(vocab)))
    for r, ts in enumerate(toks):
        for w in ts:
            M[r, col[w]] += 1
    norms = np.linalg.norm(M, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        C = (M @ M.T) / np.outer(norms, norms)
    return C, norms > 0


def dedup_oracle(texts: list[str], threshold: float, stop: set[str]) -> list[int]:
    """Indices kept when scanning in the given order: an index survives iff
    no earlier survivor has cosine >= threshold with it."""
    C, nonempty = cosine_matrix(texts, stop)
    kept: list[int] = []
    for i in range(len(texts)):
        if not nonempty[i]:
            kept.append(i)
            continue
        if any(nonempty[j] and C[i, j] >= threshold - 1e-12 for j in kept):
            continue
        kept.append(i)
    return kept


# ---------------------------------------------------------------------------
# TF-IDF sentence filter


def idf(n_docs: int, df: int) -> float:
    return math.log((1 + n_docs) / (1 + df)) + 1


def sentence_scores_oracle(sentences: list[str], df: dict[str, int], n_docs: int, stop: set[str]) -> list[float]:
    sent_toks = [tokens(s, stop) for s in sentences]
    tf: dict[str, int] = {}
    for ts in sent_toks:
        for w in ts:
            tf[w] = tf.get(w, 0) + 1
    out = []
    for ts in sent_toks:
        if not ts:
            out.append(0.0)
            continue
        out.append(sum(tf[w] * idf(n_docs, df.get(w, 0)) for w in ts) / len(ts))
    return out


def removed_oracle(scores: list[float], fraction: float) -> set[int]:
    s = len(scores)
    k = min(math.floor(fraction * s), max(s - 1, 0))
    return set(sorted(range(s), key=lambda i: (scores[i], i))[:k])


# ---------------------------------------------------------------------------
# cohort matching


def _utc(d: date) -> datetime:
    return datetime(d.year, d.month, d.day, tzinfo=timezone.utc)


def whole_years(birth: date, on: date) -> int:
    n = 0
    while True:
        try:
            anniv = birth.replace(year=birth.year + n + 1)
        except ValueError:  # Feb 29
            anniv = date(birth.year + n + 1, 3, 1)
        if anniv > on:
            return n
        n += 1


def cohort_oracle(patients, notes, diagnoses, codes, bins, seed, window_days=548,
                  birth_days=30, note_types=("Progress Notes", "Telephone Encounters")):
    """Brute-force bin membership: {bin: {(case_id, control_id), ...}}.

    Mirrors the documented protocol: cases by first code date, bins in
    ascending order, cases processed by (first date, id), candidates sorted
    by id and one drawn with ``rng.randrange`` from the bin's seeded
    stream. A consumed control stays consumed even if the pair is later
    dropped for lack of pre-index notes.
    """
    from notebias.cohort import bin_seed

    pats = {p.patient_id: p for p in patients}
    by_pid: dict[str, list] = {}
    for n in notes:
        by_pid.setdefault(n.patient_id, []).append(n)
    first: dict[str, date] = {}
    for ev in diagnoses:
        if (ev.vocabulary, ev.code) in codes:
            if ev.patient_id not in first or ev.date < first[ev.patient_id]:
                first[ev.patient_id] = ev.date

    def encounter(pid, cutoff):
        hi = _utc(cutoff)
        lo = hi - timedelta(days=window_days)
        return any(lo <= n.timestamp < hi for n in by_pid.get(pid, []))

    def usable(pid, cutoff):
        hi = _utc(cutoff)
        return any(n.timestamp < hi and n.note_type in note_types for n in by_pid.get(pid, []))

    cases = {}
    for pid, dx in first.items():
        if pid in pats and dx >= pats[pid].birth_date and encounter(pid, dx):
            cases[pid] = (dx, whole_years(pats[pid].birth_date, dx))
    reserved = {pid for pid, (_, age) in cases.items() if age in bins}
    used: set[str] = set()
    out = {}
    for b in sorted(bins):
        rng = random.Random(bin_seed(seed, b))
        members = set()
        bin_cases = sorted((dx, pid) for pid, (dx, age) in cases.items() if age == b)
        taken: set[str] = set()
        for dx, cid in bin_cases:
            case = pats[cid]
            eligible = []
            for pid in sorted(pats):
                if pid in reserved or pid in used or pid in taken or pid == cid:
                    continue
                c = pats[pid]
                if abs((c.birth_date - case.birth_date).days) > birth_days:
                    continue
                if c.sex != case.sex:
                    continue
                if pid in first and first[pid] <= dx:
                    continue
                if not encounter(pid, dx):
                    continue
                eligible.append(pid)
            if not eligible:
                continue
            ctrl = eligible[rng.randrange(len(eligible))]
            taken.add(ctrl)
            if usable(cid, dx) and usable(ctrl, dx):
                members.add((cid, ctrl))
        if members:
            used |= {c for _, c in members}
            out[b] = members
    return out


# ---------------------------------------------------------------------------
# logistic loss


def numeric_gradient(f, w: np.ndarray, b: float, h: float = 1e-6):
    gw = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        gw[i] = (f(w + e, b) - f(w - e, b)) / (2 * h)
    gb = (f(w, b + h) - f(w, b - h)) / (2 * h)
    return gw, gb


def matching_pool(seed: int, n: int = 200):
    """A small corpus dense with boundary cases: births 0-40 days apart,
    controls diagnosed before, on or after the index date, notes just
    inside or outside the encounter window, and note types that cleaning
    discards."""
    from notebias.corpus import DiagnosisEvent, PatientRecord, RawNote

    rng = random.Random(seed)
    anchors = [date(2008, 1, 15), date(2010, 6, 1), date(2012, 2, 29)]
    codes = [("ICD10CM", "F41.1"), ("ICD10CM", "F41.9"), ("ICD9CM", "300.00")]
    patients, notes, dx = [], [], []
    for i in range(n):
        pid = f"p{i:03d}"
        birth = rng.choice(anchors) + timedelta(days=rng.randint(-40, 40))
        patients.append(PatientRecord(pid, rng.choice("MF"), rng.choice(["White", "Other"]), birth))
        is_case = rng.random() < 0.3
        index = birth + timedelta(days=int(365.25 * rng.choice([5, 5, 8, 6])) + rng.randint(-20, 20))
        if is_case:
            voc, code = rng.choice(codes)
            dx.append(DiagnosisEvent(pid, code, voc, index))
            if rng.random() < 0.3:
                dx.append(DiagnosisEvent(pid, code, voc, index + timedelta(days=rng.randint(1, 300))))
        elif rng.random() < 0.25:
            voc, code = rng.choice(codes)
            dx.append(DiagnosisEvent(pid, code, voc, index + timedelta(days=rng.randint(-400, 400))))
        if rng.random() < 0.2:
            dx.append(DiagnosisEvent(pid, "Z00.0", "ICD10CM", index))
        for k in range(rng.randint(0, 6)):
            choice = rng.random()
            if choice < 0.1:
                ts = _utc(index) - timedelta(days=548)
            elif choice < 0.2:
                ts = _utc(index) - timedelta(days=549)
            elif choice < 0.3:
                ts = _utc(index)
            else:
                ts = _utc(index) - timedelta(days=rng.randint(-200, 900), hours=rng.randint(0, 23))
            ntype = rng.choice(["Progress Notes", "Telephone Encounters", "Progress Notes", "Letter"])
            notes.append(RawNote(pid, f"{pid}-n{k}", ntype, ts, f"visit {k} for {pid} note text"))
    return patients, notes, dx
