"""Stage wiring shared by the command line, scripts and tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .cohort import (
    DEFAULT_BINS,
    CodeSet,
    CohortData,
    Document,
    MatchCriteria,
    bin_documents,
    build_cohort,
    load_codeset,
)
from .corpus import CleaningConfig, DiagnosisEvent, PatientRecord, RawNote, build_timelines
from .debias import canonical_transform, make_pipeline
from .fairness import ParityReport, parity_report
from .lexical import default_stopwords, fit_tfidf, tokenize
from .model import LinearModel, PredictionRecord, TrainConfig, train_texts


def cohort_documents(
    patients: Sequence[PatientRecord],
    notes: Sequence[RawNote],
    diagnoses: Sequence[DiagnosisEvent],
    bins: Sequence[int] = DEFAULT_BINS,
    codes: CodeSet | None = None,
    criteria: MatchCriteria = MatchCriteria(),
    cleaning: CleaningConfig = CleaningConfig(),
    train_fraction: float = 0.8,
    seed: int = 0,
    threads: int = 1,
) -> list[Document]:
    codes = codes if codes is not None else load_codeset()
    data = CohortData.build(patients, build_timelines(patients, notes), diagnoses, codes)
    cohort = build_cohort(data, codes, diagnoses, bins, criteria, seed, cleaning, threads)
    return [d for b in sorted(cohort) for d in bin_documents(cohort[b], train_fraction, seed)]


def debias_documents(
    docs: Sequence[Document],
    names: Sequence[str],
    fraction: float = 0.2,
    seed: int = 0,
    transform_test: bool = True,
) -> list[Document]:
    """Apply a transform chain per bin. TF-IDF statistics come from the
    training split of the same bin only."""
    if not names:
        return list(docs)
    out = []
    for b in sorted({d.bin for d in docs}):
        in_bin = [d for d in docs if d.bin == b]
        tfidf = None
        if "tfidf_filt" in map(canonical_transform, names):
            stop = default_stopwords()
            tfidf = fit_tfidf(tokenize(d.text, stop) for d in in_bin if d.split == "train")
        pipeline = make_pipeline(names, tfidf=tfidf, fraction=fraction, seed=seed)
        for d in in_bin:
            if d.split == "test" and not transform_test:
                out.append(d)
                continue
            text = d.text
            for step in pipeline:
                text = step(text, d.patient_id)
            out.append(d.with_text(text))
    return out


@dataclass
class BinRun:
    bin: int
    model: LinearModel
    records: list[PredictionRecord]
    reports: dict[str, ParityReport] = field(default_factory=dict)


def train_and_predict(
    docs: Sequence[Document],
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> dict[int, BinRun]:
    """One classifier per bin, trained on its train split and scored on its
    test split."""
    runs = {}
    for b in sorted({d.bin for d in docs}):
        train = [d for d in docs if d.bin == b and d.split == "train"]
        test = [d for d in docs if d.bin == b and d.split == "test"]
        model = train_texts([d.text for d in train], [d.y for d in train], config, seed)
        probs = model.predict_texts([d.text for d in test]) if test else []
        records = [
            PredictionRecord(d.patient_id, d.label, float(p), {"sex": d.sex, "race": d.race}, b)
            for d, p in zip(test, probs)
        ]
        runs[b] = BinRun(b, model, records)
    return runs


def audit(
    runs: dict[int, BinRun],
    attribute: str = "sex",
    privileged: str = "M",
    label: str = "",
) -> list[ParityReport]:
    reports = []
    for b, run in sorted(runs.items()):
        rep = parity_report(run.records, attribute, privileged, bin=b, label=label)
        run.reports[attribute] = rep
        reports.append(rep)
    return reports


@dataclass(frozen=True)
class GapResult:
    seed: int
    gap_before: float
    gap_after: float
    accuracy_before: float
    accuracy_after: float

    @property
    def decreased(self) -> bool:
        return self.gap_after < self.gap_before


def _gap_and_accuracy(docs, config, seed, attribute, privileged) -> tuple[float, float]:
    runs = train_and_predict(docs, config, seed)
    records = [r for run in runs.values() for r in run.records]
    rep = parity_report(records, attribute, privileged)
    correct = sum((r.probability >= 0.5) == bool(r.y) for r in records)
    return rep.fnr_gap, correct / len(records)


def synthetic_gap_run(
    preset_name: str = "table5-bin5",
    seed: int = 0,
    n_patients: int = 2000,
    transforms: Sequence[str] = ("tfidf_filt",),
    fraction: float = 0.2,
    config: TrainConfig = TrainConfig(),
    attribute: str = "sex",
    privileged: str = "M",
) -> GapResult:
    """Generate a synthetic corpus, train before and after de-biasing, and
    report the FNR gap (non-privileged minus privileged) for both runs."""
    from .synth import generate, preset

    cfg = preset(preset_name, n_patients=n_patients, seed=seed)
    corpus = generate(cfg)
    docs = cohort_documents(corpus.patients, corpus.notes, corpus.diagnoses, bins=(cfg.bin,), seed=seed)
    g0, a0 = _gap_and_accuracy(docs, config, seed, attribute, privileged)
    debiased = debias_documents(docs, transforms, fraction=fraction, seed=seed)
    g1, a1 = _gap_and_accuracy(debiased, config, seed, attribute, privileged)
    return GapResult(seed, g0, g1, a0, a1)
