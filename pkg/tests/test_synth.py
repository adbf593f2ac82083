import hashlib
import json

import pytest

from notebias.cohort import load_codeset
from notebias.debias import default_gender_lexicon
from notebias.lexical import bin_stats
from notebias.synth import (
    PRESETS,
    SexProfile,
    SynthConfig,
    SynthError,
    Tolerances,
    generate,
    patient_documents,
    preset,
    verify,
    write_corpus,
)

CODES = load_codeset()


def digest(corpus) -> str:
    h = hashlib.sha256()
    for n in corpus.notes:
        h.update(json.dumps(n.to_json(), sort_keys=True).encode())
    return h.hexdigest()


@pytest.fixture(scope="module")
def bin5():
    return generate(preset("table5-bin5", n_patients=600, seed=11))


def by_sex(corpus):
    docs = patient_documents(corpus)
    sex = {p.patient_id: p.sex for p in corpus.patients}
    out = {}
    for pid, d in docs.items():
        out.setdefault(sex[pid], []).append(d)
    return out


def test_deterministic_and_seed_sensitive():
    cfg = preset("table5-bin5", n_patients=40, seed=3)
    assert digest(generate(cfg)) == digest(generate(cfg))
    assert digest(generate(preset("table5-bin5", n_patients=40, seed=4))) != digest(generate(cfg))


def test_patients_sorted_and_pairs_balanced(bin5):
    ids = [p.patient_id for p in bin5.patients]
    assert ids == sorted(ids)
    labels = [t.label for t in bin5.truth]
    assert labels.count("case") == labels.count("control") == 300


def test_cases_carry_listed_codes_and_controls_none_before_index(bin5):
    truth = {t.patient_id: t for t in bin5.truth}
    for dx in bin5.diagnoses:
        t = truth[dx.patient_id]
        if t.label == "control" and dx in CODES:
            assert dx.date > t.index_date
    assert any(dx not in CODES for dx in bin5.diagnoses)  # distractor codes exist
    for t in bin5.truth:
        mine = [d for d in bin5.diagnoses if d.patient_id == t.patient_id and d in CODES]
        if t.label == "case":
            assert min(d.date for d in mine) == t.index_date


def test_verify_passes_at_three_sigma(bin5):
    report = verify(bin5)
    assert report.passed, report.lines()
    assert {c.name for c in report.checks} == {"female_ratio", "length_mean_M", "length_mean_F", "biased_rate"}


def test_zero_tolerance_fails(bin5):
    assert not verify(bin5, tolerances=Tolerances(female_ratio=0.0, length=0.0, biased_rate=0.0)).passed


def test_empty_corpus_passes_trivially():
    corpus = generate(preset("table5-bin5", n_patients=0))
    assert corpus.patients == [] and verify(corpus).passed and verify(corpus).checks == []


def test_preset_statistics(bin5):
    cfg = PRESETS["table5-bin5"]
    assert (cfg.male.length_mean, cfg.female.length_mean, cfg.biased_rate) == (4139, 3443, 0.03)
    assert cfg.n_patients == 4188 and cfg.female_ratio == 0.36
    stats = bin_stats(by_sex(bin5), gender=default_gender_lexicon())
    for sex, target in (("M", 4139), ("F", 3443)):
        g = stats.groups[sex]
        assert abs(g.avg_length_words - target) <= 0.05 * target
        assert g.term_pct == pytest.approx(21.0, abs=1.0)
        assert g.biased_pct == pytest.approx(3.0, abs=0.3)


@pytest.mark.parametrize("bin_,target", [(5, 0.44), (8, 0.51), (10, 0.59), (12, 0.74), (15, 0.42)])
def test_preset_vocabulary_overlap(bin_, target):
    corpus = generate(preset(f"table5-bin{bin_}", n_patients=300, seed=2))
    assert bin_stats(by_sex(corpus)).vocab_jaccard == pytest.approx(target, abs=0.01)


def test_female_signal_is_diluted(bin5):
    cases = [t for t in bin5.truth if t.label == "case"]
    density = {s: sum(t.signal_count for t in cases if t.sex == s) /
               sum(t.document_words for t in cases if t.sex == s) for s in "MF"}
    assert density["F"] / density["M"] == pytest.approx(0.7, abs=0.07)


def test_infeasible_and_invalid_configs():
    with pytest.raises(SynthError):
        SynthConfig(male=SexProfile(signal_density=0.9))
    with pytest.raises(SynthError):
        SynthConfig(female_ratio=1.5)
    with pytest.raises(SynthError):
        SynthConfig(case_ratio=0.3)
    with pytest.raises(SynthError):
        preset("no-such-preset")


def test_written_files_round_trip(tmp_path):
    from notebias.corpus import ingest_diagnoses, ingest_notes, ingest_patients

    corpus = generate(preset("table5-bin5", n_patients=20, seed=1))
    counts = write_corpus(corpus, tmp_path)
    assert counts["patients"] == 20
    assert list(ingest_notes(tmp_path / "notes.jsonl")) == corpus.notes
    assert list(ingest_patients(tmp_path / "patients.jsonl")) == corpus.patients
    assert list(ingest_diagnoses(tmp_path / "diagnoses.jsonl")) == corpus.diagnoses
