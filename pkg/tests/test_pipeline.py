import math

import pytest

from notebias.cohort import Document
from notebias.debias import tfidf_filt
from notebias.lexical import default_stopwords, fit_tfidf, tokenize
from notebias.pipeline import GapResult, debias_documents, synthetic_gap_run, train_and_predict


def doc(pid, split, text, label="case", sex="F", bin_=5):
    return Document(pid, bin_, label, f"{bin_}:{pid}", split, sex, "White", text)


DOCS = [
    doc("a", "train", "Fever and cough. Rare zebra here. The and of."),
    doc("b", "train", "Fever again. Cough again. Sleep well.", "control", "M"),
    doc("c", "test", "Zebra zebra zebra. Fever. Cough sleep. Worry.", "case", "M"),
    doc("d", "test", "Fever. Cough.", "control", "F"),
]


def test_tfidf_statistics_come_from_training_split_only():
    out = {d.patient_id: d.text for d in debias_documents(DOCS, ["tfidf_filt"], fraction=0.25)}
    stop = default_stopwords()
    model = fit_tfidf(tokenize(d.text, stop) for d in DOCS if d.split == "train")
    assert out["c"] == tfidf_filt(DOCS[2].text, model, 0.25, stop)
    # a test-only change must not move the fitted statistics
    changed = DOCS[:3] + [doc("d", "test", "Zebra zebra. Zebra.", "control")]
    again = {d.patient_id: d.text for d in debias_documents(changed, ["tfidf_filt"], fraction=0.25)}
    assert again["c"] == out["c"]


def test_transform_test_flag_and_empty_chain():
    out = debias_documents(DOCS, ["gen_sub"], transform_test=False)
    assert [d.text for d in out if d.split == "test"] == [d.text for d in DOCS if d.split == "test"]
    assert debias_documents(DOCS, []) == DOCS


def test_bins_are_debiased_independently():
    other = [doc(f"x{d.patient_id}", d.split, d.text, d.label, d.sex, 8) for d in DOCS]
    both = debias_documents(DOCS + other, ["tfidf_filt"], fraction=0.25)
    alone = debias_documents(DOCS, ["tfidf_filt"], fraction=0.25)
    assert [d.text for d in both if d.bin == 5] == [d.text for d in alone]


def test_train_and_predict_scores_test_split_per_bin():
    runs = train_and_predict(DOCS)
    assert list(runs) == [5]
    assert sorted(r.patient_id for r in runs[5].records) == ["c", "d"]
    assert all(0 < r.probability < 1 for r in runs[5].records)


def test_gap_run_shape():
    res = synthetic_gap_run(n_patients=300, seed=1)
    assert isinstance(res, GapResult) and res.seed == 1
    for v in (res.gap_before, res.gap_after):
        assert math.isfinite(v) and -1 <= v <= 1
    assert 0.5 <= res.accuracy_before <= 1 and 0.5 <= res.accuracy_after <= 1
    assert res.decreased == (res.gap_after < res.gap_before)
    assert synthetic_gap_run(n_patients=300, seed=1) == res


def test_gap_run_rejects_unknown_transform():
    with pytest.raises(ValueError):
        synthetic_gap_run(n_patients=100, transforms=("nope",))
