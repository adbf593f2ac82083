import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from notebias.corpus import PatientRecord
from notebias.model import (
    FeatureSpace,
    LinearModel,
    PredictionRecord,
    TrainConfig,
    build_features,
    fit_logistic,
    load_external_predictions,
    load_model,
    loss_and_grad,
    predict_proba,
    save_model,
    train,
    train_texts,
    vectorize,
)

from oracles import numeric_gradient


# ---------------------------------------------------------------------------
# features


def test_build_features_top_v_by_document_frequency():
    docs = [["a", "b", "b"], ["a", "c"], ["a", "b"]]
    assert build_features(docs, 2).tokens == ("a", "b")
    assert set(build_features(docs, 50).tokens) == {"a", "b", "c"}


def test_build_features_tie_is_lexicographic():
    assert build_features([["zeta", "alpha", "mid"]], 2).tokens == ("alpha", "mid")


def test_build_features_needs_documents():
    with pytest.raises(ValueError):
        build_features([])


def test_vectorize_counts_and_l2():
    space = FeatureSpace(("a", "b"))
    X = vectorize(space, [["a", "a", "b", "zzz"], []], norm="none").toarray()
    assert X.tolist() == [[2.0, 1.0], [0.0, 0.0]]
    Xn = vectorize(space, [["a", "a", "b"]]).toarray()
    assert np.allclose(Xn, [[2 / math.sqrt(5), 1 / math.sqrt(5)]])


# ---------------------------------------------------------------------------
# training


def toy_texts():
    texts, labels = [], []
    for i in range(20):
        case = i % 2 == 0
        filler = ["visit", "school", "sleep", "today"][i % 4]
        texts.append(f"{'anxious ' if case else ''}{filler} follow up {i % 3}")
        labels.append(int(case))
    return texts, labels


def test_separable_toy_set_reaches_full_accuracy():
    texts, labels = toy_texts()
    model = train_texts(texts, labels)
    preds = (model.predict_texts(texts) >= 0.5).astype(int)
    assert preds.tolist() == labels
    assert model.weights[model.space.index["anxious"]] == max(model.weights)


def test_zero_epochs_gives_one_half():
    texts, labels = toy_texts()
    model = train_texts(texts, labels, TrainConfig(epochs=0))
    assert np.all(model.weights == 0) and model.bias == 0
    assert np.all(model.predict_texts(texts + ["unseen words"]) == 0.5)


def test_single_class_rejected():
    with pytest.raises(ValueError):
        train_texts(["a", "b"], [1, 1])


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(scaling="std")


def test_loss_monotone_for_small_step():
    texts, labels = toy_texts()
    model = train_texts(texts, labels, TrainConfig(epochs=100, learning_rate=0.5))
    h = model.history
    assert all(b <= a + 1e-15 for a, b in zip(h, h[1:]))


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    X = sparse.csr_matrix(rng.normal(size=(12, 5)))
    y = rng.integers(0, 2, size=12).astype(float)
    w = rng.normal(size=5)
    b = float(rng.normal())
    l2 = 1e-2
    _, gw, gb = loss_and_grad(w, b, X, y, l2)
    nw, nb = numeric_gradient(lambda w_, b_: loss_and_grad(w_, b_, X, y, l2)[0], w, b, 1e-5)
    g = np.append(gw, gb)
    n = np.append(nw, nb)
    assert np.linalg.norm(g - n) <= 1e-6 * max(np.linalg.norm(n), 1e-8)


def test_training_is_bitwise_deterministic():
    texts, labels = toy_texts()
    a = train_texts(texts, labels, seed=3)
    b = train_texts(texts, labels, seed=3)
    assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias


def test_divergence_is_reported():
    X = sparse.csr_matrix(np.array([[1e3, 0.0], [0.0, 1e3]]))
    with pytest.raises(FloatingPointError):
        with np.errstate(all="ignore"):
            # each step multiplies w by (1 - lr * l2) = -9
            fit_logistic(X, np.array([1.0, 0.0]), TrainConfig(epochs=400, learning_rate=10.0, l2=1.0))


# ---------------------------------------------------------------------------
# prediction


def test_two_feature_hand_computation():
    cfg = TrainConfig(norm="none")
    model = LinearModel(FeatureSpace(("worry", "sleep")), np.array([0.7, -1.3]), 0.25, cfg)
    z = 0.7 * 3 - 1.3 * 1 + 0.25
    assert predict_proba(model, ["worry", "worry", "worry", "sleep", "other"]) == pytest.approx(
        1 / (1 + math.exp(-z)), abs=1e-9)


def test_zero_model_and_monotone_in_score():
    space = FeatureSpace(("a",))
    zero = LinearModel(space, np.zeros(1), 0.0, TrainConfig(norm="none"))
    assert predict_proba(zero, ["a"]) == 0.5
    probs = [predict_proba(LinearModel(space, np.array([w]), 0.0, TrainConfig(norm="none")), ["a"])
             for w in (-50.0, -1.0, 0.0, 1.0, 50.0)]
    assert probs == sorted(probs) and 0 < probs[0] and probs[-1] < 1


def test_checkpoint_round_trip(tmp_path):
    texts, labels = toy_texts()
    for cfg in (TrainConfig(), TrainConfig(scaling="maxabs")):
        model = train_texts(texts, labels, cfg, seed=5, stopwords={"up"})
        save_model(model, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        assert back.space.tokens == model.space.tokens and back.config == cfg
        assert back.stopwords == model.stopwords and back.seed == 5
        assert np.array_equal(back.predict_texts(texts), model.predict_texts(texts))


def test_checkpoint_rejects_other_formats(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        load_model(p)


def test_feature_space_is_train_only():
    docs = [["a", "b"], ["c"]]
    model = train(build_features(docs[:1]), docs[:1] + [["b"]], [1, 0])
    assert "c" not in model.space.index


# ---------------------------------------------------------------------------
# external predictions


def test_external_predictions(tmp_path):
    pats = {p: PatientRecord(p, s, "White", None) for p, s in [("a", "F"), ("b", "M"), ("c", "F")]}
    labels = {"a": ("case", 5), "b": ("control", 5), "c": ("case", 8)}
    rows = [{"patient_id": "a", "probability": 0.9}, {"patient_id": "b", "probability": 0.1},
            {"patient_id": "c", "probability": 0.5}]
    path = tmp_path / "p.jsonl"
    path.write_text("\n".join(map(json.dumps, rows)) + "\n")
    recs, warns = load_external_predictions(path, pats, labels)
    assert len(recs) == 3 and warns == []
    assert recs[0].attributes == {"sex": "F", "race": "White"} and recs[2].bin == 8

    rows += [{"patient_id": "a", "probability": 1.2}, {"patient_id": "ghost", "probability": 0.3}]
    path.write_text("\n".join(map(json.dumps, rows)) + "\nnot json\n")
    recs, warns = load_external_predictions(path, pats, labels)
    assert len(recs) == 3 and len(warns) == 3
    assert "outside" in warns[0] and "ghost" in warns[1] and ":6:" in warns[2]


def test_prediction_record_bounds():
    with pytest.raises(ValueError):
        PredictionRecord("a", "case", 1.2, {}, 5)
