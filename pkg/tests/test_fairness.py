import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from notebias.fairness import (
    ACCEPTABLE,
    BIAS_TO_NONPRIVILEGED,
    BIAS_TO_PRIVILEGED,
    UNDEFINED,
    ConfusionCounts,
    GroupMetrics,
    aggregate_gaps,
    ber,
    ber_ratio,
    classify_ratio,
    compare,
    confusion,
    format_table,
    parity_report,
    uncertainty_pct,
    write_reports,
)
from notebias.model import PredictionRecord


def rec(p, case, sex="F", pid="x"):
    return PredictionRecord(pid, "case" if case else "control", p, {"sex": sex}, 5)


def random_records(rng, n):
    return [rec(rng.choice([rng.random(), 0.5, 0.4, 0.6]), rng.random() < 0.5,
                rng.choice("MF"), str(i)) for i in range(n)]


# ---------------------------------------------------------------------------
# counts


def test_threshold_is_inclusive():
    assert confusion([rec(0.5, True)], "sex")["F"] == ConfusionCounts(tp=1)
    assert confusion([rec(0.49, True)], "sex")["F"] == ConfusionCounts(fn=1)
    assert confusion([rec(0.5, False)], "sex")["F"] == ConfusionCounts(fp=1)


@given(st.integers(0, 2**32 - 1), st.integers(1, 200))
def test_confusion_equals_brute_force(seed, n):
    records = random_records(random.Random(seed), n)
    got = confusion(records, "sex")
    for sex, c in got.items():
        mine = [r for r in records if r.attributes["sex"] == sex]
        assert c.tp == sum(r.y == 1 and r.probability >= 0.5 for r in mine)
        assert c.fn == sum(r.y == 1 and r.probability < 0.5 for r in mine)
        assert c.fp == sum(r.y == 0 and r.probability >= 0.5 for r in mine)
        assert c.tn == sum(r.y == 0 and r.probability < 0.5 for r in mine)
        assert c.total == len(mine)
        if c.total:
            assert c.accuracy == (c.tp + c.tn) / c.total
    assert sum(c.total for c in got.values()) == n


def test_confusion_requires_records():
    with pytest.raises(ValueError):
        confusion([], "sex")


# ---------------------------------------------------------------------------
# ber


def test_ber_from_published_rates():
    assert GroupMetrics.from_rates(0.61, 0.24).ber == pytest.approx(0.425)
    assert GroupMetrics.from_rates(0.52, 0.37).ber == pytest.approx(0.445)


def test_ber_extremes_and_undefined():
    assert ber(ConfusionCounts(tp=4, tn=3)) == 0
    assert ber(ConfusionCounts(fp=4, fn=3)) == 1
    assert ber(ConfusionCounts(tp=4)) is None


@given(st.integers(0, 2**32 - 1), st.integers(1, 1000))
def test_ber_matches_per_record_average(seed, n):
    records = random_records(random.Random(seed), n)
    c = confusion(records, "sex")
    for sex, counts in c.items():
        mine = [r for r in records if r.attributes["sex"] == sex]
        neg = [r for r in mine if r.y == 0]
        pos = [r for r in mine if r.y == 1]
        if neg and pos:
            fpr = sum(r.probability >= 0.5 for r in neg) / len(neg)
            fnr = sum(r.probability < 0.5 for r in pos) / len(pos)
            assert ber(counts) == pytest.approx((fpr + fnr) / 2, abs=1e-15)
        else:
            assert ber(counts) is None


# ---------------------------------------------------------------------------
# ratio


def test_ratio_examples():
    f, m = GroupMetrics.from_rates(0.52, 0.37), GroupMetrics.from_rates(0.61, 0.24)
    r, flag = ber_ratio(f, m)
    assert r == pytest.approx(1.047, abs=5e-4) and flag == ACCEPTABLE
    f10, m10 = GroupMetrics.from_rates(0.51, 0.36), GroupMetrics.from_rates(0.37, 0.28)
    r, flag = ber_ratio(f10, m10)
    assert r == pytest.approx(0.435 / 0.325) and flag == BIAS_TO_PRIVILEGED
    assert ber_ratio(m, m) == (1.0, ACCEPTABLE)


def test_ratio_boundaries_are_acceptable():
    assert classify_ratio(1.25) == ACCEPTABLE
    assert classify_ratio(0.85) == ACCEPTABLE
    assert classify_ratio(1.2500001) == BIAS_TO_PRIVILEGED
    assert classify_ratio(0.8499999) == BIAS_TO_NONPRIVILEGED
    assert classify_ratio(None) == UNDEFINED


def test_zero_privileged_ber_is_undefined():
    perfect = GroupMetrics.from_rates(0.0, 0.0)
    assert ber_ratio(GroupMetrics.from_rates(0.2, 0.2), perfect) == (None, UNDEFINED)


@given(st.floats(0, 10, allow_nan=False))
def test_flags_partition_the_line(r):
    flag = classify_ratio(r)
    assert (flag == BIAS_TO_NONPRIVILEGED) == (r < 0.85)
    assert (flag == BIAS_TO_PRIVILEGED) == (r > 1.25)
    assert (flag == ACCEPTABLE) == (0.85 <= r <= 1.25)


# ---------------------------------------------------------------------------
# uncertainty


def test_uncertainty_zone_is_closed():
    assert uncertainty_pct([rec(p, True) for p in (0.39, 0.4, 0.6, 0.61)]) == 50.0
    assert uncertainty_pct([rec(0.9, True)] * 3) == 0.0
    assert uncertainty_pct([rec(0.5, False)] * 3) == 100.0


# ---------------------------------------------------------------------------
# reports


def test_published_bin5_gap():
    groups = {"M": GroupMetrics.from_rates(0.61, 0.24), "F": GroupMetrics.from_rates(0.52, 0.37)}
    report = compare(groups, "sex", "M")
    assert report.fnr_gap == pytest.approx(0.13)


def test_identical_groups_have_zero_gap_and_unit_ratio():
    records = []
    for sex in "MF":
        records += [rec(p, y, sex) for p, y in [(0.9, 1), (0.3, 1), (0.2, 0), (0.7, 0), (0.8, 1)]]
    report = parity_report(records, "sex", "M")
    assert report.fnr_gap == 0 and report.ber_ratio == 1.0 and report.accuracy_gap == 0
    assert report.notes and all("only 5" in n for n in report.notes)


def test_gap_sign_follows_planted_bias():
    rng = random.Random(0)
    records = []
    for i in range(400):
        sex = "MF"[i % 2]
        case = i % 4 < 2
        miss = 0.4 if sex == "F" else 0.1
        p = (0.2 if rng.random() < miss else 0.8) if case else rng.choice([0.1, 0.7])
        records.append(rec(p, case, sex, str(i)))
    report = parity_report(records, "sex", "M")
    assert report.fnr_gap > 0.15


@given(st.integers(0, 2**32 - 1))
def test_report_is_permutation_invariant(seed):
    rng = random.Random(seed)
    records = random_records(rng, 60)
    records += [rec(0.9, True, "M"), rec(0.1, False, "M"), rec(0.9, True, "F"), rec(0.1, False, "F")]
    a = parity_report(records, "sex", "M").to_json()
    rng.shuffle(records)
    assert parity_report(records, "sex", "M").to_json() == a


def test_report_needs_two_values_and_privileged_present():
    with pytest.raises(ValueError):
        parity_report([rec(0.5, True, "F")], "sex", "F")
    with pytest.raises(ValueError):
        parity_report([rec(0.5, True, "F"), rec(0.5, True, "X")], "sex", "M")


def test_multi_valued_attribute_pools_non_privileged():
    records = [PredictionRecord(str(i), "case", p, {"race": r}, 5)
               for i, (p, r) in enumerate([(0.9, "White"), (0.2, "Black"), (0.3, "Asian")])]
    records += [PredictionRecord(f"c{i}", "control", 0.1, {"race": r}, 5)
                for i, r in enumerate(["White", "Black", "Asian"])]
    report = parity_report(records, "race", "White")
    assert report.non_privileged.n == 4 and report.non_privileged.fnr == 1.0
    assert report.fnr_gap == 1.0


def test_aggregate_gaps():
    reports = [compare({"M": GroupMetrics.from_rates(0.5, m), "F": GroupMetrics.from_rates(0.5, f)}, "sex", "M")
               for m, f in [(0.24, 0.37), (0.58, 0.62), (0.28, 0.36), (0.28, 0.36), (0.42, 0.55)]]
    assert aggregate_gaps(reports).fnr_gap == pytest.approx(0.092)
    assert aggregate_gaps(reports[:1]).fnr_gap == pytest.approx(0.13)
    same = compare({"M": GroupMetrics.from_rates(0.5, 0.3), "F": GroupMetrics.from_rates(0.5, 0.3)}, "sex", "M")
    assert aggregate_gaps([same, same]).fnr_gap == 0
    with pytest.raises(ValueError):
        aggregate_gaps([])


def test_report_serialization(tmp_path):
    records = [rec(p, y, s, str(i)) for i, (p, y, s) in enumerate(
        [(0.9, 1, "M"), (0.1, 0, "M"), (0.4, 1, "F"), (0.6, 0, "F")])]
    report = parity_report(records, "sex", "M", bin=5, label="Orig")
    write_reports(tmp_path / "r.jsonl", [report])
    back = json.loads((tmp_path / "r.jsonl").read_text())
    assert back["groups"]["F"]["fnr"] == 1.0 and back["ber_ratio"] is None and back["flag"] == UNDEFINED
    table = format_table([report])
    assert "Orig" in table and "n/a" in table and UNDEFINED in table
