"""Classification-parity metrics per demographic subgroup."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

SIGNIFICANT_HIGH = 1.25
SIGNIFICANT_LOW = 0.85

BIAS_TO_PRIVILEGED = "significant_bias_privileged"
BIAS_TO_NONPRIVILEGED = "significant_bias_nonprivileged"
ACCEPTABLE = "acceptable"
UNDEFINED = "undefined"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def fpr(self) -> float | None:
        d = self.fp + self.tn
        return self.fp / d if d else None

    @property
    def fnr(self) -> float | None:
        d = self.fn + self.tp
        return self.fn / d if d else None

    @property
    def accuracy(self) -> float | None:
        return (self.tp + self.tn) / self.total if self.total else None

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


def _attr(record, attribute: str):
    return record.attributes[attribute]


def tally(records: Iterable, threshold: float = 0.5) -> ConfusionCounts:
    tp = fp = tn = fn = 0
    for r in records:
        pos = r.probability >= threshold
        if r.y:
            tp += pos
            fn += not pos
        else:
            fp += pos
            tn += not pos
    return ConfusionCounts(tp, fp, tn, fn)


def confusion(records: Sequence, attribute: str, threshold: float = 0.5) -> dict[str, ConfusionCounts]:
    """Counts per attribute value; predicted positive iff p >= threshold."""
    if not records:
        raise ValueError("no records")
    groups: dict[str, list] = {}
    for r in records:
        groups.setdefault(_attr(r, attribute), []).append(r)
    return {k: tally(v, threshold) for k, v in sorted(groups.items())}


def ber(counts: ConfusionCounts) -> float | None:
    """Balanced error rate: mean of FPR and FNR. ``None`` if either rate
    has a zero denominator."""
    fpr, fnr = counts.fpr, counts.fnr
    if fpr is None or fnr is None:
        return None
    return (fpr + fnr) / 2


def uncertainty_pct(records: Sequence, zone: tuple[float, float] = (0.4, 0.6)) -> float:
    if not records:
        raise ValueError("no records")
    lo, hi = zone
    return 100.0 * sum(lo <= r.probability <= hi for r in records) / len(records)


@dataclass(frozen=True)
class GroupMetrics:
    n: int
    counts: ConfusionCounts
    accuracy: float | None
    unc_pct: float
    fpr: float | None
    fnr: float | None
    ber: float | None
    low_confidence: bool = False

    @classmethod
    def from_records(cls, records: Sequence, threshold: float = 0.5,
                     zone=(0.4, 0.6), min_size: int = 10) -> "GroupMetrics":
        c = tally(records, threshold)
        return cls(len(records), c, c.accuracy, uncertainty_pct(records, zone),
                   c.fpr, c.fnr, ber(c), len(records) < min_size)

    @classmethod
    def from_rates(cls, fpr: float, fnr: float, accuracy: float | None = None,
                   unc_pct: float = 0.0) -> "GroupMetrics":
        """Metrics known only as published rates (no underlying counts)."""
        return cls(0, ConfusionCounts(), accuracy, unc_pct, fpr, fnr, (fpr + fnr) / 2)


def classify_ratio(ratio: float | None) -> str:
    """Boundaries 0.85 and 1.25 themselves count as acceptable."""
    if ratio is None:
        return UNDEFINED
    if ratio > SIGNIFICANT_HIGH:
        return BIAS_TO_PRIVILEGED
    if ratio < SIGNIFICANT_LOW:
        return BIAS_TO_NONPRIVILEGED
    return ACCEPTABLE


def ber_ratio(non_privileged: GroupMetrics, privileged: GroupMetrics) -> tuple[float | None, str]:
    if non_privileged.ber is None or privileged.ber is None or privileged.ber == 0:
        return None, UNDEFINED
    r = non_privileged.ber / privileged.ber
    return r, classify_ratio(r)


def _diff(a, b):
    return None if a is None or b is None else a - b


@dataclass
class ParityReport:
    attribute: str
    privileged: str
    groups: dict[str, GroupMetrics]
    non_privileged: GroupMetrics
    ber_ratio: float | None
    flag: str
    fnr_gap: float | None
    accuracy_gap: float | None
    unc_gap: float | None
    bin: int | None = None
    label: str = ""
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        def gm(g: GroupMetrics) -> dict:
            return {
                "n": g.n, "accuracy": g.accuracy, "unc_pct": g.unc_pct,
                "fpr": g.fpr, "fnr": g.fnr, "ber": g.ber,
                "tp": g.counts.tp, "fp": g.counts.fp, "tn": g.counts.tn, "fn": g.counts.fn,
                "low_confidence": g.low_confidence,
            }
        return {
            "bin": self.bin, "label": self.label,
            "attribute": self.attribute, "privileged": self.privileged,
            "groups": {k: gm(v) for k, v in self.groups.items()},
            "non_privileged": gm(self.non_privileged),
            "ber_ratio": self.ber_ratio, "flag": self.flag,
            "fnr_gap": self.fnr_gap, "accuracy_gap": self.accuracy_gap, "unc_gap": self.unc_gap,
            "notes": self.notes,
        }


def parity_report(
    records: Sequence,
    attribute: str,
    privileged: str,
    threshold: float = 0.5,
    zone: tuple[float, float] = (0.4, 0.6),
    min_group_size: int = 10,
    bin: int | None = None,
    label: str = "",
) -> ParityReport:
    """Per-group metrics plus BER ratio and gaps (non-privileged minus
    privileged). With more than two values the non-privileged side pools
    every value other than ``privileged``."""
    by_value: dict[str, list] = {}
    for r in records:
        by_value.setdefault(_attr(r, attribute), []).append(r)
    if len(by_value) < 2:
        raise ValueError(f"attribute {attribute!r} needs at least two values, got {sorted(by_value)}")
    if privileged not in by_value:
        raise ValueError(f"privileged value {privileged!r} not present")
    groups = {
        k: GroupMetrics.from_records(v, threshold, zone, min_group_size)
        for k, v in sorted(by_value.items())
    }
    others = [r for k, v in by_value.items() if k != privileged for r in v]
    nonpriv = GroupMetrics.from_records(others, threshold, zone, min_group_size)
    report = compare(groups, attribute, privileged, nonpriv, bin=bin, label=label)
    report.notes = [f"group {k!r} has only {g.n} records" for k, g in groups.items() if g.low_confidence]
    return report


def compare(
    groups: dict[str, GroupMetrics],
    attribute: str,
    privileged: str,
    non_privileged: GroupMetrics | None = None,
    bin: int | None = None,
    label: str = "",
) -> ParityReport:
    """Assemble a report from precomputed group metrics. For two groups the
    non-privileged side defaults to the other group."""
    priv = groups[privileged]
    if non_privileged is None:
        others = [g for k, g in groups.items() if k != privileged]
        if len(others) != 1:
            raise ValueError("pass non_privileged explicitly for more than two groups")
        non_privileged = others[0]
    ratio, flag = ber_ratio(non_privileged, priv)
    return ParityReport(
        attribute, privileged, groups, non_privileged, ratio, flag,
        _diff(non_privileged.fnr, priv.fnr), _diff(non_privileged.accuracy, priv.accuracy),
        _diff(non_privileged.unc_pct, priv.unc_pct), bin, label,
    )


@dataclass(frozen=True)
class GapSummary:
    fnr_gap: float | None
    accuracy_gap: float | None
    unc_gap: float | None
    n_reports: int


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return sum(xs) / len(xs) if xs else None


def aggregate_gaps(reports: Sequence[ParityReport]) -> GapSummary:
    """Unweighted means over reports (bins); undefined gaps are skipped."""
    if not reports:
        raise ValueError("need at least one report")
    return GapSummary(
        _mean(r.fnr_gap for r in reports),
        _mean(r.accuracy_gap for r in reports),
        _mean(r.unc_gap for r in reports),
        len(reports),
    )


# ---------------------------------------------------------------------------
# output


def write_reports(path, reports: Iterable[ParityReport]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def _fmt(x, pct: bool = False) -> str:
    if x is None:
        return "n/a"
    return f"{x:.0f}" if pct else f"{x:.2f}"


def format_table(reports: Sequence[ParityReport]) -> str:
    """Aligned text table: per group Acc, unc, FPR, FNR, BER, then BER
    ratio, FNR gap and flag."""
    if not reports:
        return ""
    priv = reports[0].privileged
    cols = ["Acc", "unc", "FPR", "FNR", "BER"]
    header = ["bin", "run", *(f"{priv}:{c}" for c in cols), *(f"other:{c}" for c in cols),
              "BER r.", "FNR gap", "flag"]
    rows = [header]
    for r in reports:
        p, o = r.groups[r.privileged], r.non_privileged
        row = [str(r.bin if r.bin is not None else "-"), r.label or "-"]
        for g in (p, o):
            row += [_fmt(g.accuracy), _fmt(g.unc_pct, True), _fmt(g.fpr), _fmt(g.fnr), _fmt(g.ber)]
        row += [_fmt(r.ber_ratio), _fmt(r.fnr_gap), r.flag]
        rows.append(row)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows) + "\n"
