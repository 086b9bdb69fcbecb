"""Detection metrics: confusion matrices, rates and the Wilcoxon signed-rank test."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import AspectScanError


class RecordFormatError(AspectScanError):
    pass


@dataclass(frozen=True)
class VulnRecord:
    id: str
    truth_before: frozenset
    truth_after: frozenset
    detect_before: frozenset
    detect_after: frozenset

    def __post_init__(self):
        for name in ("truth_before", "truth_after", "detect_before", "detect_after"):
            lines = getattr(self, name)
            object.__setattr__(self, name, frozenset(lines))
            if any(type(l) is not int or l <= 0 for l in lines):
                raise RecordFormatError(f"record {self.id}: {name} must hold positive line numbers")

    @classmethod
    def from_dict(cls, doc: dict) -> "VulnRecord":
        try:
            return cls(str(doc["id"]), doc["truth_before"], doc["truth_after"],
                       doc["detect_before"], doc["detect_after"])
        except (KeyError, TypeError) as exc:
            raise RecordFormatError(f"malformed record {doc!r}: {exc}") from None


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fn: int = 0
    tn: int = 0
    fp: int = 0

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fn + other.fn,
                               self.tn + other.tn, self.fp + other.fp)


@dataclass(frozen=True)
class Metrics:
    sensitivity: float
    specificity: float
    precision: float


def confusion_strict(rec: VulnRecord) -> ConfusionMatrix:
    return ConfusionMatrix(
        tp=len(rec.truth_before & rec.detect_before),
        fn=len(rec.truth_before - rec.detect_before),
        tn=len(rec.truth_after - rec.detect_after),
        fp=len(rec.detect_before - rec.truth_before) + len(rec.detect_after),
    )


def confusion_relaxed(rec: VulnRecord) -> ConfusionMatrix:
    tb, db = len(rec.truth_before), len(rec.detect_before)
    ta, da = len(rec.truth_after), len(rec.detect_after)
    return ConfusionMatrix(
        tp=min(tb, db),
        fn=max(tb - db, 0),
        tn=max(ta - da, 0),
        fp=max(db - tb, 0) + da,
    )


CONFUSION = {"strict": confusion_strict, "relaxed": confusion_relaxed}


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Sensitivity, specificity and precision; undefined ratios are NaN (precision is 0)."""
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    return Metrics(_ratio(cm.tp, cm.tp + cm.fn), _ratio(cm.tn, cm.fp + cm.tn), precision)


def aggregate(records, mode: str = "strict") -> ConfusionMatrix:
    total = ConfusionMatrix()
    for rec in records:
        total = total + CONFUSION[mode](rec)
    return total


# -- Wilcoxon signed-rank ------------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    r_plus: float
    r_minus: float
    p_value: float
    effect_size: float
    n: int


def _average_ranks(values: list) -> list:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _exact_p(ranks: list, r_plus: float, zeros: float) -> float:
    """Two-sided p under the exact null distribution of R+.

    Non-zero ranks get random signs; the fixed half-share of zero ranks is
    added to every outcome. Ranks are doubled so everything stays integral.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    counts = {0: 1}
    for r in doubled:
        nxt = dict(counts)
        for s, c in counts.items():
            nxt[s + r] = nxt.get(s + r, 0) + c
        counts = nxt
    total = 2 ** len(doubled)
    observed = int(round(2 * (r_plus - zeros)))
    lower = sum(c for s, c in counts.items() if s <= observed) / total
    upper = sum(c for s, c in counts.items() if s >= observed) / total
    return min(1.0, 2 * min(lower, upper))


def wilcoxon_signed_rank(a, b, *, exact_limit: int = 25) -> WilcoxonResult:
    a, b = list(a), list(b)
    if not a or len(a) != len(b):
        raise ValueError("samples must be non-empty and of equal length")
    # rounding keeps float noise from breaking ties between equal differences
    diffs = [round(x - y, 12) for x, y in zip(a, b)]
    ranks = _average_ranks([abs(d) for d in diffs])
    r_plus = r_minus = zero_share = 0.0
    nonzero = []
    for d, r in zip(diffs, ranks):
        if d > 0:
            r_plus += r
            nonzero.append(r)
        elif d < 0:
            r_minus += r
            nonzero.append(r)
        else:
            r_plus += r / 2
            r_minus += r / 2
            zero_share += r / 2
    n = len(diffs)
    effect = r_plus / (r_plus + r_minus)
    if n <= exact_limit:
        p = _exact_p(nonzero, r_plus, zero_share)
    else:
        mean = zero_share + sum(nonzero) / 2
        var = sum(r * r for r in nonzero) / 4
        if var == 0:
            p = 1.0
        else:
            z = (r_plus - mean) / math.sqrt(var)
            p = min(1.0, math.erfc(abs(z) / math.sqrt(2)))
    return WilcoxonResult(r_plus, r_minus, p, effect, n)


# -- record files --------------------------------------------------------------


def load_records(directory) -> list:
    """Every record in ``*.json`` files of a directory (one object or a list per file)."""
    root = Path(directory)
    if not root.is_dir():
        raise RecordFormatError(f"{root} is not a directory")
    records = []
    for path in sorted(root.glob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise RecordFormatError(f"{path}: {exc}") from None
        for item in doc if isinstance(doc, list) else [doc]:
            records.append(VulnRecord.from_dict(item))
    return records


def per_record_rates(records, mode: str, which: str) -> dict:
    out = {}
    for rec in records:
        out[rec.id] = getattr(metrics(CONFUSION[mode](rec)), which)
    return out


def summary(records, mode: str = "strict") -> dict:
    rows = []
    for rec in records:
        cm = CONFUSION[mode](rec)
        rows.append({"id": rec.id, **asdict(cm), **asdict(metrics(cm))})
    total = aggregate(records, mode)
    return {"mode": mode, "records": rows, "aggregate": {**asdict(total), **asdict(metrics(total))}}


def compare(records_a, records_b, mode: str = "strict") -> dict:
    """Paired Wilcoxon comparison per metric over the vulnerabilities both sets share."""
    out = {}
    for which in ("sensitivity", "specificity"):
        ra = per_record_rates(records_a, mode, which)
        rb = per_record_rates(records_b, mode, which)
        ids = [i for i in sorted(set(ra) & set(rb)) if not (math.isnan(ra[i]) or math.isnan(rb[i]))]
        if not ids:
            out[which] = None
            continue
        res = wilcoxon_signed_rank([ra[i] for i in ids], [rb[i] for i in ids])
        out[which] = asdict(res)
    return out
