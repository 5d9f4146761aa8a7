"""Confusion matrices, precision/recall/F1 and results tables.

Requirement is the positive class throughout. A metric whose denominator is
zero is undefined (``None``) and printed as ``n/a``, never as 0.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .corpus import Label, LabeledDataset


class MissingPredictionError(KeyError):
    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        super().__init__(f"no prediction for {len(self.missing)} gold unit(s): {', '.join(self.missing)}")

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Label, Label]]) -> "ConfusionMatrix":
        """Tally ``(gold, predicted)`` label pairs."""
        tp = tn = fp = fn = 0
        for gold, pred in pairs:
            if gold is Label.REQUIREMENT:
                if pred is Label.REQUIREMENT:
                    tp += 1
                else:
                    fn += 1
            elif pred is Label.REQUIREMENT:
                fp += 1
            else:
                tn += 1
        return cls(tp, tn, fp, fn)


@dataclass(frozen=True)
class Metrics:
    precision: float | None
    recall: float | None
    f1: float | None


def confusion(predictions: Mapping[str, Label], gold: LabeledDataset) -> ConfusionMatrix:
    """Compare predicted labels (by unit id) with the gold labels.

    Predictions for ids absent from `gold` are ignored; gold ids without a
    prediction raise :class:`MissingPredictionError` listing all of them.
    """
    missing = [u.id for u in gold.units if u.id not in predictions]
    if missing:
        raise MissingPredictionError(missing)
    unlabeled = [u.id for u in gold.units if u.label is None]
    if unlabeled:
        raise ValueError(f"gold units without a label: {', '.join(unlabeled[:10])}")
    return ConfusionMatrix.from_pairs((u.label, predictions[u.id]) for u in gold.units)


def metrics(cm: ConfusionMatrix) -> Metrics:
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else None
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    return Metrics(precision, recall, f1)


def f1_or_zero(cm: ConfusionMatrix) -> float:
    """F1 for model selection, where an undefined score must still rank lowest."""
    f1 = metrics(cm).f1
    return 0.0 if f1 is None else f1


def round_half_up(value: float, places: int = 2) -> Decimal:
    quantum = Decimal(1).scaleb(-places)
    return Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP)


def format_metric(value: float | None) -> str:
    """Two-decimal cell in the results-table style (``.81``); ``n/a`` when undefined."""
    if value is None:
        return "n/a"
    text = str(round_half_up(value))
    return text[1:] if text.startswith("0.") else text


COLUMNS = ("Model", "F1", "P", "R", "TP", "TN", "FP", "FN")


def report_rows(rows: Sequence[tuple[str, ConfusionMatrix]]) -> list[dict]:
    out = []
    for name, cm in rows:
        m = metrics(cm)
        out.append({"model": name, "f1": m.f1, "precision": m.precision, "recall": m.recall,
                    **asdict(cm)})
    return out


def report_text(rows: Sequence[tuple[str, ConfusionMatrix]]) -> str:
    table = [list(COLUMNS)]
    for name, cm in rows:
        m = metrics(cm)
        table.append([name, format_metric(m.f1), format_metric(m.precision), format_metric(m.recall),
                      str(cm.tp), str(cm.tn), str(cm.fp), str(cm.fn)])
    widths = [max(len(r[i]) for r in table) for i in range(len(COLUMNS))]
    lines = []
    for r in table:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def report_json(rows: Sequence[tuple[str, ConfusionMatrix]]) -> str:
    return json.dumps({"rows": report_rows(rows)}, indent=2)


def report(rows: Sequence[tuple[str, ConfusionMatrix]]) -> tuple[str, str]:
    """Aligned text table and its JSON counterpart (full-precision metrics)."""
    return report_text(rows), report_json(rows)
