"""Binary classification metrics with the anomalous class as positive.

Unparseable detector outputs never enter the confusion matrix; they are
carried as a separate counter so precision/recall stay honest.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    unparseable: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn, self.unparseable) < 0:
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn + self.unparseable

    def add(self, truth: int, predicted: int | None) -> "ConfusionMatrix":
        """New matrix with one more sample; predicted=None means unparseable."""
        if predicted is None:
            return ConfusionMatrix(self.tp, self.fp, self.fn, self.tn, self.unparseable + 1)
        if truth == 1 and predicted == 1:
            return ConfusionMatrix(self.tp + 1, self.fp, self.fn, self.tn, self.unparseable)
        if truth == 0 and predicted == 1:
            return ConfusionMatrix(self.tp, self.fp + 1, self.fn, self.tn, self.unparseable)
        if truth == 1 and predicted == 0:
            return ConfusionMatrix(self.tp, self.fp, self.fn + 1, self.tn, self.unparseable)
        return ConfusionMatrix(self.tp, self.fp, self.fn, self.tn + 1, self.unparseable)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "unparseable": self.unparseable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConfusionMatrix":
        return cls(**{k: int(d[k]) for k in ("tp", "fp", "fn", "tn", "unparseable")})


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(
            precision=float(d["precision"]),
            recall=float(d["recall"]),
            f1=float(d["f1"]),
            degenerate=bool(d["degenerate"]),
        )


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    """Precision, recall, F1; any 0/0 yields 0.0 and sets the degenerate flag."""
    degenerate = False
    if cm.tp + cm.fp > 0:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision, degenerate = 0.0, True
    if cm.tp + cm.fn > 0:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall, degenerate = 0.0, True
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1, degenerate = 0.0, True
    return Metrics(precision=precision, recall=recall, f1=f1, degenerate=degenerate)
