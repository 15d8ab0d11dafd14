"""Reference ablation metric rows and integer confusion-matrix derivation.

The cable benchmark evaluates 58 good and 92 anomalous test images; the
crimp benchmark evaluates 50 normal and 100 anomalous curves. Given a
row's printed precision/recall (one decimal, in percent), the class
counts pin down an integer confusion matrix; ``derive_matrix`` searches
for the matrix minimizing the worst deviation from the printed pair.
"""

from __future__ import annotations

from dataclasses import dataclass

from promptinspect.metrics import ConfusionMatrix, compute_metrics


@dataclass(frozen=True)
class ReferenceRow:
    key: str
    printed_precision: float
    printed_recall: float
    printed_f1: float
    n_good: int
    n_anomalous: int


CABLE_ROWS = [
    ReferenceRow("cable/zero_shot:Ti_Oi", 97.1, 73.9, 84.0, 58, 92),
    ReferenceRow("cable/zero_shot:Ti_Oi_Ci", 97.5, 83.7, 90.1, 58, 92),
    ReferenceRow("cable/zero_shot:Ti_Oi_Ci_Ei", 98.8, 88.0, 93.1, 58, 92),
    ReferenceRow("cable/one_shot_ok:Ti_Oi", 95.4, 89.1, 92.1, 58, 92),
    ReferenceRow("cable/one_shot_ok:Ti_Oi_Ci", 95.6, 93.5, 94.5, 58, 92),
    ReferenceRow("cable/one_shot_ok:Ti_Oi_Ci_Ei", 95.7, 95.7, 95.7, 58, 92),
]

CRIMP_ROWS = [
    ReferenceRow("crimp/few_shot_ok_3:Ti_Oi", 100.0, 76.0, 86.4, 50, 100),
    ReferenceRow("crimp/few_shot_ok_3:Ti_Oi_Ci", 100.0, 82.0, 90.1, 50, 100),
    ReferenceRow("crimp/few_shot_ok_3:Ti_Oi_Ci_Ei", 100.0, 92.0, 95.8, 50, 100),
]

ALL_ROWS = CABLE_ROWS + CRIMP_ROWS

# metric rows replayed from the committed crimp cache map onto these
CRIMP_EXPECTED_MATRICES = {
    "few_shot_ok_3:Ti_Oi": ConfusionMatrix(tp=76, fp=0, fn=24, tn=50),
    "few_shot_ok_3:Ti_Oi_Ci": ConfusionMatrix(tp=82, fp=0, fn=18, tn=50),
    "few_shot_ok_3:Ti_Oi_Ci_Ei": ConfusionMatrix(tp=92, fp=0, fn=8, tn=50),
}


def derive_matrix(row: ReferenceRow) -> ConfusionMatrix:
    """Integer matrix best matching the printed precision/recall pair."""
    best = None
    best_dev = float("inf")
    for tp in range(row.n_anomalous + 1):
        recall_dev = abs(100.0 * tp / row.n_anomalous - row.printed_recall)
        if recall_dev > best_dev:
            continue
        for fp in range(row.n_good + 1):
            if tp + fp == 0:
                continue
            precision_dev = abs(100.0 * tp / (tp + fp) - row.printed_precision)
            dev = max(recall_dev, precision_dev)
            if dev < best_dev:
                best_dev = dev
                best = ConfusionMatrix(
                    tp=tp, fp=fp, fn=row.n_anomalous - tp, tn=row.n_good - fp
                )
    assert best is not None
    return best


def deviations(row: ReferenceRow, cm: ConfusionMatrix) -> dict[str, float]:
    m = compute_metrics(cm)
    return {
        "precision": abs(m.precision * 100.0 - row.printed_precision),
        "recall": abs(m.recall * 100.0 - row.printed_recall),
        "f1": abs(m.f1 * 100.0 - row.printed_f1),
    }
