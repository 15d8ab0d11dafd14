"""Evaluation harness: ablation runs, ramp-up benchmark, score thresholding.

The ablation driver composes one prompt per test sample and per
configuration, classifies through any detector exposing
``classify(prompt, sample_id)``, and aggregates confusion counts and token
statistics into one row per configuration. Unparseable verdicts are
counted separately and never enter the confusion matrix.

The ramp-up benchmark trains the isolation forest on growing numbers of
normal-only samples and reports grid-searched metrics per training size,
which is how a data-driven baseline is compared against an
instruction-driven detector under data scarcity.
"""

from __future__ import annotations

import csv
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import iforest
from .client import DetectionRecord, Verdict
from .datasets import DatasetBundle, ImageSource, SampleRecord
from .errors import DegenerateSplitError, InsufficientNormalsError
from .features import extract, feature_lines
from .metrics import ConfusionMatrix, Metrics, compute_metrics
from .rng import SplitMix64, derive_seed
from .template import (
    AblationConfig,
    FeatureText,
    ImageRef,
    Payload,
    PromptTemplate,
    ReferenceSample,
    SampleRole,
    compose,
)


@dataclass(frozen=True)
class AblationRow:
    config_label: str
    cm: ConfusionMatrix
    metrics: Metrics
    input_tokens_total: int
    output_tokens_mean: float
    unparseable: int

    def to_dict(self) -> dict:
        return {
            "config": self.config_label,
            "cm": self.cm.to_dict(),
            "metrics": self.metrics.to_dict(),
            "input_tokens_total": self.input_tokens_total,
            "output_tokens_mean": self.output_tokens_mean,
            "unparseable": self.unparseable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AblationRow":
        return cls(
            config_label=d["config"],
            cm=ConfusionMatrix.from_dict(d["cm"]),
            metrics=Metrics.from_dict(d["metrics"]),
            input_tokens_total=int(d["input_tokens_total"]),
            output_tokens_mean=float(d["output_tokens_mean"]),
            unparseable=int(d["unparseable"]),
        )


@dataclass(frozen=True)
class RampUpPoint:
    train_size: int
    metrics: Metrics
    chosen_c: float

    def to_dict(self) -> dict:
        return {
            "train_size": self.train_size,
            "metrics": self.metrics.to_dict(),
            "chosen_c": self.chosen_c,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RampUpPoint":
        return cls(
            train_size=int(d["train_size"]),
            metrics=Metrics.from_dict(d["metrics"]),
            chosen_c=float(d["chosen_c"]),
        )


@dataclass(frozen=True)
class ScoredSample:
    sample_id: str
    score: float
    label: int


# --- prompt assembly from a dataset -------------------------------------------


def _reference_payload(bundle: DatasetBundle, sample: SampleRecord) -> Payload:
    if isinstance(sample.source, ImageSource):
        return ImageRef(path=sample.source.path, media_type=sample.source.media_type)
    return FeatureText(text=feature_lines(extract(bundle.curves[sample.source.curve_id])))


def references_from_bundle(bundle: DatasetBundle) -> list[ReferenceSample]:
    """Reference-split samples as composable reference payloads."""
    refs = []
    for sample in bundle.reference_samples:
        refs.append(
            ReferenceSample(
                id=sample.id,
                role=SampleRole.NON_ANOMALOUS if sample.label == 0 else SampleRole.ANOMALOUS,
                payload=_reference_payload(bundle, sample),
                defect_class=sample.defect_class,
            )
        )
    return refs


def query_payload(bundle: DatasetBundle, sample: SampleRecord) -> Payload:
    return _reference_payload(bundle, sample)


# --- ablation driver ------------------------------------------------------------


class _ProgressProxy:
    """Counts finished classifications and forwards them to a callback."""

    def __init__(self, detector, callback, total: int) -> None:
        self._detector = detector
        self._callback = callback
        self._total = total
        self._done = 0
        self._lock = threading.Lock()
        self.max_in_flight = getattr(detector, "max_in_flight", 1)

    def classify(self, prompt, sample_id):
        record = self._detector.classify(prompt, sample_id)
        with self._lock:
            self._done += 1
            done = self._done
        self._callback(done, self._total)
        return record


def _classify_all(detector, jobs: list[tuple[str, object]]) -> list[DetectionRecord]:
    max_workers = getattr(detector, "max_in_flight", 1)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(
                pool.map(lambda job: detector.classify(job[1], job[0]), jobs)
            )
    else:
        records = [detector.classify(prompt, sample_id) for sample_id, prompt in jobs]
    return sorted(records, key=lambda r: r.sample_id)


def run_ablation(
    bundle: DatasetBundle,
    template: PromptTemplate,
    configs: list[AblationConfig],
    detector,
    records_dir: Path | str | None = None,
    progress=None,
) -> list[AblationRow]:
    """One row per configuration over the bundle's test split.

    References always come from the bundle's reference split, so reference
    samples are never also evaluated as queries. Per-sample records are
    written to ``records_dir`` (one JSONL per configuration, ordered by
    sample id) for later inspection of individual verdicts. ``progress``
    is called as ``progress(evaluated, total)`` after every sample.
    """
    template = template.with_references(references_from_bundle(bundle))
    labels = {s.id: s.label for s in bundle.test_samples}
    if progress is not None:
        detector = _ProgressProxy(detector, progress, len(configs) * len(bundle.test_samples))
    rows: list[AblationRow] = []
    for config in configs:
        jobs = [
            (sample.id, compose(template, config, query_payload(bundle, sample)))
            for sample in sorted(bundle.test_samples, key=lambda s: s.id)
        ]
        records = _classify_all(detector, jobs)

        cm = ConfusionMatrix()
        input_tokens = 0
        output_tokens = 0
        for record in records:
            predicted = (
                record.verdict.classification if isinstance(record.verdict, Verdict) else None
            )
            cm = cm.add(labels[record.sample_id], predicted)
            input_tokens += record.usage.input_tokens
            output_tokens += record.usage.output_tokens

        rows.append(
            AblationRow(
                config_label=config.label,
                cm=cm,
                metrics=compute_metrics(cm),
                input_tokens_total=input_tokens,
                output_tokens_mean=output_tokens / len(records) if records else 0.0,
                unparseable=cm.unparseable,
            )
        )
        if records_dir is not None:
            records_dir = Path(records_dir)
            records_dir.mkdir(parents=True, exist_ok=True)
            lines = [
                json.dumps(
                    {**record.to_dict(), "truth": labels[record.sample_id]}, sort_keys=True
                )
                for record in records
            ]
            (records_dir / f"{config.label}.jsonl").write_text(
                "\n".join(lines) + "\n", encoding="utf-8"
            )
    return rows


class OracleDetector:
    """Stub that answers the ground-truth label; pipeline correctness guard."""

    max_in_flight = 1

    def __init__(self, labels: dict[str, int]) -> None:
        self.labels = labels

    def classify(self, prompt, sample_id: str) -> DetectionRecord:
        from .client import Usage

        return DetectionRecord(
            sample_id=sample_id,
            verdict=Verdict(classification=self.labels[sample_id], reasoning="ground truth"),
            usage=Usage(0, 0),
            latency_ms=0.0,
            cache_hit=True,
        )


# --- isolation forest ramp-up ----------------------------------------------------


def ramp_up(
    features,
    labels,
    train_sizes: list[int],
    params: iforest.ForestParams,
    grid,
    rng_seed: int,
) -> list[RampUpPoint]:
    """Per training size: sample normals, fit, grid-search C, evaluate.

    Training vectors are drawn without replacement from the normal-labeled
    vectors under a per-size derived seed; metrics are computed on every
    vector not used for training. C selection on that evaluation set
    follows the benchmark protocol and is knowingly optimistic.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    normal_indices = np.flatnonzero(y == 0)
    if max(train_sizes) > normal_indices.size:
        raise InsufficientNormalsError(
            f"need {max(train_sizes)} normal samples, have {normal_indices.size}"
        )
    points: list[RampUpPoint] = []
    for size in train_sizes:
        rng = SplitMix64(derive_seed(rng_seed, size, 0))
        chosen = normal_indices[np.asarray(rng.sample_indices(normal_indices.size, size))]
        held_out = np.ones(x.shape[0], dtype=bool)
        held_out[chosen] = False
        fit_params = iforest.ForestParams(
            n_trees=params.n_trees,
            subsample_size=params.subsample_size,
            rng_seed=derive_seed(rng_seed, size, 1),
            contamination=params.contamination,
        )
        best_c, metrics = iforest.grid_search(
            x[chosen], x[held_out], y[held_out], grid, fit_params
        )
        points.append(RampUpPoint(train_size=size, metrics=metrics, chosen_c=best_c))
    return points


# --- external score sets (deep baselines enter here) -------------------------------


def load_score_csv(path: Path | str) -> list[ScoredSample]:
    """CSV columns: sample_id, score, label."""
    out = []
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            out.append(
                ScoredSample(
                    sample_id=row["sample_id"],
                    score=float(row["score"]),
                    label=int(row["label"]),
                )
            )
    return out


def _stratified_split(
    scores: list[ScoredSample], val_fraction: float, rng_seed: int
) -> tuple[list[ScoredSample], list[ScoredSample]]:
    if not (0.0 < val_fraction < 1.0):
        raise ValueError("val_fraction must be in (0, 1)")
    validation: list[ScoredSample] = []
    holdout: list[ScoredSample] = []
    for label in (0, 1):
        group = sorted((s for s in scores if s.label == label), key=lambda s: s.sample_id)
        if not group:
            raise DegenerateSplitError(f"score set has no samples with label {label}")
        rng = SplitMix64(derive_seed(rng_seed, label))
        rng.shuffle(group)
        n_val = int(round(val_fraction * len(group)))
        if n_val == 0 or n_val == len(group):
            raise DegenerateSplitError(
                f"label {label}: validation fraction {val_fraction} leaves an empty split"
            )
        validation.extend(group[:n_val])
        holdout.extend(group[n_val:])
    return validation, holdout


def _best_threshold(validation: list[ScoredSample]) -> float:
    """Validation score value maximizing F1 under a strict > decision;
    ties break toward the lower threshold."""
    values = np.array([s.score for s in validation])
    labels = np.array([s.label for s in validation])
    total_pos = int(labels.sum())
    candidates = np.unique(values)  # ascending
    best_t = candidates[0]
    best_f1 = -1.0
    for t in candidates:
        pred = values > t
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        fn = total_pos - tp
        f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0
        if f1 > best_f1:
            best_f1 = f1
            best_t = t
    return float(best_t)


def holdout_threshold_eval(
    scores: list[ScoredSample], val_fraction: float, rng_seed: int
) -> Metrics:
    """Stratified validation split picks the threshold; metrics come from
    the untouched holdout remainder."""
    validation, holdout = _stratified_split(scores, val_fraction, rng_seed)
    threshold = _best_threshold(validation)
    cm = ConfusionMatrix()
    for s in holdout:
        cm = cm.add(s.label, int(s.score > threshold))
    return compute_metrics(cm)


# --- report emission ------------------------------------------------------------


def emit_ablation_report(rows: list[AblationRow], out_dir: Path | str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "rows.json"
    json_path.write_text(
        json.dumps([r.to_dict() for r in rows], indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    csv_path = out_dir / "rows.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            [
                "config",
                "precision",
                "recall",
                "f1",
                "tp",
                "fp",
                "fn",
                "tn",
                "unparseable",
                "input_tokens_total",
                "output_tokens_mean",
            ]
        )
        for r in rows:
            writer.writerow(
                [
                    r.config_label,
                    f"{r.metrics.precision:.6f}",
                    f"{r.metrics.recall:.6f}",
                    f"{r.metrics.f1:.6f}",
                    r.cm.tp,
                    r.cm.fp,
                    r.cm.fn,
                    r.cm.tn,
                    r.unparseable,
                    r.input_tokens_total,
                    f"{r.output_tokens_mean:.4f}",
                ]
            )
    return [csv_path, json_path]


def read_ablation_report(out_dir: Path | str) -> list[AblationRow]:
    data = json.loads((Path(out_dir) / "rows.json").read_text(encoding="utf-8"))
    return [AblationRow.from_dict(d) for d in data]


def emit_rampup_report(
    points: list[RampUpPoint],
    out_dir: Path | str,
    benchmarks: dict[str, Metrics] | None = None,
) -> list[Path]:
    """Plot-ready CSV plus JSON; benchmark overlays repeat on every row so
    the file can be plotted directly against the ramp-up curve."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    benchmarks = benchmarks or {}
    payload = {
        "points": [p.to_dict() for p in points],
        "benchmarks": {name: m.to_dict() for name, m in benchmarks.items()},
    }
    json_path = out_dir / "points.json"
    json_path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    header = ["train_size", "precision", "recall", "f1", "chosen_c"]
    for name in sorted(benchmarks):
        header.extend([f"benchmark_{name}_precision", f"benchmark_{name}_recall", f"benchmark_{name}_f1"])
    csv_path = out_dir / "points.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for p in points:
            row = [
                p.train_size,
                f"{p.metrics.precision:.6f}",
                f"{p.metrics.recall:.6f}",
                f"{p.metrics.f1:.6f}",
                f"{p.chosen_c:.2f}",
            ]
            for name in sorted(benchmarks):
                m = benchmarks[name]
                row.extend([f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}"])
            writer.writerow(row)
    return [csv_path, json_path]


def read_rampup_report(out_dir: Path | str) -> tuple[list[RampUpPoint], dict[str, Metrics]]:
    payload = json.loads((Path(out_dir) / "points.json").read_text(encoding="utf-8"))
    points = [RampUpPoint.from_dict(d) for d in payload["points"]]
    benchmarks = {name: Metrics.from_dict(d) for name, d in payload["benchmarks"].items()}
    return points, benchmarks


DEFAULT_TRAIN_SIZES = [5, 10] + list(range(20, 201, 10))
