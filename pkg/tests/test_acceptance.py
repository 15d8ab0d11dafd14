"""Acceptance gate: every criterion at its stated tolerance and budget.

Each test covers one criterion; the terminal summary (see conftest)
prints one PASS/FAIL line per criterion after the run.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from promptinspect import iforest
from promptinspect.client import FMClient, Mode, ModelConfig, ParseFailure, Usage, Verdict
from promptinspect.datasets import load_crimp_csv, load_mvtec_layout, load_stripped_wire
from promptinspect.features import Curve, auc, extract, slope
from promptinspect.harness import (
    DEFAULT_TRAIN_SIZES,
    OracleDetector,
    RampUpPoint,
    ScoredSample,
    _stratified_split,
    emit_ablation_report,
    holdout_threshold_eval,
    run_ablation,
)
from promptinspect.metrics import ConfusionMatrix, compute_metrics
from promptinspect.rng import SplitMix64, derive_seed
from promptinspect.template import (
    AblationConfig,
    FeatureText,
    ImageRef,
    ReferenceSample,
    SampleRole,
    Scenario,
    ShotKind,
    compose,
    default_ablation_configs,
    load_preset,
    parse_config_label,
)
from stubs import wire_truth_transport
from synth import build_crimp_csv, build_mvtec_tree, build_wire_tree
from table2 import ALL_ROWS, CRIMP_ROWS, derive_matrix, deviations

TOLERANCE_PP = 0.05 + 1e-9


class Budget:
    def __init__(self, seconds: float) -> None:
        self.seconds = seconds
        self.start = time.monotonic()

    def check(self) -> None:
        elapsed = time.monotonic() - self.start
        assert elapsed < self.seconds, f"budget exceeded: {elapsed:.2f}s >= {self.seconds}s"


# --- criterion 1: metric-engine fixture reproduction (< 1 s) -----------------


@pytest.mark.parametrize("row", ALL_ROWS, ids=[r.key for r in ALL_ROWS])
def test_c1_metric_engine_fixture_reproduction(row):
    budget = Budget(1.0)
    cm = derive_matrix(row)
    dev = deviations(row, cm)
    worst = max(dev, key=dev.get)
    assert dev[worst] <= TOLERANCE_PP, (
        f"{row.key}: best integer matrix (tp={cm.tp}, fp={cm.fp}, fn={cm.fn}, tn={cm.tn}) "
        f"deviates {dev[worst]:.4f} pp on {worst}; no matrix over "
        f"{row.n_good} good / {row.n_anomalous} anomalous samples reproduces the printed "
        f"{row.printed_precision}/{row.printed_recall}/{row.printed_f1} within 0.05 pp "
        f"(the printed precision only arises by rounding twice: "
        f"{cm.tp}/{cm.tp + cm.fp} = 95.3488... -> 95.35 -> 95.4)"
    )
    budget.check()


# --- criterion 2: prompt composition byte-exactness (< 1 s) -------------------


def test_c2_prompt_composition_byte_exactness(fixtures_dir):
    budget = Budget(1.0)
    fixtures = json.loads((fixtures_dir / "compose_fixtures.json").read_text(encoding="utf-8"))
    assert len(fixtures) == 21
    images = fixtures_dir / "images"

    crimp_refs = [
        ("ref-1", "SLOPE datapoint 150 to 190: 0.0002982\nAUC datapoint 250 to 300: 31.19105"),
        ("ref-2", "SLOPE datapoint 150 to 190: 0.0009065\nAUC datapoint 250 to 300: 32.40591"),
        ("ref-3", "SLOPE datapoint 150 to 190: 0.0004917\nAUC datapoint 250 to 300: 31.77342"),
    ]

    def references(scenario: Scenario):
        if scenario is Scenario.CRIMP_FEATURES:
            return [
                ReferenceSample(id=rid, role=SampleRole.NON_ANOMALOUS, payload=FeatureText(text))
                for rid, text in crimp_refs
            ]
        refs = [
            ReferenceSample(
                id="ok-ref",
                role=SampleRole.NON_ANOMALOUS,
                payload=ImageRef(str(images / "ok_ref.png"), "image/png"),
            )
        ]
        if scenario is Scenario.STRIPPED_WIRE:
            refs += [
                ReferenceSample(
                    id="bad-pulled",
                    role=SampleRole.ANOMALOUS,
                    payload=ImageRef(str(images / "bad_pulled.png"), "image/png"),
                    defect_class="pulled_strands",
                ),
                ReferenceSample(
                    id="bad-cut",
                    role=SampleRole.ANOMALOUS,
                    payload=ImageRef(str(images / "bad_cut.png"), "image/png"),
                    defect_class="cut_strands",
                ),
            ]
        return refs

    def query(scenario: Scenario):
        if scenario is Scenario.CRIMP_FEATURES:
            return FeatureText(
                "SLOPE datapoint 150 to 190: 0.0004055\nAUC datapoint 250 to 300: 29.2021"
            )
        return ImageRef(str(images / f"query_{scenario.value}.png"), "image/png")

    for key, expected in fixtures.items():
        scenario_name, config_label = key.split("/", 1)
        scenario = Scenario(scenario_name)
        template = load_preset(scenario).with_references(references(scenario))
        prompt = compose(template, parse_config_label(config_label), query(scenario))
        assert prompt.system_text == expected["system_text"], f"system text mismatch for {key}"
        got_parts = [
            {"kind": "text", "text": p.text}
            if p.kind == "text"
            else {
                "kind": "image",
                "name": Path(p.image.path).name,
                "media_type": p.image.media_type,
            }
            for p in prompt.user_parts
        ]
        assert got_parts == expected["user_parts"], f"user parts mismatch for {key}"

    # the bundled instruction texts carry the canonical wording verbatim
    by_key = fixtures["cable/zero_shot:Ti_Oi"]["system_text"]
    assert "You are an anomaly detection assistant." in by_key
    assert 'Respond only with a JSON object like this:' in by_key
    assert '{"Classification": <0 or 1>, "Reasoning": <explanation>}' in by_key
    cable_full = fixtures["cable/zero_shot:Ti_Oi_Ci_Ei"]["system_text"]
    assert "cross-sectional view of a multi-core electrical power cable" in cable_full
    assert "**Poke Insulation**" in cable_full
    assert "Any **single anomaly** is enough to flag the image as faulty." in cable_full
    wire_full = fixtures["stripped_wire/one_shot_binary:Ti_Oi_Ci_Ei"]["system_text"]
    assert "**Pulled Strand(s)**" in wire_full
    crimp_full = fixtures["crimp_features/few_shot_ok_3:Ti_Oi_Ci_Ei"]["system_text"]
    assert "Between data points **150 and 190**" in crimp_full
    assert "area under the curve (AUC)" in crimp_full
    budget.check()


# --- criterion 3: replay determinism (< 10 s) ---------------------------------


def test_c3_replay_determinism(fixtures_dir, tmp_path):
    budget = Budget(10.0)
    bundle = load_crimp_csv(fixtures_dir / "crimp_synth.csv")
    assert len(bundle.test_samples) == 150
    configs = default_ablation_configs(Scenario.CRIMP_FEATURES)
    detector = FMClient(
        ModelConfig(mode=Mode.REPLAY, cache_dir=str(fixtures_dir / "cache"))
    )
    template = load_preset(Scenario.CRIMP_FEATURES)

    outputs = []
    for run_id in ("first", "second"):
        out_dir = tmp_path / run_id
        rows = run_ablation(bundle, template, configs, detector, records_dir=out_dir / "records")
        emit_ablation_report(rows, out_dir)
        outputs.append((out_dir, rows))

    first_dir, rows = outputs[0]
    second_dir, _ = outputs[1]
    for name in ("rows.json", "rows.csv"):
        assert (first_dir / name).read_bytes() == (second_dir / name).read_bytes()
    record_files = sorted(p.name for p in (first_dir / "records").glob("*.jsonl"))
    assert record_files == sorted(p.name for p in (second_dir / "records").glob("*.jsonl"))
    for name in record_files:
        a = (first_dir / "records" / name).read_bytes()
        b = (second_dir / "records" / name).read_bytes()
        assert a == b

    # the committed cache reproduces the reference crimp metric rows
    for row, ref in zip(rows, CRIMP_ROWS):
        assert abs(row.metrics.precision * 100 - ref.printed_precision) <= TOLERANCE_PP
        assert abs(row.metrics.recall * 100 - ref.printed_recall) <= TOLERANCE_PP
        assert abs(row.metrics.f1 * 100 - ref.printed_f1) <= TOLERANCE_PP
    budget.check()


# --- criterion 4: oracle-detector pipeline guard (< 5 s) ----------------------


def test_c4_oracle_detector_pipeline_guard(tmp_path):
    budget = Budget(5.0)
    bundles = []
    build_mvtec_tree(tmp_path / "mvtec")
    bundles.append((Scenario.CABLE, load_mvtec_layout(tmp_path / "mvtec", "cable")))
    build_wire_tree(tmp_path / "wire")
    bundles.append((Scenario.STRIPPED_WIRE, load_stripped_wire(tmp_path / "wire")))
    csv_path = build_crimp_csv(tmp_path / "crimp.csv", n_ok=8, n_missing=4, n_insulation=4)
    bundles.append((Scenario.CRIMP_FEATURES, load_crimp_csv(csv_path)))

    for scenario, bundle in bundles:
        detector = OracleDetector({s.id: s.label for s in bundle.test_samples})
        rows = run_ablation(
            bundle, load_preset(scenario), default_ablation_configs(scenario), detector
        )
        for row in rows:
            assert row.metrics.precision == 1.0, (scenario, row.config_label)
            assert row.metrics.recall == 1.0, (scenario, row.config_label)
            assert row.metrics.f1 == 1.0, (scenario, row.config_label)
    budget.check()


# --- criterion 5: feature extraction oracles (< 5 s) --------------------------


def _slope_oracle(values, a, b):
    n = 0
    sx = sy = sxx = sxy = 0.0
    for i in range(a, b + 1):
        n += 1
        sx += i
        sy += values[i]
        sxx += i * i
        sxy += i * values[i]
    return (n * sxy - sx * sy) / (n * sxx - sx * sx)


def _auc_oracle(values, a, b):
    total = 0.0
    for i in range(a, b):
        total += 0.5 * (values[i] + values[i + 1])
    return total


def test_c5_feature_extraction_oracles():
    budget = Budget(5.0)
    flat = Curve(values=tuple([4.25] * 500), id="flat")
    assert slope(flat, 150, 190) == 0.0
    assert auc(flat, 250, 300) == 4.25 * 50

    linear = Curve(values=tuple(3.0 * i for i in range(500)), id="linear")
    assert slope(linear, 150, 190) == pytest.approx(3.0, abs=1e-12)
    assert auc(linear, 250, 300) == pytest.approx((750.0 + 900.0) / 2.0 * 50.0, abs=1e-9)

    rng = np.random.default_rng(123)
    for _ in range(1000):
        values = rng.normal(rng.uniform(-5, 5), rng.uniform(0.5, 10), size=500)
        curve = Curve(values=tuple(values), id="r")
        fv = extract(curve)
        assert fv.slope_150_190 == pytest.approx(
            _slope_oracle(values, 150, 190), rel=1e-9, abs=1e-12
        )
        assert fv.auc_250_300 == pytest.approx(
            _auc_oracle(values, 250, 300), rel=1e-9, abs=1e-12
        )
    budget.check()


# --- criterion 6: isolation forest (< 30 s) ------------------------------------


def test_c6_isolation_forest():
    budget = Budget(30.0)
    # (a) normalization constant
    assert iforest.avg_path_length(1) == 0.0
    assert iforest.avg_path_length(2) == 1.0
    assert iforest.avg_path_length(256) == pytest.approx(10.2448, abs=1e-3)

    # (b) scores stay in the open unit interval over 10,000 random queries
    rng = np.random.default_rng(2025)
    inliers = rng.normal(0.0, 1.0, size=(200, 2))
    angles = 2.0 * np.pi * np.arange(10) / 10.0
    outliers = 100.0 * np.column_stack([np.cos(angles), np.sin(angles)])
    outliers = outliers + rng.normal(0.0, 1.0, size=(10, 2))
    forest = iforest.fit(np.vstack([inliers[:90], outliers]), iforest.ForestParams(rng_seed=7))
    queries = rng.normal(0.0, 5.0, size=(10_000, 2))
    scores = iforest.score_many(forest, queries)
    assert np.all(scores > 0.0) and np.all(scores < 1.0)

    # (c) grid-searched forest on the seeded cluster + 10 far outliers
    x = np.vstack([inliers, outliers])
    y = np.array([0] * 200 + [1] * 10)
    train = np.vstack([inliers[:90], outliers])
    best_c, metrics = iforest.grid_search(
        train, x, y, iforest.CONTAMINATION_GRID, iforest.ForestParams(n_trees=100, rng_seed=7)
    )
    assert metrics.f1 >= 0.95
    assert best_c in iforest.CONTAMINATION_GRID
    inlier_scores = iforest.score_many(forest, inliers)
    outlier_scores = iforest.score_many(forest, outliers)
    assert outlier_scores.min() > inlier_scores.max()

    # (d) seeded fits are bit-identical serial vs parallel
    params = iforest.ForestParams(n_trees=60, rng_seed=99)
    serial = iforest.fit(x, params, n_jobs=1)
    parallel = iforest.fit(x, params, n_jobs=8)
    assert serial.trees == parallel.trees
    assert serial.score_threshold == parallel.score_threshold
    assert np.array_equal(serial.train_scores, parallel.train_scores)
    budget.check()


# --- criterion 7: ramp-up protocol (< 60 s) -------------------------------------


def test_c7_rampup_protocol(tmp_path):
    budget = Budget(60.0)
    from promptinspect.cli import main

    csv_path = build_crimp_csv(
        tmp_path / "crimp_rampup.csv", n_ok=215, n_missing=60, n_insulation=60, seed=424242
    )
    seed = 5
    code = main(
        [
            "bench-if",
            "--crimp-csv",
            str(csv_path),
            "--seed",
            str(seed),
            "--out-dir",
            str(tmp_path / "runs"),
            "--run-id",
            "rampup",
        ]
    )
    assert code == 0
    payload = json.loads((tmp_path / "runs" / "rampup" / "points.json").read_text())
    points = [RampUpPoint.from_dict(d) for d in payload["points"]]

    sizes = [p.train_size for p in points]
    assert sizes == sorted(DEFAULT_TRAIN_SIZES)
    grid = set(iforest.CONTAMINATION_GRID)
    assert all(p.chosen_c in grid for p in points)

    # independently scripted per-size oracle run
    bundle = load_crimp_csv(csv_path)
    curves = [bundle.curves[s.id] for s in bundle.samples]
    x = np.array([[fv.slope_150_190, fv.auc_250_300] for fv in map(extract, curves)])
    y = np.array([c.label for c in curves])
    normals = np.flatnonzero(y == 0)
    for point in points:
        size = point.train_size
        sampler = SplitMix64(derive_seed(seed, size, 0))
        chosen = normals[np.asarray(sampler.sample_indices(normals.size, size))]
        held_out = np.ones(len(x), dtype=bool)
        held_out[chosen] = False
        params = iforest.ForestParams(
            n_trees=100, rng_seed=derive_seed(seed, size, 1), contamination=0.10
        )
        best_c, metrics = iforest.grid_search(
            x[chosen], x[held_out], y[held_out], list(iforest.CONTAMINATION_GRID), params
        )
        assert point == RampUpPoint(train_size=size, metrics=metrics, chosen_c=best_c)
    budget.check()


# --- criterion 8: holdout thresholding (< 10 s) -----------------------------------


def test_c8_holdout_thresholding():
    budget = Budget(10.0)
    separated = [ScoredSample(f"n{i}", 0.25, 0) for i in range(40)]
    separated += [ScoredSample(f"a{i}", 0.75, 1) for i in range(40)]
    assert holdout_threshold_eval(separated, 0.2, rng_seed=3).f1 == 1.0

    rng = np.random.default_rng(99)
    for trial in range(500):
        n_neg = int(rng.integers(5, 25))
        n_pos = int(rng.integers(5, 25))
        scores = [
            ScoredSample(f"n{i}", float(np.round(rng.normal(0.0, 1.0), 3)), 0)
            for i in range(n_neg)
        ]
        scores += [
            ScoredSample(f"a{i}", float(np.round(rng.normal(1.0, 1.0), 3)), 1)
            for i in range(n_pos)
        ]
        metrics = holdout_threshold_eval(scores, 0.3, rng_seed=trial)

        validation, holdout = _stratified_split(scores, 0.3, rng_seed=trial)
        best_t, best_f1 = None, -1.0
        for t in sorted({s.score for s in validation}):
            tp = fp = fn = 0
            for s in validation:
                predicted = 1 if s.score > t else 0
                tp += predicted and s.label
                fp += predicted and not s.label
                fn += (not predicted) and s.label
            f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
            if f1 > best_f1:
                best_t, best_f1 = t, f1
        cm = ConfusionMatrix()
        for s in holdout:
            cm = cm.add(s.label, int(s.score > best_t))
        assert metrics == compute_metrics(cm), f"trial {trial}"
    budget.check()


# --- criterion 9: malformed-output handling (< 1 s) --------------------------------


def test_c9_malformed_output_handling(tmp_path):
    budget = Budget(1.0)

    fenced = '```json\n{"Classification": 1, "Reasoning": "fenced but valid"}\n```'
    eventually_valid = '{"Classification": 0, "Reasoning": "valid on retry"}'
    responses = {
        "fenced-sample": [fenced],
        "flaky-sample": ["<<not json>>", eventually_valid],
        "broken-sample": ["<<not json>>", "<<still not json>>"],
    }
    calls = {k: 0 for k in responses}

    def transport(wire_body):
        text = json.dumps(wire_body)
        for sample_id, scripted in responses.items():
            if sample_id in text:
                raw = scripted[min(calls[sample_id], len(scripted) - 1)]
                calls[sample_id] += 1
                return raw, Usage(5, 5)
        raise AssertionError("unknown sample in request")

    client = FMClient(ModelConfig(), transport=transport)
    template = load_preset(Scenario.CRIMP_FEATURES)
    config = AblationConfig(include_context=False, include_expertise=False, shot=ShotKind.ZERO_SHOT)

    records = {}
    for sample_id in responses:
        prompt = compose(template, config, FeatureText(f"query for {sample_id}"))
        records[sample_id] = client.classify(prompt, sample_id)

    assert records["fenced-sample"].verdict == Verdict(1, "fenced but valid")
    assert not records["fenced-sample"].retried
    assert records["flaky-sample"].verdict == Verdict(0, "valid on retry")
    assert records["flaky-sample"].retried
    assert records["broken-sample"].verdict == ParseFailure("<<still not json>>")
    assert records["broken-sample"].retried
    assert calls == {"fenced-sample": 1, "flaky-sample": 2, "broken-sample": 2}

    # parse failures count separately and never enter the confusion matrix
    csv_path = build_crimp_csv(tmp_path / "c.csv", n_ok=6, n_missing=3, n_insulation=3)
    bundle = load_crimp_csv(csv_path)
    fail_ids = frozenset(sorted(s.id for s in bundle.test_samples)[:2])
    detector = FMClient(
        ModelConfig(), transport=wire_truth_transport(bundle, fail_ids=fail_ids)
    )
    rows = run_ablation(
        bundle, template, default_ablation_configs(Scenario.CRIMP_FEATURES)[:1], detector
    )
    row = rows[0]
    assert row.unparseable == 2
    assert row.cm.tp + row.cm.fp + row.cm.fn + row.cm.tn == len(bundle.test_samples) - 2
    assert row.cm.total == len(bundle.test_samples)
    budget.check()
