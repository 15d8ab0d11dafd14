import csv
import json

import numpy as np
import pytest

from promptinspect.cli import main
from promptinspect.client import FMClient, Mode, ModelConfig
from promptinspect.datasets import load_crimp_csv
from promptinspect.harness import run_ablation
from promptinspect.template import default_ablation_configs, load_preset
from stubs import wire_truth_transport
from synth import build_crimp_csv


@pytest.fixture()
def recorded_crimp(tmp_path):
    csv_path = build_crimp_csv(tmp_path / "crimp.csv", n_ok=8, n_missing=4, n_insulation=4)
    bundle = load_crimp_csv(csv_path)
    cache_dir = tmp_path / "cache"
    recorder = FMClient(
        ModelConfig(mode=Mode.RECORD, cache_dir=str(cache_dir)),
        transport=wire_truth_transport(bundle),
    )
    run_ablation(
        bundle, load_preset("crimp_features"), default_ablation_configs("crimp_features"), recorder
    )
    return csv_path, cache_dir


class TestAblateCommand:
    def test_replay_run_writes_reports(self, recorded_crimp, tmp_path, capsys):
        csv_path, cache_dir = recorded_crimp
        out_dir = tmp_path / "runs"
        code = main(
            [
                "ablate",
                "--scenario",
                "crimp_features",
                "--dataset",
                str(csv_path),
                "--mode",
                "replay",
                "--cache-dir",
                str(cache_dir),
                "--out-dir",
                str(out_dir),
                "--run-id",
                "trial",
            ]
        )
        assert code == 0
        rows = json.loads((out_dir / "trial" / "rows.json").read_text())
        assert len(rows) == 3
        assert all(r["metrics"]["f1"] == 1.0 for r in rows)
        assert (out_dir / "trial" / "manifest.json").exists()
        assert (out_dir / "trial" / "records").is_dir()
        assert "F1=100.0%" in capsys.readouterr().out

    def test_replay_twice_is_byte_identical(self, recorded_crimp, tmp_path):
        csv_path, cache_dir = recorded_crimp
        argv = lambda run_id: [
            "ablate",
            "--scenario",
            "crimp_features",
            "--dataset",
            str(csv_path),
            "--mode",
            "replay",
            "--cache-dir",
            str(cache_dir),
            "--out-dir",
            str(tmp_path / "runs"),
            "--run-id",
            run_id,
        ]
        main(argv("a"))
        main(argv("b"))
        for name in ("rows.json", "rows.csv"):
            a = (tmp_path / "runs" / "a" / name).read_bytes()
            b = (tmp_path / "runs" / "b" / name).read_bytes()
            assert a == b


class TestBenchIfCommand:
    def test_rampup_report(self, tmp_path, capsys):
        csv_path = build_crimp_csv(tmp_path / "crimp.csv", n_ok=40, n_missing=15, n_insulation=15)
        code = main(
            [
                "bench-if",
                "--crimp-csv",
                str(csv_path),
                "--sizes",
                "5,10,20",
                "--trees",
                "50",
                "--seed",
                "11",
                "--out-dir",
                str(tmp_path / "runs"),
                "--run-id",
                "bench",
                "--benchmark",
                "few_shot_full=1.0,0.92,0.958",
            ]
        )
        assert code == 0
        points_csv = (tmp_path / "runs" / "bench" / "points.csv").read_text().splitlines()
        assert points_csv[0].startswith("train_size,")
        assert "benchmark_few_shot_full_f1" in points_csv[0]
        assert len(points_csv) == 4
        payload = json.loads((tmp_path / "runs" / "bench" / "points.json").read_text())
        assert [p["train_size"] for p in payload["points"]] == [5, 10, 20]
        grid = {0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50}
        assert all(p["chosen_c"] in grid for p in payload["points"])


class TestBenchScoresCommand:
    def test_holdout_metrics(self, tmp_path, capsys):
        rng = np.random.default_rng(5)
        path = tmp_path / "scores.csv"
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["sample_id", "score", "label"])
            for i in range(30):
                writer.writerow([f"n{i}", rng.uniform(0.0, 0.3), 0])
            for i in range(30):
                writer.writerow([f"a{i}", rng.uniform(0.7, 1.0), 1])
        out = tmp_path / "metrics.json"
        code = main(
            ["bench-scores", "--scores", str(path), "--val-fraction", "0.2", "--seed", "3", "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["f1"] == 1.0


class TestReportCommand:
    def test_rewrites_csv_from_json(self, recorded_crimp, tmp_path):
        csv_path, cache_dir = recorded_crimp
        out_dir = tmp_path / "runs"
        main(
            [
                "ablate",
                "--scenario",
                "crimp_features",
                "--dataset",
                str(csv_path),
                "--mode",
                "replay",
                "--cache-dir",
                str(cache_dir),
                "--out-dir",
                str(out_dir),
                "--run-id",
                "r1",
            ]
        )
        rows_csv = out_dir / "r1" / "rows.csv"
        original = rows_csv.read_bytes()
        rows_csv.unlink()
        assert main(["report", "--run-dir", str(out_dir / "r1")]) == 0
        assert rows_csv.read_bytes() == original

    def test_missing_inputs_fail(self, tmp_path):
        assert main(["report", "--run-dir", str(tmp_path)]) == 2


class TestRefineCommand:
    def test_refine_approve_via_flag(self, tmp_path, monkeypatch, capsys):
        from promptinspect.refine import RefinementRequest, build_meta_request
        from promptinspect.client import Usage
        from promptinspect.template import Scenario, SectionKind, load_preset

        response = "```context\nnew context\n```\n```expertise\nnew rules\n```\nRATIONALE: testing.\n"
        cache_dir = tmp_path / "cache"
        request = RefinementRequest(
            notes="note about tolerance",
            current=load_preset(Scenario.CABLE),
            target_sections=(SectionKind.CONTEXT, SectionKind.EXPERTISE),
        )
        recorder = FMClient(
            ModelConfig(mode=Mode.RECORD, cache_dir=str(cache_dir), model_id="pre"),
            transport=lambda body: (response, Usage(1, 1)),
        )
        recorder.send(build_meta_request(request, recorder.config))

        code = main(
            [
                "refine",
                "--template-dir",
                str(tmp_path / "templates"),
                "--scenario",
                "cable",
                "--notes",
                "note about tolerance",
                "--mode",
                "replay",
                "--cache-dir",
                str(cache_dir),
                "--model-id",
                "pre",
                "--yes",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "template is now v2" in out
        from promptinspect.template import TemplateStore

        store = TemplateStore(tmp_path / "templates")
        assert store.current().body(SectionKind.EXPERTISE) == "new rules"
