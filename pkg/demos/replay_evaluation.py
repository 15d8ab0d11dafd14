"""Record a scripted detector once, then replay the whole ablation offline.

Uses the committed synthetic crimp dataset and response cache under
tests/fixtures/, so no network and no API key are involved.

Run:  python demos/replay_evaluation.py
"""

import tempfile
from pathlib import Path

from promptinspect import FMClient, Mode, ModelConfig, load_crimp_csv
from promptinspect.harness import emit_ablation_report, run_ablation
from promptinspect.template import default_ablation_configs, load_preset

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

bundle = load_crimp_csv(FIXTURES / "crimp_synth.csv")
counts = bundle.manifest.to_dict()["counts"]
print(f"dataset: {len(bundle.samples)} curves, {len(bundle.test_samples)} in the test split")
print(f"counts: {counts}")

detector = FMClient(ModelConfig(mode=Mode.REPLAY, cache_dir=str(FIXTURES / "cache")))
template = load_preset("crimp_features")
configs = default_ablation_configs("crimp_features")

with tempfile.TemporaryDirectory() as out:
    rows = run_ablation(bundle, template, configs, detector, records_dir=Path(out) / "records")
    emit_ablation_report(rows, out)
    print(f"\n{'config':36} {'precision':>10} {'recall':>8} {'F1':>8} {'in-tokens':>10} {'out-mean':>9}")
    for row in rows:
        m = row.metrics
        print(
            f"{row.config_label:36} {m.precision * 100:9.1f}% {m.recall * 100:7.1f}% "
            f"{m.f1 * 100:7.1f}% {row.input_tokens_total:10d} {row.output_tokens_mean:9.1f}"
        )
    print(f"\nreports written to {out} (rows.csv, rows.json, records/)")
    print("replaying is deterministic: run this script twice and diff the CSVs")
