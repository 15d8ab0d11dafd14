"""Regenerates the committed test fixtures under tests/fixtures/.

Outputs:
  images/                 stable stand-in images for composition fixtures
  compose_fixtures.json   expected composed prompts per scenario/config
  crimp_synth.csv         153 synthetic crimp curves (53 ok / 50 / 50)
  cache/                  recorded detector + pre-processor responses
  workbench_flow.json     constants shared with the browser workbench test

The detector cache scripts one false negative set per configuration so the
replayed ablation reproduces the reference confusion matrices
(76/0/24/50, 82/0/18/50, 92/0/8/50 over 50 normal + 100 anomalous test
samples). Run from the repository root:  python scripts/gen_fixtures.py
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from stubs import wire_truth_transport  # noqa: E402
from synth import build_crimp_csv, write_stub_image  # noqa: E402

from promptinspect.client import FMClient, Mode, ModelConfig, Usage  # noqa: E402
from promptinspect.datasets import load_crimp_csv  # noqa: E402
from promptinspect.features import FeatureVector, feature_lines  # noqa: E402
from promptinspect.harness import run_ablation  # noqa: E402
from promptinspect.refine import RefinementRequest, build_meta_request  # noqa: E402
from promptinspect.template import (  # noqa: E402
    AblationConfig,
    FeatureText,
    ImageRef,
    ReferenceSample,
    SampleRole,
    Scenario,
    SectionKind,
    ShotKind,
    compose,
    load_preset,
    merge_refinement,
)

FIXTURES = REPO / "tests" / "fixtures"

# drives the scripted false-negative sets; nested so deeper instruction
# depth recovers more anomalies
FALSE_NEGATIVES = {"Ti_Oi": 24, "Ti_Oi_Ci": 18, "Ti_Oi_Ci_Ei": 8}

CRIMP_REF_FEATURES = [
    ("ref-1", FeatureVector(0.0002982, 31.19105)),
    ("ref-2", FeatureVector(0.0009065, 32.40591)),
    ("ref-3", FeatureVector(0.0004917, 31.77342)),
]
CRIMP_QUERY = FeatureVector(0.0004055, 29.2021)

WORKBENCH_EDITED_EXPERTISE = (
    "Focus on the two monitored regions.\n"
    "- Slope 150-190 must stay close to the reference band.\n"
    "- AUC 250-300 below the weakest reference is anomalous.\n"
    "- Tool resets may shift curves by one or two points; ignore that."
)
WORKBENCH_NOTES = (
    "after today's tool change the press builds force slightly later; "
    "small index shifts are fine but a weak force plateau is still bad"
)
WORKBENCH_REFINE_RESPONSE = (
    "```expertise\n"
    "Judge the TEST-SAMPLE only on the two monitored regions.\n"
    "1. Slope between data points 150 and 190: anomalous when clearly steeper "
    "than every reference sample.\n"
    "2. Area under the curve between data points 250 and 300: anomalous when "
    "below the weakest reference sample.\n"
    "Index shifts of one or two points after a tool change are normal; a weak "
    "force plateau is anomalous regardless of shift.\n"
    "```\n"
    "RATIONALE: merges the tool-change tolerance note into the region rules "
    "without loosening the plateau criterion.\n"
)


def scenario_references(scenario: Scenario, images: Path) -> list[ReferenceSample]:
    if scenario is Scenario.CRIMP_FEATURES:
        return [
            ReferenceSample(
                id=rid,
                role=SampleRole.NON_ANOMALOUS,
                payload=FeatureText(feature_lines(fv)),
            )
            for rid, fv in CRIMP_REF_FEATURES
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


def scenario_query(scenario: Scenario, images: Path):
    if scenario is Scenario.CRIMP_FEATURES:
        return FeatureText(feature_lines(CRIMP_QUERY))
    return ImageRef(str(images / f"query_{scenario.value}.png"), "image/png")


def fixture_shots(scenario: Scenario) -> list[tuple[ShotKind, int]]:
    return {
        Scenario.CABLE: [(ShotKind.ZERO_SHOT, 1), (ShotKind.ONE_SHOT_OK, 1)],
        Scenario.STRIPPED_WIRE: [
            (ShotKind.ZERO_SHOT, 1),
            (ShotKind.ONE_SHOT_OK, 1),
            (ShotKind.ONE_SHOT_BINARY, 1),
        ],
        Scenario.CRIMP_FEATURES: [(ShotKind.ZERO_SHOT, 1), (ShotKind.FEW_SHOT_OK, 3)],
    }[scenario]


def part_to_json(part, images: Path) -> dict:
    if part.kind == "text":
        return {"kind": "text", "text": part.text}
    return {
        "kind": "image",
        "name": Path(part.image.path).name,
        "media_type": part.image.media_type,
    }


def gen_images(images: Path) -> None:
    for name in ("ok_ref", "bad_pulled", "bad_cut", "query_cable", "query_stripped_wire"):
        write_stub_image(images / f"{name}.png", name)


def gen_compose_fixtures(images: Path) -> None:
    fixtures = {}
    for scenario in Scenario:
        template = load_preset(scenario).with_references(scenario_references(scenario, images))
        query = scenario_query(scenario, images)
        for shot, k in fixture_shots(scenario):
            for ci, ei in ((False, False), (True, False), (True, True)):
                config = AblationConfig(include_context=ci, include_expertise=ei, shot=shot, k=k)
                prompt = compose(template, config, query)
                fixtures[f"{scenario.value}/{config.label}"] = {
                    "system_text": prompt.system_text,
                    "user_parts": [part_to_json(p, images) for p in prompt.user_parts],
                }
    out = FIXTURES / "compose_fixtures.json"
    out.write_text(json.dumps(fixtures, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(fixtures)} composed prompts)")


def gen_detector_cache(cache_dir: Path) -> None:
    csv_path = FIXTURES / "crimp_synth.csv"
    build_crimp_csv(csv_path, n_ok=53, n_missing=50, n_insulation=50, seed=20250801)
    print(f"wrote {csv_path}")

    bundle = load_crimp_csv(csv_path)
    anomalous = sorted(s.id for s in bundle.test_samples if s.label == 1)
    # interleave the two defect families so misses span both
    ci_ids = [s for s in anomalous if s.startswith("ci_")]
    ms_ids = [s for s in anomalous if s.startswith("ms_")]
    interleaved = [x for pair in zip(ci_ids, ms_ids) for x in pair]

    template = load_preset(Scenario.CRIMP_FEATURES)
    for sections, n_miss in FALSE_NEGATIVES.items():
        ci = "Ci" in sections
        ei = "Ei" in sections
        config = AblationConfig(include_context=ci, include_expertise=ei, shot=ShotKind.FEW_SHOT_OK, k=3)
        flips = frozenset(interleaved[:n_miss])
        recorder = FMClient(
            ModelConfig(mode=Mode.RECORD, cache_dir=str(cache_dir)),
            transport=wire_truth_transport(bundle, flip_ids=flips),
        )
        rows = run_ablation(bundle, template, [config], recorder)
        cm = rows[0].cm
        print(f"recorded {config.label}: tp={cm.tp} fp={cm.fp} fn={cm.fn} tn={cm.tn}")


def gen_workbench_fixture(cache_dir: Path) -> None:
    # mirror the scripted browser flow: preset -> manual Ei edit -> refine
    v1 = load_preset(Scenario.CRIMP_FEATURES)
    v2 = merge_refinement(
        v1, {SectionKind.EXPERTISE: WORKBENCH_EDITED_EXPERTISE}, provenance="manual edit"
    )
    request = RefinementRequest(
        notes=WORKBENCH_NOTES, current=v2, target_sections=(SectionKind.EXPERTISE,)
    )
    recorder = FMClient(
        ModelConfig(mode=Mode.RECORD, cache_dir=str(cache_dir), model_id="pre"),
        transport=lambda body: (WORKBENCH_REFINE_RESPONSE, Usage(len(json.dumps(body)) // 4, 90)),
    )
    recorder.send(build_meta_request(request, recorder.config))

    out = FIXTURES / "workbench_flow.json"
    out.write_text(
        json.dumps(
            {
                "edited_expertise": WORKBENCH_EDITED_EXPERTISE,
                "notes": WORKBENCH_NOTES,
                "refine_response": WORKBENCH_REFINE_RESPONSE,
                "run_configs": ["few_shot_ok_3:Ti_Oi"],
            },
            indent=1,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {out}")


def main() -> None:
    if FIXTURES.exists():
        shutil.rmtree(FIXTURES)
    images = FIXTURES / "images"
    images.mkdir(parents=True)
    cache_dir = FIXTURES / "cache"

    gen_images(images)
    gen_compose_fixtures(images)
    gen_detector_cache(cache_dir)
    gen_workbench_fixture(cache_dir)
    n_cache = len(list(cache_dir.glob("*.json")))
    print(f"cache entries: {n_cache}")


if __name__ == "__main__":
    main()
