"""Command-line entry points.

Subcommands:
  ablate       run the ablation protocol for a scenario dataset
  bench-if     isolation-forest ramp-up benchmark on crimp curves
  bench-scores threshold an external score set via validation holdout
  report       re-emit CSV/JSON reports from a finished run directory
  refine       turn expert notes into a reviewed template update
  serve        start the HTTP workbench service
"""

from __future__ import annotations

import argparse
import difflib
import json
import sys
import time
from pathlib import Path

from . import iforest, refine as refine_mod
from .client import FMClient, Mode, ModelConfig
from .datasets import (
    downscale_images,
    load_crimp_csv,
    load_crimp_dir,
    load_mvtec_layout,
    load_stripped_wire,
    override_references,
)
from .features import extract
from .harness import (
    DEFAULT_TRAIN_SIZES,
    emit_ablation_report,
    emit_rampup_report,
    holdout_threshold_eval,
    load_score_csv,
    ramp_up,
    read_ablation_report,
    read_rampup_report,
    run_ablation,
)
from .metrics import Metrics
from .refine import RefinementRequest
from .template import (
    Scenario,
    SectionKind,
    TemplateStore,
    default_ablation_configs,
    load_preset,
    parse_config_label,
)


def add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=[m.value for m in Mode], default="live")
    parser.add_argument("--cache-dir", default=None, help="response cache (record/replay)")
    parser.add_argument("--endpoint-url", default=ModelConfig.endpoint_url)
    parser.add_argument("--model-id", default=ModelConfig.model_id)
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--max-output-tokens", type=int, default=512)
    parser.add_argument("--max-in-flight", type=int, default=4)
    parser.add_argument("--api-key-env", default="FM_API_KEY")


def model_config_from(args: argparse.Namespace) -> ModelConfig:
    return ModelConfig(
        endpoint_url=args.endpoint_url,
        model_id=args.model_id,
        temperature=args.temperature,
        max_output_tokens=args.max_output_tokens,
        max_in_flight=args.max_in_flight,
        mode=Mode(args.mode),
        cache_dir=args.cache_dir,
        api_key_env=args.api_key_env,
    )


def load_scenario_bundle(scenario: Scenario, dataset: Path):
    if scenario is Scenario.CRIMP_FEATURES:
        return load_crimp_dir(dataset) if dataset.is_dir() else load_crimp_csv(dataset)
    if scenario is Scenario.STRIPPED_WIRE:
        return load_stripped_wire(dataset)
    return load_mvtec_layout(dataset.parent, dataset.name)


def cmd_ablate(args: argparse.Namespace) -> int:
    scenario = Scenario(args.scenario)
    bundle = load_scenario_bundle(scenario, Path(args.dataset))
    if args.reference_ids:
        bundle = override_references(bundle, args.reference_ids.split(","))
    if args.max_image_dim:
        bundle = downscale_images(bundle, Path(args.out_dir) / "resized", args.max_image_dim)
    if args.configs:
        configs = [parse_config_label(label) for label in args.configs.split(",")]
    else:
        configs = default_ablation_configs(scenario)
    if args.template_dir:
        template = TemplateStore(args.template_dir).current()
    else:
        template = load_preset(scenario)
    detector = FMClient(model_config_from(args))

    run_id = args.run_id or time.strftime("%Y%m%d-%H%M%S")
    out_dir = Path(args.out_dir) / run_id
    rows = run_ablation(bundle, template, configs, detector, records_dir=out_dir / "records")
    emit_ablation_report(rows, out_dir)
    bundle.manifest.write_json(out_dir / "manifest.json")
    for row in rows:
        m = row.metrics
        print(
            f"{row.config_label:36s} P={m.precision * 100:5.1f}% R={m.recall * 100:5.1f}% "
            f"F1={m.f1 * 100:5.1f}% unparseable={row.unparseable}"
        )
    print(f"report written to {out_dir}")
    return 0


def _parse_benchmark(spec: str) -> tuple[str, Metrics]:
    name, _, triple = spec.partition("=")
    parts = [float(v) for v in triple.split(",")]
    if len(parts) != 3:
        raise ValueError(f"benchmark overlay {spec!r} must be name=P,R,F1")
    return name, Metrics(precision=parts[0], recall=parts[1], f1=parts[2])


def cmd_bench_if(args: argparse.Namespace) -> int:
    bundle = load_crimp_csv(Path(args.crimp_csv))
    curves = [bundle.curves[s.id] for s in bundle.samples]
    features = [[fv.slope_150_190, fv.auc_250_300] for fv in map(extract, curves)]
    labels = [c.label for c in curves]

    sizes = (
        [int(s) for s in args.sizes.split(",")] if args.sizes else list(DEFAULT_TRAIN_SIZES)
    )
    grid = [float(c) for c in args.grid.split(",")] if args.grid else list(iforest.CONTAMINATION_GRID)
    params = iforest.ForestParams(n_trees=args.trees, rng_seed=args.seed)
    points = ramp_up(features, labels, sorted(sizes), params, grid, args.seed)

    benchmarks = dict(_parse_benchmark(spec) for spec in args.benchmark or [])
    run_id = args.run_id or time.strftime("%Y%m%d-%H%M%S")
    out_dir = Path(args.out_dir) / run_id
    emit_rampup_report(points, out_dir, benchmarks)
    for p in points:
        m = p.metrics
        print(
            f"n={p.train_size:4d} C={p.chosen_c:.2f} P={m.precision * 100:5.1f}% "
            f"R={m.recall * 100:5.1f}% F1={m.f1 * 100:5.1f}%"
        )
    print(f"report written to {out_dir}")
    return 0


def cmd_bench_scores(args: argparse.Namespace) -> int:
    scores = load_score_csv(Path(args.scores))
    metrics = holdout_threshold_eval(scores, args.val_fraction, args.seed)
    payload = metrics.to_dict()
    print(json.dumps(payload, indent=1))
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    if (run_dir / "rows.json").exists():
        rows = read_ablation_report(run_dir)
        emit_ablation_report(rows, run_dir)
        print(f"rewrote rows.csv with {len(rows)} row(s) in {run_dir}")
    elif (run_dir / "points.json").exists():
        points, benchmarks = read_rampup_report(run_dir)
        emit_rampup_report(points, run_dir, benchmarks)
        print(f"rewrote points.csv with {len(points)} point(s) in {run_dir}")
    else:
        print(f"no rows.json or points.json under {run_dir}", file=sys.stderr)
        return 2
    return 0


def cmd_refine(args: argparse.Namespace) -> int:
    store = TemplateStore(args.template_dir)
    if not store.versions():
        store.save(load_preset(Scenario(args.scenario)))
    current = store.current()
    targets = tuple(SectionKind(s) for s in args.targets.split(","))
    request = RefinementRequest(notes=args.notes, current=current, target_sections=targets)
    client = FMClient(model_config_from(args))
    proposal = refine_mod.refine(client, request)

    print(f"proposal {proposal.id} against template v{current.version}")
    for kind, body in proposal.proposed.items():
        diff = difflib.unified_diff(
            current.body(kind).splitlines(),
            body.splitlines(),
            fromfile=f"{kind.value} (v{current.version})",
            tofile=f"{kind.value} (proposed)",
            lineterm="",
        )
        print()
        print("\n".join(diff) or f"--- {kind.value}: unchanged ---")
    print(f"\nrationale: {proposal.rationale}")

    if args.yes:
        answer = "y"
    else:
        answer = input("approve? [y/N] ").strip().lower()
    if answer == "y":
        proposal.approve()
        merged = store.save(refine_mod.apply(proposal, current))
        print(f"approved; template is now v{merged.version}")
    else:
        proposal.reject()
        print(f"rejected; template stays at v{current.version}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import Workspace, create_app

    workspace = Workspace.from_json(Path(args.workspace))
    app = create_app(workspace)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptinspect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ablate = sub.add_parser("ablate", help="run the scenario ablation protocol")
    ablate.add_argument("--scenario", required=True, choices=[s.value for s in Scenario])
    ablate.add_argument("--dataset", required=True, help="dataset root dir or crimp CSV")
    ablate.add_argument("--configs", default=None, help="comma list of config labels")
    ablate.add_argument(
        "--reference-ids",
        default=None,
        help="comma list of sample ids to use as references instead of the first-file rule",
    )
    ablate.add_argument("--template-dir", default=None, help="template store (default: preset)")
    ablate.add_argument("--out-dir", default="runs")
    ablate.add_argument("--run-id", default=None)
    ablate.add_argument("--max-image-dim", type=int, default=0, help="downscale images (off=0)")
    add_model_args(ablate)
    ablate.set_defaults(func=cmd_ablate)

    bench_if = sub.add_parser("bench-if", help="isolation forest ramp-up benchmark")
    bench_if.add_argument("--crimp-csv", required=True)
    bench_if.add_argument("--sizes", default=None, help="comma list of training sizes")
    bench_if.add_argument("--grid", default=None, help="comma list of contamination values")
    bench_if.add_argument("--trees", type=int, default=100)
    bench_if.add_argument("--seed", type=int, default=0)
    bench_if.add_argument(
        "--benchmark",
        action="append",
        metavar="NAME=P,R,F1",
        help="fixed overlay line(s) from an ablation run",
    )
    bench_if.add_argument("--out-dir", default="runs")
    bench_if.add_argument("--run-id", default=None)
    bench_if.set_defaults(func=cmd_bench_if)

    bench_scores = sub.add_parser("bench-scores", help="holdout-threshold an external score set")
    bench_scores.add_argument("--scores", required=True, help="CSV: sample_id,score,label")
    bench_scores.add_argument("--val-fraction", type=float, default=0.2)
    bench_scores.add_argument("--seed", type=int, default=0)
    bench_scores.add_argument("--out", default=None, help="optional metrics JSON path")
    bench_scores.set_defaults(func=cmd_bench_scores)

    report = sub.add_parser("report", help="re-emit reports from a run directory")
    report.add_argument("--run-dir", required=True)
    report.set_defaults(func=cmd_report)

    refine_cmd = sub.add_parser("refine", help="expert-notes template refinement")
    refine_cmd.add_argument("--template-dir", required=True)
    refine_cmd.add_argument("--scenario", default="cable", choices=[s.value for s in Scenario])
    refine_cmd.add_argument("--notes", required=True)
    refine_cmd.add_argument("--targets", default="context,expertise")
    refine_cmd.add_argument("--yes", action="store_true", help="approve without prompting")
    add_model_args(refine_cmd)
    refine_cmd.set_defaults(func=cmd_refine)

    serve = sub.add_parser("serve", help="start the workbench HTTP service")
    serve.add_argument("--workspace", required=True, help="workspace.json path")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
