"""HTTP facade for the expert loop: template editing, refinement review,
evaluation runs, and per-sample verdict inspection.

Single-process, single-tenant. Runs execute one at a time on a background
worker; clients poll run status. All mutations route through the same
library calls the CLI uses, so the two interfaces cannot diverge.
"""

from __future__ import annotations

import json
import queue
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import refine as refine_mod
from .client import FMClient, Mode, ModelConfig
from .datasets import load_crimp_csv, load_crimp_dir, load_mvtec_layout, load_stripped_wire
from .errors import (
    IllegalTransitionError,
    MalformedOutputError,
    NotApprovedError,
    PromptInspectError,
)
from .harness import emit_ablation_report, run_ablation
from .refine import ProposalStatus, RefinementProposal, RefinementRequest
from .template import (
    PromptTemplate,
    Scenario,
    SectionKind,
    TemplateStore,
    load_preset,
    parse_config_label,
)


@dataclass
class Workspace:
    """Everything one expert session needs: scenario, data, stores, models."""

    scenario: Scenario
    dataset_path: Path
    template_dir: Path
    runs_dir: Path
    detector: ModelConfig
    preprocessor: ModelConfig
    ui_dir: Path | None = None
    token: str | None = None

    @classmethod
    def from_json(cls, path: Path | str) -> "Workspace":
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent

        def resolve(p: str) -> Path:
            candidate = Path(p)
            return candidate if candidate.is_absolute() else base / candidate

        def model_config(section: dict) -> ModelConfig:
            known = {
                "endpoint_url",
                "model_id",
                "temperature",
                "max_output_tokens",
                "max_in_flight",
                "api_key_env",
            }
            kwargs = {k: v for k, v in section.items() if k in known}
            mode = Mode(section.get("mode", "live"))
            cache_dir = section.get("cache_dir")
            if cache_dir is not None:
                cache_dir = str(resolve(cache_dir))
            return ModelConfig(mode=mode, cache_dir=cache_dir, **kwargs)

        ui_dir = raw.get("ui_dir")
        return cls(
            scenario=Scenario(raw["scenario"]),
            dataset_path=resolve(raw["dataset"]),
            template_dir=resolve(raw.get("template_dir", "templates")),
            runs_dir=resolve(raw.get("runs_dir", "runs")),
            detector=model_config(raw.get("detector", {})),
            preprocessor=model_config(raw.get("preprocessor", {})),
            ui_dir=resolve(ui_dir) if ui_dir else None,
            token=raw.get("token"),
        )

    def load_bundle(self):
        if self.scenario is Scenario.CRIMP_FEATURES:
            if self.dataset_path.is_dir():
                return load_crimp_dir(self.dataset_path)
            return load_crimp_csv(self.dataset_path)
        if self.scenario is Scenario.STRIPPED_WIRE:
            return load_stripped_wire(self.dataset_path)
        return load_mvtec_layout(self.dataset_path.parent, self.dataset_path.name)


class RunStatus(Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


_STATUS_ORDER = [RunStatus.QUEUED, RunStatus.RUNNING, RunStatus.DONE, RunStatus.FAILED]


@dataclass
class RunHandle:
    run_id: str
    status: RunStatus = RunStatus.QUEUED
    evaluated: int = 0
    total: int = 0
    error: str | None = None
    config_labels: list[str] = field(default_factory=list)
    mode: str = "replay"

    def advance(self, status: RunStatus) -> None:
        if _STATUS_ORDER.index(status) < _STATUS_ORDER.index(self.status):
            raise IllegalTransitionError(f"run {self.run_id}: {self.status} -> {status}")
        self.status = status

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status.value,
            "progress": {"evaluated": self.evaluated, "total": self.total},
            "configs": self.config_labels,
            "mode": self.mode,
            "error": self.error,
        }


def template_to_dict(template: PromptTemplate) -> dict:
    return {
        "version": template.version,
        "provenance": template.provenance,
        "sections": {kind.value: template.body(kind) for kind in SectionKind},
    }


class TemplateBody(BaseModel):
    sections: dict[str, str]


class RefineBody(BaseModel):
    notes: str
    target_sections: list[str] = ["context", "expertise"]


class RunBody(BaseModel):
    scenario: str
    configs: list[str]
    mode: str = "replay"


def create_app(workspace: Workspace) -> FastAPI:
    app = FastAPI(title="promptinspect service")
    store = TemplateStore(workspace.template_dir)
    if not store.versions():
        store.save(load_preset(workspace.scenario))

    proposals: dict[str, RefinementProposal] = {}
    runs: dict[str, RunHandle] = {}
    run_queue: queue.Queue = queue.Queue()
    run_counter = threading.Lock()
    state = {"next_run": 1}

    def worker() -> None:
        while True:
            run_id, configs, mode = run_queue.get()
            handle = runs[run_id]
            try:
                handle.advance(RunStatus.RUNNING)
                bundle = workspace.load_bundle()
                detector_config = ModelConfig(
                    endpoint_url=workspace.detector.endpoint_url,
                    model_id=workspace.detector.model_id,
                    temperature=workspace.detector.temperature,
                    max_output_tokens=workspace.detector.max_output_tokens,
                    max_in_flight=workspace.detector.max_in_flight,
                    mode=mode,
                    cache_dir=workspace.detector.cache_dir,
                    api_key_env=workspace.detector.api_key_env,
                )
                detector = FMClient(detector_config)

                def on_progress(evaluated: int, total: int) -> None:
                    handle.evaluated, handle.total = evaluated, total

                out_dir = workspace.runs_dir / run_id
                rows = run_ablation(
                    bundle,
                    store.current(),
                    configs,
                    detector,
                    records_dir=out_dir / "records",
                    progress=on_progress,
                )
                emit_ablation_report(rows, out_dir)
                bundle.manifest.write_json(out_dir / "manifest.json")
                handle.advance(RunStatus.DONE)
            except Exception as exc:  # surface the failure to pollers
                handle.error = f"{type(exc).__name__}: {exc}"
                handle.advance(RunStatus.FAILED)
            finally:
                run_queue.task_done()

    threading.Thread(target=worker, daemon=True, name="run-worker").start()

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if workspace.token:
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {workspace.token}":
                return JSONResponse({"detail": "missing or bad token"}, status_code=401)
        return await call_next(request)

    @app.exception_handler(PromptInspectError)
    async def domain_error(request: Request, exc: PromptInspectError):
        status = 409 if isinstance(exc, (IllegalTransitionError, NotApprovedError)) else 400
        return JSONResponse({"detail": str(exc)}, status_code=status)

    # --- template -------------------------------------------------------

    @app.get("/template")
    def get_template() -> dict:
        return template_to_dict(store.current())

    @app.put("/template")
    def put_template(body: TemplateBody) -> dict:
        current = store.current()
        try:
            sections = {SectionKind(k): v for k, v in body.sections.items()}
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=f"unknown section: {exc}")
        candidate = PromptTemplate(
            sections={**current.sections, **sections},
            references=current.references,
            version=current.version + 1,
            provenance="manual edit",
        )
        candidate.require_runnable()  # EmptyMandatorySectionError -> 400
        return template_to_dict(store.save(candidate))

    @app.get("/template/history")
    def template_history() -> list[dict]:
        return [{"version": v, "provenance": p} for v, p in store.history()]

    @app.get("/template/{version}")
    def template_version(version: int) -> dict:
        if version not in store.versions():
            raise HTTPException(status_code=404, detail=f"no version {version}")
        return template_to_dict(store.load(version))

    # --- refinement -----------------------------------------------------

    @app.post("/refine")
    def post_refine(body: RefineBody) -> dict:
        if any(p.status is ProposalStatus.PENDING for p in proposals.values()):
            raise HTTPException(status_code=409, detail="a proposal is already pending")
        try:
            request = RefinementRequest(
                notes=body.notes,
                current=store.current(),
                target_sections=tuple(SectionKind(s) for s in body.target_sections),
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        client = FMClient(workspace.preprocessor)
        try:
            proposal = refine_mod.refine(client, request)
        except MalformedOutputError as exc:
            raise HTTPException(status_code=502, detail=f"pre-processor output unusable: {exc}")
        proposals[proposal.id] = proposal
        return proposal_to_dict(proposal, store.current())

    def proposal_to_dict(proposal: RefinementProposal, current: PromptTemplate) -> dict:
        return {
            "id": proposal.id,
            "status": proposal.status.value,
            "rationale": proposal.rationale,
            "base_version": proposal.base_version,
            "proposed": {k.value: v for k, v in proposal.proposed.items()},
            "current": {k.value: current.body(k) for k in proposal.proposed},
        }

    def get_proposal(proposal_id: str) -> RefinementProposal:
        if proposal_id not in proposals:
            raise HTTPException(status_code=404, detail=f"unknown proposal {proposal_id}")
        return proposals[proposal_id]

    @app.get("/proposals/{proposal_id}")
    def proposal_view(proposal_id: str) -> dict:
        return proposal_to_dict(get_proposal(proposal_id), store.current())

    @app.post("/proposals/{proposal_id}/approve")
    def approve_proposal(proposal_id: str) -> dict:
        proposal = get_proposal(proposal_id)
        proposal.approve()  # IllegalTransitionError -> 409
        merged = refine_mod.apply(proposal, store.current())
        return template_to_dict(store.save(merged))

    @app.post("/proposals/{proposal_id}/reject")
    def reject_proposal(proposal_id: str) -> dict:
        proposal = get_proposal(proposal_id)
        proposal.reject()
        return proposal_to_dict(proposal, store.current())

    # --- runs -----------------------------------------------------------

    @app.post("/runs")
    def post_run(body: RunBody) -> dict:
        if Scenario(body.scenario) is not workspace.scenario:
            raise HTTPException(
                status_code=400,
                detail=f"workspace serves scenario {workspace.scenario.value}",
            )
        try:
            configs = [parse_config_label(label) for label in body.configs]
            mode = Mode(body.mode)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if not configs:
            raise HTTPException(status_code=400, detail="configs must be non-empty")
        with run_counter:
            run_id = f"run-{state['next_run']:04d}"
            state["next_run"] += 1
        handle = RunHandle(
            run_id=run_id, config_labels=[c.label for c in configs], mode=mode.value
        )
        runs[run_id] = handle
        run_queue.put((run_id, configs, mode))
        return handle.to_dict()

    @app.get("/runs")
    def list_runs() -> list[dict]:
        return [runs[k].to_dict() for k in sorted(runs)]

    def get_run(run_id: str) -> RunHandle:
        if run_id not in runs:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return runs[run_id]

    @app.get("/runs/{run_id}")
    def run_view(run_id: str) -> dict:
        handle = get_run(run_id)
        payload = handle.to_dict()
        if handle.status is RunStatus.DONE:
            rows = json.loads(
                (workspace.runs_dir / run_id / "rows.json").read_text(encoding="utf-8")
            )
            payload["rows"] = rows
        return payload

    @app.get("/runs/{run_id}/records")
    def run_records(run_id: str, filter: str = "all", config: str | None = None) -> list[dict]:
        handle = get_run(run_id)
        if handle.status is not RunStatus.DONE:
            raise HTTPException(status_code=409, detail=f"run {run_id} is {handle.status.value}")
        records_dir = workspace.runs_dir / run_id / "records"
        wanted = [config] if config else sorted(p.stem for p in records_dir.glob("*.jsonl"))
        out = []
        for label in wanted:
            path = records_dir / f"{label}.jsonl"
            if not path.exists():
                raise HTTPException(status_code=404, detail=f"no records for config {label}")
            for line in path.read_text(encoding="utf-8").splitlines():
                record = json.loads(line)
                record["config"] = label
                parse_failure = "parse_failure" in record["verdict"]
                if filter == "misclassified":
                    if parse_failure:
                        continue
                    if record["verdict"]["classification"] == record["truth"]:
                        continue
                elif filter == "unparseable" and not parse_failure:
                    continue
                out.append(record)
        return out

    if workspace.ui_dir and workspace.ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=workspace.ui_dir, html=True), name="ui")

    return app
