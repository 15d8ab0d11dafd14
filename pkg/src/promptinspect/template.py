"""Instruction template: four prompt sections plus low-shot reference data.

A template holds one body per section kind (Task, Context, Expertise,
Output) and an ordered list of reference samples. Composition selects the
active sections and references according to an ablation configuration and
produces a deterministic system text plus an ordered list of labeled user
parts, ending with the test sample.

Templates are immutable; every refinement produces a new version. The
on-disk format is a plain UTF-8 text file with ``#section:`` header lines
so process engineers can read and edit it without tooling.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import (
    EmptyMandatorySectionError,
    MissingReferenceError,
    OverrideRequiredError,
)


class SectionKind(Enum):
    TASK = "task"
    CONTEXT = "context"
    EXPERTISE = "expertise"
    OUTPUT = "output"


SECTION_ORDER = (
    SectionKind.TASK,
    SectionKind.CONTEXT,
    SectionKind.EXPERTISE,
    SectionKind.OUTPUT,
)

SECTION_HEADERS = {
    SectionKind.TASK: "TASK INSTRUCTION:",
    SectionKind.CONTEXT: "CONTEXT INSTRUCTION:",
    SectionKind.EXPERTISE: "EXPERTISE INSTRUCTION:",
    SectionKind.OUTPUT: "OUTPUT INSTRUCTION:",
}

OK_SAMPLE_LABEL = "NON-ANOMALOUS-SAMPLE:"
ANOMALOUS_SAMPLES_LABEL = "ANOMALOUS-SAMPLES:"
TEST_SAMPLE_LABEL = "TEST-SAMPLE:"
FEATURE_REFERENCE_HEADER = "REFERENCE DATA:"


class SampleRole(Enum):
    NON_ANOMALOUS = "non_anomalous"
    ANOMALOUS = "anomalous"


@dataclass(frozen=True)
class ImageRef:
    path: str
    media_type: str


@dataclass(frozen=True)
class FeatureText:
    text: str


Payload = ImageRef | FeatureText


@dataclass(frozen=True)
class ReferenceSample:
    id: str
    role: SampleRole
    payload: Payload
    defect_class: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.payload, (ImageRef, FeatureText)):
            raise TypeError("payload must be an ImageRef or FeatureText")
        if self.role is SampleRole.NON_ANOMALOUS and self.defect_class is not None:
            raise ValueError("non-anomalous references carry no defect class")


class ShotKind(Enum):
    ZERO_SHOT = "zero_shot"
    ONE_SHOT_OK = "one_shot_ok"
    FEW_SHOT_OK = "few_shot_ok"
    ONE_SHOT_BINARY = "one_shot_binary"


@dataclass(frozen=True)
class AblationConfig:
    include_context: bool
    include_expertise: bool
    shot: ShotKind
    k: int = 1  # number of non-anomalous references for FEW_SHOT_OK

    def __post_init__(self) -> None:
        if self.shot is ShotKind.FEW_SHOT_OK and self.k < 1:
            raise ValueError("few-shot needs k >= 1")

    @property
    def label(self) -> str:
        sections = "Ti_Oi"
        if self.include_context:
            sections += "_Ci"
        if self.include_expertise:
            sections += "_Ei"
        shot = self.shot.value
        if self.shot is ShotKind.FEW_SHOT_OK:
            shot += f"_{self.k}"
        return f"{shot}:{sections}"


def parse_config_label(label: str) -> AblationConfig:
    """Inverse of AblationConfig.label, e.g. ``one_shot_ok:Ti_Oi_Ci``."""
    shot_part, _, sections = label.partition(":")
    if not sections:
        raise ValueError(f"bad config label {label!r}")
    k = 1
    m = re.fullmatch(r"few_shot_ok_(\d+)", shot_part)
    if m:
        shot = ShotKind.FEW_SHOT_OK
        k = int(m.group(1))
    else:
        shot = ShotKind(shot_part)
    tokens = sections.split("_")
    if tokens[:2] != ["Ti", "Oi"] or not set(tokens[2:]) <= {"Ci", "Ei"}:
        raise ValueError(f"bad section tokens in config label {label!r}")
    return AblationConfig(
        include_context="Ci" in tokens[2:],
        include_expertise="Ei" in tokens[2:],
        shot=shot,
        k=k,
    )


@dataclass(frozen=True)
class PromptTemplate:
    sections: dict[SectionKind, str]
    references: tuple[ReferenceSample, ...] = ()
    version: int = 1
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "sections", dict(self.sections))
        object.__setattr__(self, "references", tuple(self.references))

    def body(self, kind: SectionKind) -> str:
        return self.sections.get(kind, "")

    def require_runnable(self) -> None:
        for kind in (SectionKind.TASK, SectionKind.OUTPUT):
            if not self.body(kind).strip():
                raise EmptyMandatorySectionError(f"{kind.value} section must be non-empty")

    def with_references(self, references) -> "PromptTemplate":
        return replace(self, references=tuple(references))


@dataclass(frozen=True)
class PromptPart:
    """One labeled user-message part: either text or an image reference."""

    kind: str  # "text" | "image"
    text: str | None = None
    image: ImageRef | None = None

    @staticmethod
    def of_text(text: str) -> "PromptPart":
        return PromptPart(kind="text", text=text)

    @staticmethod
    def of_image(image: ImageRef) -> "PromptPart":
        return PromptPart(kind="image", image=image)


@dataclass(frozen=True)
class ComposedPrompt:
    system_text: str
    user_parts: tuple[PromptPart, ...]


def _select_references(
    template: PromptTemplate, config: AblationConfig
) -> list[ReferenceSample]:
    if config.shot is ShotKind.ZERO_SHOT:
        return []
    ok = [r for r in template.references if r.role is SampleRole.NON_ANOMALOUS]
    bad = [r for r in template.references if r.role is SampleRole.ANOMALOUS]
    if config.shot is ShotKind.ONE_SHOT_OK:
        if not ok:
            raise MissingReferenceError("one-shot needs a non-anomalous reference")
        return ok[:1]
    if config.shot is ShotKind.FEW_SHOT_OK:
        if len(ok) < config.k:
            raise MissingReferenceError(
                f"few-shot k={config.k} but only {len(ok)} non-anomalous references"
            )
        return ok[: config.k]
    # ONE_SHOT_BINARY: one good sample plus every anomalous reference
    if not ok or not bad:
        raise MissingReferenceError(
            "binary classification needs both non-anomalous and anomalous references"
        )
    return ok[:1] + bad


def _image_reference_parts(refs: list[ReferenceSample]) -> list[PromptPart]:
    parts: list[PromptPart] = []
    anomalous_heading_done = False
    for ref in refs:
        if ref.role is SampleRole.NON_ANOMALOUS:
            parts.append(PromptPart.of_text(OK_SAMPLE_LABEL))
            parts.append(PromptPart.of_image(ref.payload))
        else:
            if not anomalous_heading_done:
                parts.append(PromptPart.of_text(ANOMALOUS_SAMPLES_LABEL))
                anomalous_heading_done = True
            parts.append(PromptPart.of_image(ref.payload))
    return parts


def _feature_reference_parts(refs: list[ReferenceSample]) -> list[PromptPart]:
    entries = []
    ok_count = 0
    bad_count = 0
    for ref in refs:
        if ref.role is SampleRole.NON_ANOMALOUS:
            ok_count += 1
            entries.append(f"- Non-anomalous sample {ok_count}\n{ref.payload.text}")
        else:
            bad_count += 1
            entries.append(f"- Anomalous sample {bad_count}\n{ref.payload.text}")
    block = "\n\n".join([FEATURE_REFERENCE_HEADER] + entries)
    return [PromptPart.of_text(block)]


def compose(template: PromptTemplate, config: AblationConfig, query: Payload) -> ComposedPrompt:
    """Deterministically assemble the full prompt for one test sample.

    Active sections are joined with one blank line in the fixed order
    Task, Context, Expertise, Output, each under its canonical header.
    Empty or disabled sections are omitted with no placeholder. All
    reference parts precede the test sample part.
    """
    template.require_runnable()

    active: list[str] = []
    for kind in SECTION_ORDER:
        if kind is SectionKind.CONTEXT and not config.include_context:
            continue
        if kind is SectionKind.EXPERTISE and not config.include_expertise:
            continue
        body = template.body(kind)
        if not body.strip():
            continue
        active.append(f"{SECTION_HEADERS[kind]}\n\n{body}")
    system_text = "\n\n".join(active)

    refs = _select_references(template, config)
    image_refs = [r for r in refs if isinstance(r.payload, ImageRef)]
    feature_refs = [r for r in refs if isinstance(r.payload, FeatureText)]

    parts: list[PromptPart] = []
    parts.extend(_image_reference_parts(image_refs))
    if feature_refs:
        parts.extend(_feature_reference_parts(feature_refs))

    parts.append(PromptPart.of_text(TEST_SAMPLE_LABEL))
    if isinstance(query, ImageRef):
        parts.append(PromptPart.of_image(query))
    else:
        parts.append(PromptPart.of_text(query.text))

    return ComposedPrompt(system_text=system_text, user_parts=tuple(parts))


def merge_refinement(
    current: PromptTemplate,
    proposal: dict[SectionKind, str],
    allow_protected: bool = False,
    provenance: str = "",
) -> PromptTemplate:
    """New template version with the proposed section bodies swapped in.

    Only Context and Expertise may be replaced unless ``allow_protected``
    is set; untouched sections are carried over byte-identically. Merges
    replace whole sections, never individual lines.
    """
    protected = {SectionKind.TASK, SectionKind.OUTPUT}
    touched_protected = protected & set(proposal)
    if touched_protected and not allow_protected:
        names = ", ".join(sorted(k.value for k in touched_protected))
        raise OverrideRequiredError(f"refusing to touch protected section(s): {names}")
    sections = dict(current.sections)
    sections.update(proposal)
    return PromptTemplate(
        sections=sections,
        references=current.references,
        version=current.version + 1,
        provenance=provenance,
    )


# --- on-disk format ---------------------------------------------------------

_SECTION_LINE = re.compile(r"^#section:\s*(task|context|expertise|output)\s*$")
_REFS_LINE = re.compile(r"^#references\s*$")
_META_LINE = re.compile(r"^#(version|provenance):\s?(.*)$")


def serialize_sections(template: PromptTemplate) -> str:
    """Section headers plus bodies, the human-readable instruction view."""
    chunks = []
    for kind in SECTION_ORDER:
        body = template.body(kind)
        if body.strip():
            chunks.append(f"{SECTION_HEADERS[kind]}\n\n{body}")
    return "\n\n".join(chunks)


def serialize_template(template: PromptTemplate) -> str:
    lines = [f"#version: {template.version}"]
    if template.provenance:
        lines.append(f"#provenance: {template.provenance}")
    for kind in SECTION_ORDER:
        body = template.body(kind)
        if body:
            lines.append(f"#section: {kind.value}")
            lines.append(body)
    if template.references:
        lines.append("#references")
        for ref in template.references:
            lines.append(_serialize_reference(ref))
    return "\n".join(lines) + "\n"


def _serialize_reference(ref: ReferenceSample) -> str:
    fields = [f"id={ref.id}", f"role={ref.role.value}"]
    if ref.defect_class:
        fields.append(f"defect={ref.defect_class}")
    if isinstance(ref.payload, ImageRef):
        fields.append(f"image={ref.payload.path}")
        fields.append(f"media={ref.payload.media_type}")
    else:
        fields.append("feature_text=" + ref.payload.text.replace("\n", "\\n"))
    return "| " + " | ".join(fields)


def _parse_reference(line: str) -> ReferenceSample:
    body = line.lstrip("|").strip()
    kv: dict[str, str] = {}
    for chunk in body.split(" | "):
        key, _, value = chunk.partition("=")
        kv[key.strip()] = value
    payload: Payload
    if "image" in kv:
        payload = ImageRef(path=kv["image"], media_type=kv.get("media", "image/png"))
    else:
        payload = FeatureText(text=kv["feature_text"].replace("\\n", "\n"))
    return ReferenceSample(
        id=kv["id"],
        role=SampleRole(kv["role"]),
        payload=payload,
        defect_class=kv.get("defect"),
    )


def parse_template(text: str) -> PromptTemplate:
    version = 1
    provenance = ""
    sections: dict[SectionKind, str] = {}
    references: list[ReferenceSample] = []
    current_kind: SectionKind | None = None
    current_body: list[str] = []
    in_refs = False

    def flush() -> None:
        nonlocal current_kind, current_body
        if current_kind is not None:
            body = "\n".join(current_body)
            sections[current_kind] = body.rstrip("\n")
        current_kind, current_body = None, []

    for line in text.splitlines():
        meta = _META_LINE.match(line)
        section = _SECTION_LINE.match(line)
        if _REFS_LINE.match(line):
            flush()
            in_refs = True
        elif section:
            flush()
            in_refs = False
            current_kind = SectionKind(section.group(1))
        elif meta and current_kind is None and not in_refs:
            if meta.group(1) == "version":
                version = int(meta.group(2))
            else:
                provenance = meta.group(2)
        elif in_refs:
            if line.strip():
                references.append(_parse_reference(line))
        elif current_kind is not None:
            current_body.append(line)
    flush()
    return PromptTemplate(
        sections=sections,
        references=tuple(references),
        version=version,
        provenance=provenance,
    )


class TemplateStore:
    """Append-only directory of template versions, one file per version.

    Merges are serialized through a single writer lock; earlier versions
    are never rewritten, so fetching version v after creating v+1 returns
    the original bytes.
    """

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, version: int) -> Path:
        return self.root / f"v{version:04d}.txt"

    def versions(self) -> list[int]:
        return sorted(int(p.stem[1:]) for p in self.root.glob("v*.txt"))

    def save(self, template: PromptTemplate) -> PromptTemplate:
        with self._lock:
            stored = self.versions()
            if stored and template.version != stored[-1] + 1:
                raise ValueError(
                    f"version must increase by one (stored {stored[-1]}, got {template.version})"
                )
            path = self._path(template.version)
            if path.exists():
                raise ValueError(f"version {template.version} already stored")
            path.write_text(serialize_template(template), encoding="utf-8")
            return template

    def load(self, version: int) -> PromptTemplate:
        return parse_template(self._path(version).read_text(encoding="utf-8"))

    def load_bytes(self, version: int) -> bytes:
        return self._path(version).read_bytes()

    def current(self) -> PromptTemplate:
        versions = self.versions()
        if not versions:
            raise FileNotFoundError(f"no template versions under {self.root}")
        return self.load(versions[-1])

    def history(self) -> list[tuple[int, str]]:
        return [(v, self.load(v).provenance) for v in self.versions()]


# --- bundled scenario presets ------------------------------------------------


class Scenario(Enum):
    CABLE = "cable"
    STRIPPED_WIRE = "stripped_wire"
    CRIMP_FEATURES = "crimp_features"


def load_preset(scenario: Scenario | str) -> PromptTemplate:
    """Template preset for one of the three bundled inspection scenarios."""
    scenario = Scenario(scenario)
    text = (
        resources.files("promptinspect")
        .joinpath(f"presets/{scenario.value}.txt")
        .read_text(encoding="utf-8")
    )
    return parse_template(text)


def load_guidelines() -> str:
    """Bundled prompt-writing guidelines fed to the refinement model."""
    return (
        resources.files("promptinspect")
        .joinpath("presets/guidelines.txt")
        .read_text(encoding="utf-8")
    )


def default_ablation_configs(scenario: Scenario | str) -> list[AblationConfig]:
    """The standard ablation grid for a scenario: per shot mode, the three
    information depths Ti_Oi, Ti_Oi_Ci, Ti_Oi_Ci_Ei."""
    scenario = Scenario(scenario)
    shots = {
        Scenario.CABLE: [(ShotKind.ZERO_SHOT, 1), (ShotKind.ONE_SHOT_OK, 1)],
        Scenario.STRIPPED_WIRE: [
            (ShotKind.ZERO_SHOT, 1),
            (ShotKind.ONE_SHOT_OK, 1),
            (ShotKind.ONE_SHOT_BINARY, 1),
        ],
        Scenario.CRIMP_FEATURES: [(ShotKind.FEW_SHOT_OK, 3)],
    }[scenario]
    configs = []
    for shot, k in shots:
        for ci, ei in ((False, False), (True, False), (True, True)):
            configs.append(
                AblationConfig(include_context=ci, include_expertise=ei, shot=shot, k=k)
            )
    return configs


def template_digest(template: PromptTemplate) -> str:
    return hashlib.sha256(serialize_template(template).encode("utf-8")).hexdigest()
