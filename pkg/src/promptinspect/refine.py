"""Turns a process expert's free-text notes into reviewed template updates.

A dedicated model rewrites the targeted instruction sections; its answer
is parsed into a proposal that a human must approve before it can touch
the template. Proposals move Pending -> Approved or Pending -> Rejected,
one way only, and only an approved proposal can produce a new template
version.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from enum import Enum

from .client import ChatMessage, ChatRequest, FMClient, Role, TextPart
from .errors import IllegalTransitionError, MalformedOutputError, NotApprovedError
from .template import (
    PromptTemplate,
    SectionKind,
    load_guidelines,
    merge_refinement,
    serialize_sections,
)

REWRITABLE_SECTIONS = (SectionKind.CONTEXT, SectionKind.EXPERTISE)

META_INSTRUCTION = (
    "Refine and formalize the process engineer's instructions into a clear, "
    "structured prompt suitable for a vision-language model acting as an "
    "anomaly detector in manufacturing domain.\n\n"
    "Use the given prompt template: {template_schema}\n\n"
    "Consider the prompt engineering guidelines:\n{guidelines}\n\n"
    "Adjust the current instruction prompt, if available:\n{current_prompt}"
)

TEMPLATE_SCHEMA = (
    "four instruction sections in fixed order - TASK INSTRUCTION (the "
    "objective), CONTEXT INSTRUCTION (background a non-expert can supply), "
    "EXPERTISE INSTRUCTION (expert decision rules), OUTPUT INSTRUCTION "
    "(response format) - optionally followed by REFERENCE DATA samples."
)

RESPONSE_CONTRACT = (
    "Rewrite the full body of each requested section. Respond with one fenced "
    "block per section, tagged with the section name, then a final rationale "
    "line, exactly in this shape:\n"
    "```context\n<new context body>\n```\n"
    "```expertise\n<new expertise body>\n```\n"
    "RATIONALE: <one short paragraph>\n"
    "Only include blocks for the requested sections."
)

_proposal_counter = itertools.count(1)


class ProposalStatus(Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"


@dataclass(frozen=True)
class RefinementRequest:
    notes: str
    current: PromptTemplate
    target_sections: tuple[SectionKind, ...] = REWRITABLE_SECTIONS
    guidelines: str | None = None

    def __post_init__(self) -> None:
        if not self.notes.strip():
            raise ValueError("notes must be non-empty")
        if not self.target_sections:
            raise ValueError("at least one target section required")
        bad = [k for k in self.target_sections if k not in REWRITABLE_SECTIONS]
        if bad:
            names = ", ".join(k.value for k in bad)
            raise ValueError(f"only context/expertise can be refined, got: {names}")


@dataclass
class RefinementProposal:
    proposed: dict[SectionKind, str]
    rationale: str
    base_version: int
    status: ProposalStatus = ProposalStatus.PENDING
    id: str = field(default_factory=lambda: f"proposal-{next(_proposal_counter)}")

    def _transition(self, target: ProposalStatus) -> None:
        if self.status is not ProposalStatus.PENDING:
            raise IllegalTransitionError(
                f"proposal {self.id} is {self.status.value}; transitions are one-way"
            )
        self.status = target

    def approve(self) -> None:
        self._transition(ProposalStatus.APPROVED)

    def reject(self) -> None:
        self._transition(ProposalStatus.REJECTED)


def build_meta_request(request: RefinementRequest, config) -> ChatRequest:
    """Meta-prompt for the rewriting model; carries the current template verbatim."""
    guidelines = request.guidelines if request.guidelines is not None else load_guidelines()
    system_text = META_INSTRUCTION.format(
        template_schema=TEMPLATE_SCHEMA,
        guidelines=guidelines,
        current_prompt=serialize_sections(request.current),
    )
    wanted = ", ".join(k.value for k in request.target_sections)
    user_text = (
        f"PROCESS ENGINEER NOTES:\n{request.notes}\n\n"
        f"Requested sections: {wanted}.\n\n{RESPONSE_CONTRACT}"
    )
    return ChatRequest(
        messages=(
            ChatMessage(role=Role.SYSTEM, parts=(TextPart(system_text),)),
            ChatMessage(role=Role.USER, parts=(TextPart(user_text),)),
        ),
        model_id=config.model_id,
        temperature=config.temperature,
    )


_BLOCK = re.compile(r"```(context|expertise)[ \t]*\n(.*?)\n?```", re.DOTALL)
_RATIONALE = re.compile(r"^RATIONALE:\s*(.+)$", re.MULTILINE | re.DOTALL)


def parse_proposal(raw_text: str, request: RefinementRequest) -> RefinementProposal:
    """Fenced block per target section plus a RATIONALE paragraph."""
    found = {SectionKind(m.group(1)): m.group(2) for m in _BLOCK.finditer(raw_text)}
    missing = [k.value for k in request.target_sections if k not in found]
    if missing:
        raise MalformedOutputError(f"response lacks section block(s): {', '.join(missing)}")
    extra = [k.value for k in found if k not in request.target_sections]
    if extra:
        raise MalformedOutputError(f"response contains unrequested block(s): {', '.join(extra)}")
    rationale_match = _RATIONALE.search(raw_text)
    if rationale_match is None:
        raise MalformedOutputError("response lacks a RATIONALE line")
    return RefinementProposal(
        proposed=found,
        rationale=rationale_match.group(1).strip(),
        base_version=request.current.version,
    )


def refine(client: FMClient, request: RefinementRequest) -> RefinementProposal:
    """Ask the rewriting model for new section bodies; never touches the store."""
    chat_request = build_meta_request(request, client.config)
    result = client.send(chat_request)
    return parse_proposal(result.raw_text, request)


def apply(proposal: RefinementProposal, current: PromptTemplate) -> PromptTemplate:
    """Merge an approved proposal; the rationale becomes the new provenance."""
    if proposal.status is not ProposalStatus.APPROVED:
        raise NotApprovedError(f"proposal {proposal.id} is {proposal.status.value}, not approved")
    provenance = " ".join(proposal.rationale.split())
    return merge_refinement(current, proposal.proposed, provenance=provenance)
