"""The expert loop: notes -> scripted rewrite -> review -> new version.

A stub stands in for the rewriting model so the demo runs offline; swap in
a live ModelConfig to use a real endpoint.

Run:  python demos/refine_loop.py
"""

import tempfile

from promptinspect import FMClient, ModelConfig, TemplateStore, load_preset
from promptinspect.client import Usage
from promptinspect.refine import RefinementRequest, apply, refine
from promptinspect.template import SectionKind

SCRIPTED_REWRITE = (
    "```expertise\n"
    "Anomalous conditions (any single match is sufficient):\n"
    "1. One or more strands pulled clearly beyond the bundle.\n"
    "2. One or more strands cut short or notched at the tip.\n"
    "3. Fresh green oxidation spots on the exposed copper.\n"
    "Minor tilt, curvature, or lighting artifacts are not defects.\n"
    "```\n"
    "RATIONALE: adds the engineer's oxidation rule next to the existing "
    "pull/cut criteria and keeps the single-match decision rule.\n"
)

with tempfile.TemporaryDirectory() as tmp:
    store = TemplateStore(tmp)
    store.save(load_preset("stripped_wire"))
    current = store.current()
    print(f"current template: v{current.version} ({len(current.body(SectionKind.EXPERTISE))} chars of expertise)")

    request = RefinementRequest(
        notes="green oxidation spots on the copper mean the batch got wet; flag those too",
        current=current,
        target_sections=(SectionKind.EXPERTISE,),
    )
    client = FMClient(ModelConfig(model_id="rewriter"), transport=lambda body: (SCRIPTED_REWRITE, Usage(900, 120)))
    proposal = refine(client, request)

    print(f"\nproposal {proposal.id} [{proposal.status.value}]")
    print("proposed expertise body:")
    print(proposal.proposed[SectionKind.EXPERTISE])
    print(f"rationale: {proposal.rationale}")

    proposal.approve()
    merged = store.save(apply(proposal, current))
    print(f"\napproved -> template v{merged.version}, provenance: {merged.provenance!r}")
    print(f"history: {store.history()}")
    print(f"v1 expertise unchanged on disk: {'oxidation' not in store.load(1).body(SectionKind.EXPERTISE)}")
