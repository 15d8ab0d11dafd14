"""Walk through prompt composition: presets, information depths, shot modes.

Run:  python demos/compose_prompts.py
"""

from promptinspect import (
    AblationConfig,
    FeatureText,
    ImageRef,
    ReferenceSample,
    SampleRole,
    ShotKind,
    compose,
    load_preset,
)
from promptinspect.features import FeatureVector, feature_lines, render_reference_block


def show(title, prompt):
    print("=" * 70)
    print(title)
    print("=" * 70)
    print(prompt.system_text)
    print("-" * 70)
    for part in prompt.user_parts:
        if part.kind == "text":
            print(part.text)
        else:
            print(f"[image: {part.image.path} ({part.image.media_type})]")
    print()


# 1. The leanest possible instruction: task + output only, no references.
cable = load_preset("cable")
zero_shot = AblationConfig(include_context=False, include_expertise=False, shot=ShotKind.ZERO_SHOT)
query = ImageRef(path="samples/cable_0042.png", media_type="image/png")
show("cable / zero-shot / task+output only", compose(cable, zero_shot, query))

# 2. Full information depth plus a one-shot good reference.
cable = cable.with_references(
    [
        ReferenceSample(
            id="good-ref",
            role=SampleRole.NON_ANOMALOUS,
            payload=ImageRef(path="samples/cable_good.png", media_type="image/png"),
        )
    ]
)
one_shot_full = AblationConfig(include_context=True, include_expertise=True, shot=ShotKind.ONE_SHOT_OK)
show("cable / one-shot / all four sections", compose(cable, one_shot_full, query))

# 3. Numeric few-shot: three good curves rendered as feature lines.
refs = [
    ("ok-1", FeatureVector(0.0002982, 31.19105)),
    ("ok-2", FeatureVector(0.0009065, 32.40591)),
    ("ok-3", FeatureVector(0.0004917, 31.77342)),
]
print("rendered reference block:")
print(render_reference_block(refs))
print()

crimp = load_preset("crimp_features").with_references(
    [
        ReferenceSample(id=rid, role=SampleRole.NON_ANOMALOUS, payload=FeatureText(feature_lines(fv)))
        for rid, fv in refs
    ]
)
few_shot = AblationConfig(include_context=True, include_expertise=True, shot=ShotKind.FEW_SHOT_OK, k=3)
crimp_query = FeatureText(feature_lines(FeatureVector(0.0004055, 29.2021)))
show("crimp features / few-shot(3) / all four sections", compose(crimp, few_shot, crimp_query))
