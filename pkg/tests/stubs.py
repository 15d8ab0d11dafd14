"""Wire-level scripted backends for exercising the client stack end to end."""

from __future__ import annotations

import base64
import json
from pathlib import Path

from promptinspect.client import Usage
from promptinspect.datasets import CurveSource, DatasetBundle
from promptinspect.features import extract, feature_lines


def wire_truth_transport(bundle: DatasetBundle, flip_ids=frozenset(), fail_ids=frozenset()):
    """Transport that answers each query with its ground-truth label.

    The query payload is always the final user part, so the sample can be
    recovered from the wire body alone. ``flip_ids`` answer with the wrong
    label; ``fail_ids`` answer with unparseable text (twice, so the
    corrective retry also fails).
    """
    text_to_sample = {}
    image_to_sample = {}
    for sample in bundle.samples:
        if isinstance(sample.source, CurveSource):
            key = feature_lines(extract(bundle.curves[sample.source.curve_id]))
            text_to_sample[key] = sample
        else:
            data = Path(sample.source.path).read_bytes()
            image_to_sample[base64.b64encode(data).decode("ascii")] = sample

    def estimate_input_tokens(wire_body: dict) -> int:
        chars = 0
        images = 0
        for message in wire_body["messages"]:
            content = message["content"]
            if isinstance(content, str):
                chars += len(content)
                continue
            for part in content:
                if part["type"] == "text":
                    chars += len(part["text"])
                else:
                    images += 1
        return chars // 4 + images * 256

    def transport(wire_body: dict) -> tuple[str, Usage]:
        query = None
        for message in wire_body["messages"]:
            if not isinstance(message["content"], list):
                continue
            for part in message["content"]:
                if part["type"] == "text" and part["text"] in text_to_sample:
                    query = text_to_sample[part["text"]]
                elif part["type"] == "image_url":
                    b64 = part["image_url"]["url"].split(",", 1)[1]
                    if b64 in image_to_sample:
                        query = image_to_sample[b64]
        if query is None:
            raise AssertionError("no known sample payload in request")
        input_tokens = estimate_input_tokens(wire_body)
        if query.id in fail_ids:
            raw = f"cannot decide about {query.id}"
        else:
            label = query.label if query.id not in flip_ids else 1 - query.label
            raw = json.dumps(
                {"Classification": label, "Reasoning": f"scripted verdict for {query.id}"}
            )
        return raw, Usage(input_tokens, len(raw) // 4)

    return transport
