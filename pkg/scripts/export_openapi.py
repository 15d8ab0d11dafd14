"""Writes the service's OpenAPI description to docs/openapi.json."""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from promptinspect.client import Mode, ModelConfig
from promptinspect.service import Workspace, create_app
from promptinspect.template import Scenario

REPO = Path(__file__).resolve().parent.parent


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        workspace = Workspace(
            scenario=Scenario.CRIMP_FEATURES,
            dataset_path=tmp / "crimp.csv",
            template_dir=tmp / "templates",
            runs_dir=tmp / "runs",
            detector=ModelConfig(mode=Mode.REPLAY, cache_dir=str(tmp / "cache")),
            preprocessor=ModelConfig(mode=Mode.REPLAY, cache_dir=str(tmp / "cache")),
        )
        app = create_app(workspace)
        spec = app.openapi()
    out = REPO / "docs" / "openapi.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(spec, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
