"""Instruction-driven anomaly detection toolkit.

Core pieces: a four-section prompt template with low-shot reference data
(:mod:`promptinspect.template`), a record/replay chat-completion client
(:mod:`promptinspect.client`), an expert-notes refinement loop
(:mod:`promptinspect.refine`), crimp-curve quality features
(:mod:`promptinspect.features`), a from-scratch isolation forest
(:mod:`promptinspect.iforest`), the evaluation harness
(:mod:`promptinspect.harness`), dataset loaders
(:mod:`promptinspect.datasets`), and an HTTP facade
(:mod:`promptinspect.service`).
"""

from .template import (
    AblationConfig,
    ComposedPrompt,
    FeatureText,
    ImageRef,
    PromptTemplate,
    ReferenceSample,
    SampleRole,
    Scenario,
    SectionKind,
    ShotKind,
    TemplateStore,
    compose,
    default_ablation_configs,
    load_preset,
    merge_refinement,
    parse_config_label,
)
from .client import (
    DetectionRecord,
    FMClient,
    Mode,
    ModelConfig,
    ParseFailure,
    Usage,
    Verdict,
    fingerprint,
    parse_verdict,
    render_verdict,
)
from .features import Curve, FeatureVector, auc, extract, render_reference_block, slope
from .metrics import ConfusionMatrix, Metrics, compute_metrics
from .harness import (
    AblationRow,
    OracleDetector,
    RampUpPoint,
    ScoredSample,
    holdout_threshold_eval,
    ramp_up,
    run_ablation,
)
from .iforest import CONTAMINATION_GRID, Forest, ForestParams, avg_path_length, grid_search
from .datasets import (
    DatasetBundle,
    DatasetManifest,
    SampleRecord,
    load_crimp_csv,
    load_mvtec_layout,
    load_stripped_wire,
    select_one_shot_reference,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
