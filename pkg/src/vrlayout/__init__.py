"""Scene-graph to layout inference with relation-aware box refinement."""

from .scenegraph import (
    BoundingBox,
    Dataset,
    Edge,
    Scene,
    SceneGraph,
    Vocabulary,
    parse_dataset,
    serialize_dataset,
    validate_scene,
)
from .synthdata import GeneratorConfig, generate_dataset, sample_scene
from .metrics import (
    GEOMETRIC_PREDICATES,
    MetricReport,
    coverage,
    evaluate,
    iou,
    recall_at_tau,
    relation_holds,
    relation_iou,
    relation_score,
)
from .model import ModelConfig, ModelParams, forward, init_params
from .training import TrainConfig, train

__all__ = [
    "BoundingBox",
    "Dataset",
    "Edge",
    "GEOMETRIC_PREDICATES",
    "GeneratorConfig",
    "MetricReport",
    "ModelConfig",
    "ModelParams",
    "Scene",
    "SceneGraph",
    "TrainConfig",
    "Vocabulary",
    "coverage",
    "evaluate",
    "forward",
    "generate_dataset",
    "init_params",
    "iou",
    "parse_dataset",
    "recall_at_tau",
    "relation_holds",
    "relation_iou",
    "relation_score",
    "sample_scene",
    "serialize_dataset",
    "train",
    "validate_scene",
]
