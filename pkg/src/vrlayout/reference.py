"""The reference synthetic experiment: corpus recipe and prediction export.

One place defines the corpus the training smoke test and the ablation
script both use: 10 categories, the 6 geometric predicates, 3 to 5 entities
per scene, 300 scenes from one seed split 200 train / 100 held-out.
"""
from __future__ import annotations

from .model import ModelParams, SceneBatch, forward_batch
from .scenegraph import BoundingBox, Dataset, Scene, SceneGraph
from .synthdata import GeneratorConfig, generate_dataset
from .training import clip_box

REFERENCE_GENERATOR = dict(
    num_scenes=300,
    min_entities=3,
    max_entities=5,
    num_categories=10,
    min_box_side=0.03,
    max_box_side=0.9,
    edges_per_scene=5,
)

TRAIN_SCENES = 200
HELDOUT_SCENES = 100


def reference_split(seed: int) -> tuple[Dataset, Dataset]:
    """Generate the reference corpus and split it train / held-out."""
    full = generate_dataset(GeneratorConfig(seed=seed, **REFERENCE_GENERATOR))
    return (
        Dataset(full.vocab, full.scenes[:TRAIN_SCENES]),
        Dataset(full.vocab, full.scenes[TRAIN_SCENES:]),
    )


def predict_dataset(dataset: Dataset, params: ModelParams, mode: str) -> Dataset:
    """Refined boxes for every scene, clipped onto the unit square, in a
    dataset whose gt_boxes slots hold the predictions."""
    scenes = []
    for scene in dataset.scenes:
        batch = SceneBatch.build([scene], params.config)
        out = forward_batch(batch, params, mode=mode)
        boxes = [BoundingBox(*clip_box(row)) for row in out.refined_boxes.data]
        scenes.append(
            Scene(SceneGraph(list(scene.graph.entities), list(scene.graph.edges)), boxes)
        )
    return Dataset(dataset.vocab, scenes)
