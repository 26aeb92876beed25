"""Training loop: Adam on the composite relation + box loss.

Deterministic given the seed: parameter init and per-epoch shuffling both
draw from one seeded generator, batches are visited in shuffled order, and
every reduction has a fixed summation order.
"""
from __future__ import annotations

from dataclasses import dataclass

from .metrics import relation_score
from .model import (
    MODES,
    ModelConfig,
    ModelParams,
    SceneBatch,
    batch_loss,
    forward_batch,
    init_params,
)
from .optim import adam_step, init_adam
from .rng import Xoshiro256StarStar
from .scenegraph import BoundingBox, Dataset


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    lambda_rel: float = 1.0
    lambda_box: float = 1.0
    mode: str = "full"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")


@dataclass
class EpochStats:
    epoch: int
    l_rel: float
    box_loss: float
    val_rs: float


def dataset_losses(
    dataset: Dataset,
    params: ModelParams,
    mode: str = "full",
) -> tuple[float, float]:
    """Per-scene-averaged relation and box losses over a whole dataset."""
    batch = SceneBatch.build(dataset.scenes, params.config)
    out = forward_batch(batch, params, mode=mode)
    _, l_rel, l_box = batch_loss(out, batch)
    return l_rel, l_box


def dataset_relation_score(
    dataset: Dataset, params: ModelParams, mode: str = "full"
) -> float:
    """Mean per-scene relation score of predicted refined boxes."""
    batch = SceneBatch.build(dataset.scenes, params.config)
    out = forward_batch(batch, params, mode=mode)
    return _mean_rs(batch, out.refined_boxes.data, dataset)


def _mean_rs(batch: SceneBatch, refined, dataset: Dataset) -> float:
    names = dataset.vocab.predicates
    total = 0.0
    offset = 0
    for scene in dataset.scenes:
        n = len(scene.graph.entities)
        boxes = [
            BoundingBox(*clip_box(refined[offset + i])) for i in range(n)
        ]
        total += relation_score(boxes, scene.graph.edges, names)
        offset += n
    return total / len(dataset.scenes)


def clip_box(raw) -> tuple[float, float, float, float]:
    """Clip a sigmoid-squashed box onto the unit square so it satisfies the
    dataset box invariants (w, h > 0 and x + w <= 1)."""
    x = min(max(float(raw[0]), 0.0), 1.0)
    y = min(max(float(raw[1]), 0.0), 1.0)
    w = max(min(float(raw[2]), 1.0 - x), 1e-9)
    h = max(min(float(raw[3]), 1.0 - y), 1e-9)
    return x, y, w, h


def train(
    dataset: Dataset,
    config: TrainConfig,
    val_dataset: Dataset | None = None,
) -> tuple[ModelParams, list[EpochStats]]:
    """Train on a dataset with ground-truth boxes.

    History records, per epoch, the training-set average relation and box
    losses seen during the epoch plus the relation score of predictions on
    `val_dataset` (the training set when absent).
    """
    if not dataset.scenes:
        raise ValueError("training dataset is empty")
    for i, scene in enumerate(dataset.scenes):
        if scene.gt_boxes is None:
            raise ValueError(f"scene {i}: missing gt_boxes, cannot train")

    model_config = ModelConfig(
        num_categories=len(dataset.vocab.categories),
        num_predicates=len(dataset.vocab.predicates),
    )
    rng = Xoshiro256StarStar(config.seed)
    params = init_params(model_config, rng.next_u64())
    state = init_adam(params.as_list(), learning_rate=config.learning_rate)
    score_set = val_dataset if val_dataset is not None else dataset

    history: list[EpochStats] = []
    n = len(dataset.scenes)
    for epoch in range(1, config.epochs + 1):
        order = list(range(n))
        rng.shuffle(order)
        rel_sum = 0.0
        box_sum = 0.0
        for lo in range(0, n, config.batch_size):
            chunk = order[lo : lo + config.batch_size]
            batch = SceneBatch.build([dataset.scenes[i] for i in chunk], model_config)
            out = forward_batch(batch, params, mode=config.mode)
            loss, l_rel, l_box = batch_loss(
                out, batch, config.lambda_rel, config.lambda_box
            )
            loss.backward()
            tensors = params.as_list()
            new_tensors, state = adam_step(
                tensors, [t.grad for t in tensors], state
            )
            params = params.replace(new_tensors)
            rel_sum += l_rel * len(chunk)
            box_sum += l_box * len(chunk)
        history.append(
            EpochStats(
                epoch=epoch,
                l_rel=rel_sum / n,
                box_loss=box_sum / n,
                val_rs=dataset_relation_score(score_set, params, mode=config.mode),
            )
        )
    return params, history
