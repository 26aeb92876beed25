"""Scene-graph layout model.

Pipeline per scene: entity/predicate embeddings with default full-image
boxes feed a per-edge graph convolution stack (candidate vectors averaged
per entity between layers, final layer left unpooled) that yields enriched
per-edge embeddings and one initial box per entity; a per-relation subnet
then predicts a pair of adjusted boxes (a relation unit) for every edge; an
auxiliary relation classifier scores each unit over the predicate set, and
the probability at the edge's predicate weights the unit's boxes during
unification into one refined box per entity; finally, per-entity embeddings
are warped into their refined boxes on a spatial grid and summed into the
layout.

Scenes are executed as one disjoint batched graph: index bookkeeping becomes
constant gather/average matrices so every step is a matmul, which keeps the
autodiff tape short.

Ablation modes: ``no-individual`` skips relation units entirely (refined
boxes are the initial boxes); ``no-weighted-unification`` averages candidate
boxes without classifier weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .rng import Xoshiro256StarStar
from .scenegraph import Scene, SceneGraph

MODES = ("full", "no-individual", "no-weighted-unification")

DEFAULT_BOX = (0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class ModelConfig:
    num_categories: int
    num_predicates: int
    d_emb: int = 128
    gcn_layers: int = 3
    iu_hidden: int = 512
    cls_hidden: int = 512
    grid_size: int = 64

    def __post_init__(self):
        if self.num_categories < 1 or self.num_predicates < 1:
            raise ValueError("vocabulary sizes must be >= 1")
        if min(self.d_emb, self.gcn_layers, self.iu_hidden, self.cls_hidden,
               self.grid_size) < 1:
            raise ValueError("all model dimensions must be >= 1")

    @property
    def edge_input_dim(self) -> int:
        # subject embedding, subject box, predicate embedding, object
        # embedding, object box
        return 2 * self.num_categories + self.num_predicates + 8

    @property
    def iu_input_dim(self) -> int:
        return 3 * self.d_emb + 8

    @property
    def cls_input_dim(self) -> int:
        return 2 * self.d_emb + 8


@dataclass
class ModelParams:
    """Named learnable tensors; iteration order is fixed by the name list."""

    config: ModelConfig
    tensors: dict[str, Tensor]

    def names(self) -> list[str]:
        return list(self.tensors.keys())

    def as_list(self) -> list[Tensor]:
        return list(self.tensors.values())

    def replace(self, new_tensors: Sequence[Tensor]) -> "ModelParams":
        names = self.names()
        if len(new_tensors) != len(names):
            raise ValueError("parameter count mismatch")
        return ModelParams(self.config, dict(zip(names, new_tensors)))

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]


def _glorot(rng: Xoshiro256StarStar, fan_in: int, fan_out: int) -> np.ndarray:
    bound = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return np.array(
        [[rng.uniform(-bound, bound) for _ in range(fan_out)] for _ in range(fan_in)]
    )


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Glorot-uniform dense layers, uniform(-0.05, 0.05) embedding tables,
    zero biases; fully determined by the seed."""
    rng = Xoshiro256StarStar(seed)
    c = config
    d3 = 3 * c.d_emb

    def table(rows, cols):
        return np.array(
            [[rng.uniform(-0.05, 0.05) for _ in range(cols)] for _ in range(rows)]
        )

    tensors: dict[str, np.ndarray] = {}
    tensors["ent_table"] = table(c.num_categories, c.num_categories)
    tensors["pred_table"] = table(c.num_predicates, c.num_predicates)
    in_dim = c.edge_input_dim
    for layer in range(c.gcn_layers):
        tensors[f"gcn_w{layer}"] = _glorot(rng, in_dim, d3)
        tensors[f"gcn_b{layer}"] = np.zeros(d3)
        in_dim = d3
    tensors["box_w"] = _glorot(rng, c.d_emb, 4)
    tensors["box_b"] = np.zeros(4)
    tensors["iu_w1"] = _glorot(rng, c.iu_input_dim, c.iu_hidden)
    tensors["iu_b1"] = np.zeros(c.iu_hidden)
    tensors["iu_w2"] = _glorot(rng, c.iu_hidden, 8)
    tensors["iu_b2"] = np.zeros(8)
    tensors["cls_w1"] = _glorot(rng, c.cls_input_dim, c.cls_hidden)
    tensors["cls_b1"] = np.zeros(c.cls_hidden)
    tensors["cls_w2"] = _glorot(rng, c.cls_hidden, c.num_predicates)
    tensors["cls_b2"] = np.zeros(c.num_predicates)
    return ModelParams(
        config, {k: Tensor(v, requires_grad=True) for k, v in tensors.items()}
    )


@dataclass
class SceneBatch:
    """One or more scene graphs flattened into a single disjoint graph.

    Holds the constant index matrices that turn per-entity pooling and
    per-edge gathers into matmuls: one-hot category/predicate rows, subject
    and object selection matrices, and slot-to-entity membership/averaging
    matrices over the ``2 * n_edges`` candidate slots (all subject slots
    first, then all object slots).
    """

    config: ModelConfig
    n_entities: int
    n_edges: int
    n_scenes: int
    entity_scene: np.ndarray
    entity_counts: list[int]
    ent_onehot: Tensor
    pred_onehot: Tensor
    subj_gather: Tensor
    obj_gather: Tensor
    slot_membership: Tensor
    slot_average: Tensor
    gt_boxes: Tensor | None = None
    mse_weights: Tensor | None = None

    @staticmethod
    def build(scenes: Sequence[Scene], config: ModelConfig) -> "SceneBatch":
        graphs = [s.graph for s in scenes]
        _validate_graphs(graphs, config)
        ent_cats: list[int] = []
        entity_scene: list[int] = []
        entity_counts: list[int] = []
        subs: list[int] = []
        preds: list[int] = []
        objs: list[int] = []
        offset = 0
        for si, g in enumerate(graphs):
            for e in g.edges:
                subs.append(offset + e.subject)
                preds.append(e.predicate)
                objs.append(offset + e.object)
            ent_cats.extend(g.entities)
            entity_scene.extend([si] * len(g.entities))
            entity_counts.append(len(g.entities))
            offset += len(g.entities)

        n_e, n_p = len(ent_cats), len(subs)
        ent_onehot = np.zeros((n_e, config.num_categories))
        ent_onehot[np.arange(n_e), ent_cats] = 1.0
        pred_onehot = np.zeros((n_p, config.num_predicates))
        pred_onehot[np.arange(n_p), preds] = 1.0
        subj_gather = np.zeros((n_p, n_e))
        subj_gather[np.arange(n_p), subs] = 1.0
        obj_gather = np.zeros((n_p, n_e))
        obj_gather[np.arange(n_p), objs] = 1.0

        slot_entity = np.concatenate([subs, objs]).astype(int)
        membership = np.zeros((n_e, 2 * n_p))
        membership[slot_entity, np.arange(2 * n_p)] = 1.0
        slot_counts = membership.sum(axis=1)
        if np.any(slot_counts == 0):
            missing = int(np.argmin(slot_counts))
            raise ValueError(f"entity {missing} participates in no edge")
        average = membership / slot_counts[:, None]

        gt = None
        weights = None
        if all(s.gt_boxes is not None for s in scenes):
            gt = np.array(
                [b.as_tuple() for s in scenes for b in s.gt_boxes]
            )
            # batch loss is the mean over scenes of each scene's mean over
            # its 4*|E| coordinates
            per_entity = np.array(
                [1.0 / (len(scenes) * 4.0 * entity_counts[si]) for si in entity_scene]
            )
            weights = np.repeat(per_entity[:, None], 4, axis=1)

        return SceneBatch(
            config=config,
            n_entities=n_e,
            n_edges=n_p,
            n_scenes=len(scenes),
            entity_scene=np.asarray(entity_scene),
            entity_counts=entity_counts,
            ent_onehot=Tensor(ent_onehot),
            pred_onehot=Tensor(pred_onehot),
            subj_gather=Tensor(subj_gather),
            obj_gather=Tensor(obj_gather),
            slot_membership=Tensor(membership),
            slot_average=Tensor(average),
            gt_boxes=Tensor(gt) if gt is not None else None,
            mse_weights=Tensor(weights) if weights is not None else None,
        )


def _validate_graphs(graphs: Sequence[SceneGraph], config: ModelConfig) -> None:
    if not graphs:
        raise ValueError("empty scene batch")
    for g in graphs:
        if not g.edges:
            raise ValueError("scene has no edges")
        for cat in g.entities:
            if not (0 <= cat < config.num_categories):
                raise ValueError(f"category index {cat} out of range")
        for e in g.edges:
            if not (0 <= e.predicate < config.num_predicates):
                raise ValueError(f"predicate index {e.predicate} out of range")


@dataclass
class BatchOutput:
    """Tape tensors produced by a batched forward pass."""

    enriched_subj: Tensor
    enriched_pred: Tensor
    enriched_obj: Tensor
    init_boxes: Tensor
    pooled_entities: Tensor
    units: Tensor | None
    distributions: Tensor | None
    unit_weights: Tensor | None
    refined_boxes: Tensor
    entity_embeddings: Tensor


def forward_batch(
    batch: SceneBatch, params: ModelParams, mode: str = "full"
) -> BatchOutput:
    """Run the model over a batched graph, building the autodiff tape."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    c = params.config
    d = c.d_emb

    ent_emb = batch.ent_onehot @ params["ent_table"]
    pred_emb = batch.pred_onehot @ params["pred_table"]
    default_box = Tensor(np.tile(DEFAULT_BOX, (batch.n_edges, 1)))
    edge_in = ad.concat(
        [
            batch.subj_gather @ ent_emb,
            default_box,
            pred_emb,
            batch.obj_gather @ ent_emb,
            default_box,
        ],
        axis=1,
    )

    pooled = None
    cand_subj = cand_pred = cand_obj = None
    for layer in range(c.gcn_layers):
        h = ad.relu(edge_in @ params[f"gcn_w{layer}"] + params[f"gcn_b{layer}"])
        cand_subj = ad.slice_axis(h, 1, 0, d)
        cand_pred = ad.slice_axis(h, 1, d, 2 * d)
        cand_obj = ad.slice_axis(h, 1, 2 * d, 3 * d)
        pooled = batch.slot_average @ ad.concat([cand_subj, cand_obj], axis=0)
        if layer < c.gcn_layers - 1:
            edge_in = ad.concat(
                [batch.subj_gather @ pooled, cand_pred, batch.obj_gather @ pooled],
                axis=1,
            )

    init_boxes = ad.sigmoid(pooled @ params["box_w"] + params["box_b"])

    if mode == "no-individual":
        return BatchOutput(
            enriched_subj=cand_subj,
            enriched_pred=cand_pred,
            enriched_obj=cand_obj,
            init_boxes=init_boxes,
            pooled_entities=pooled,
            units=None,
            distributions=None,
            unit_weights=None,
            refined_boxes=init_boxes,
            entity_embeddings=pooled,
        )

    subj_init = batch.subj_gather @ init_boxes
    obj_init = batch.obj_gather @ init_boxes
    iu_in = ad.concat([cand_subj, subj_init, cand_pred, cand_obj, obj_init], axis=1)
    h1 = ad.relu(iu_in @ params["iu_w1"] + params["iu_b1"])
    units = ad.sigmoid(h1 @ params["iu_w2"] + params["iu_b2"])
    unit_subj = ad.slice_axis(units, 1, 0, 4)
    unit_obj = ad.slice_axis(units, 1, 4, 8)

    cls_in = ad.concat([cand_subj, unit_subj, cand_obj, unit_obj], axis=1)
    h2 = ad.relu(cls_in @ params["cls_w1"] + params["cls_b1"])
    dist = ad.softmax(h2 @ params["cls_w2"] + params["cls_b2"], axis=1)
    # probability at the edge's own predicate; one weight per unit, shared
    # by its subject and object boxes
    beta = ad.sum(dist * batch.pred_onehot, axis=1, keepdims=True)

    candidates = ad.concat([unit_subj, unit_obj], axis=0)
    if mode == "no-weighted-unification":
        refined = batch.slot_average @ candidates
    else:
        w = ad.concat([beta, beta], axis=0) + Tensor(np.ones((1, 1)))
        numer = batch.slot_membership @ (candidates * w)
        denom = batch.slot_membership @ w
        refined = numer / denom

    entity_emb = batch.slot_average @ ad.concat([cand_subj, cand_obj], axis=0)

    return BatchOutput(
        enriched_subj=cand_subj,
        enriched_pred=cand_pred,
        enriched_obj=cand_obj,
        init_boxes=init_boxes,
        pooled_entities=pooled,
        units=units,
        distributions=dist,
        unit_weights=beta,
        refined_boxes=refined,
        entity_embeddings=entity_emb,
    )


def batch_loss(
    out: BatchOutput,
    batch: SceneBatch,
    lambda_rel: float = 1.0,
    lambda_box: float = 1.0,
) -> tuple[Tensor, float, float]:
    """Mean over scenes of ``lambda_rel * L_rel + lambda_box * box MSE``.

    Per scene, the relation loss sums the classifier cross-entropy over its
    edges and the box loss averages squared error over its 4*|E|
    coordinates. Returns (loss tensor, relation part, box part), the parts
    as plain per-scene-averaged floats.
    """
    if batch.gt_boxes is None:
        raise ValueError("batch has no ground-truth boxes")
    scale = 1.0 / batch.n_scenes
    if out.distributions is not None:
        rel_total = ad.cross_entropy(out.distributions, batch.pred_onehot)
        rel_term = rel_total * Tensor(np.array(scale))
    else:
        rel_term = Tensor(np.array(0.0))
    diff = out.refined_boxes - batch.gt_boxes
    box_term = ad.sum(batch.mse_weights * diff * diff)
    loss = rel_term * Tensor(np.array(lambda_rel)) + box_term * Tensor(
        np.array(lambda_box)
    )
    return loss, rel_term.item(), box_term.item()


# ---------------------------------------------------------------------------
# Single-scene operations (the unit-level surface; training uses the batched
# path above, which must agree with these numerically).
# ---------------------------------------------------------------------------


@dataclass
class EnrichedEdge:
    """Per-edge embeddings after graph convolution, plus the edge's pair of
    initial boxes looked up from its subject and object entities."""

    subj_emb: np.ndarray
    pred_emb: np.ndarray
    obj_emb: np.ndarray
    subj_init_box: np.ndarray
    obj_init_box: np.ndarray


@dataclass
class RelationUnit:
    """The pair of adjusted boxes predicted for one edge."""

    subj_box: np.ndarray
    obj_box: np.ndarray


@dataclass
class CandidateSet:
    """An entity's candidate boxes across all relation units that mention
    it, with their unit weights and associated embeddings."""

    boxes: list[np.ndarray]
    weights: list[float]
    embeddings: list[np.ndarray]


@dataclass
class LayoutResult:
    enriched_edges: list[EnrichedEdge]
    relation_units: list[RelationUnit]
    distributions: np.ndarray | None
    unit_weights: np.ndarray | None
    init_boxes: np.ndarray
    refined_boxes: np.ndarray
    entity_embeddings: np.ndarray
    layout_grid: np.ndarray


def embed_edge_inputs(scene: SceneGraph, params: ModelParams) -> np.ndarray:
    """Per-edge input rows: subject embedding, default box, predicate
    embedding, object embedding, default box, in that order."""
    batch = SceneBatch.build([Scene(scene)], params.config)
    ent_emb = batch.ent_onehot.data @ params["ent_table"].data
    pred_emb = batch.pred_onehot.data @ params["pred_table"].data
    default = np.tile(DEFAULT_BOX, (batch.n_edges, 1))
    return np.concatenate(
        [
            batch.subj_gather.data @ ent_emb,
            default,
            pred_emb,
            batch.obj_gather.data @ ent_emb,
            default,
        ],
        axis=1,
    )


def gcn_forward(
    scene: SceneGraph, params: ModelParams
) -> tuple[list[EnrichedEdge], np.ndarray]:
    """Enriched per-edge embeddings plus one initial box per entity."""
    batch = SceneBatch.build([Scene(scene)], params.config)
    out = forward_batch(batch, params, mode="no-individual")
    init = out.init_boxes.data
    edges = [
        EnrichedEdge(
            subj_emb=out.enriched_subj.data[k],
            pred_emb=out.enriched_pred.data[k],
            obj_emb=out.enriched_obj.data[k],
            subj_init_box=init[e.subject],
            obj_init_box=init[e.object],
        )
        for k, e in enumerate(scene.edges)
    ]
    return edges, init


def relation_unit_forward(edge: EnrichedEdge, params: ModelParams) -> RelationUnit:
    """Two dense layers (ReLU then sigmoid) over the enriched edge; the 8
    outputs split into the subject box then the object box."""
    row = np.concatenate(
        [
            edge.subj_emb,
            edge.subj_init_box,
            edge.pred_emb,
            edge.obj_emb,
            edge.obj_init_box,
        ]
    )[None, :]
    if row.shape[1] != params.config.iu_input_dim:
        raise ad.ShapeError(
            f"relation unit input has {row.shape[1]} values, "
            f"expected {params.config.iu_input_dim}"
        )
    h = np.maximum(row @ params["iu_w1"].data + params["iu_b1"].data, 0.0)
    raw = h @ params["iu_w2"].data + params["iu_b2"].data
    out = 1.0 / (1.0 + np.exp(-raw))
    return RelationUnit(subj_box=out[0, :4], obj_box=out[0, 4:])


def relation_classify(
    edge: EnrichedEdge, unit: RelationUnit, params: ModelParams
) -> np.ndarray:
    """Predicate distribution for one relation unit (softmax over |R|)."""
    row = np.concatenate([edge.subj_emb, unit.subj_box, edge.obj_emb, unit.obj_box])[
        None, :
    ]
    if row.shape[1] != params.config.cls_input_dim:
        raise ad.ShapeError(
            f"classifier input has {row.shape[1]} values, "
            f"expected {params.config.cls_input_dim}"
        )
    h = np.maximum(row @ params["cls_w1"].data + params["cls_b1"].data, 0.0)
    logits = h @ params["cls_w2"].data + params["cls_b2"].data
    shifted = logits - logits.max()
    ez = np.exp(shifted)
    return (ez / ez.sum())[0]


def relation_weight(distribution: np.ndarray, predicate_index: int) -> float:
    """The distribution's probability at the edge's own predicate."""
    if not (0 <= predicate_index < len(distribution)):
        raise IndexError(f"predicate index {predicate_index} out of range")
    return float(distribution[predicate_index])


def unify(candidates: CandidateSet) -> np.ndarray:
    """Coordinate-wise weighted mean of candidate boxes with weights 1+w."""
    if not candidates.boxes:
        raise ValueError("unify: empty candidate set")
    weights = np.asarray(candidates.weights, dtype=np.float64) + 1.0
    stacked = np.stack([np.asarray(b, dtype=np.float64) for b in candidates.boxes])
    return (weights[:, None] * stacked).sum(axis=0) / weights.sum()


def average_entity_embeddings(candidates: CandidateSet) -> np.ndarray:
    """Unweighted mean of the embeddings attached to an entity's candidates."""
    if not candidates.embeddings:
        raise ValueError("average_entity_embeddings: empty candidate set")
    return np.stack(candidates.embeddings).mean(axis=0)


def rasterize_mask(box: Sequence[float], grid_size: int) -> np.ndarray:
    """Binary occupancy mask: cell (r, c) is 1 iff its center lies in
    [x, x+w) x [y, y+h)."""
    x, y, w, h = (float(v) for v in box)
    centers = (np.arange(grid_size) + 0.5) / grid_size
    in_x = (centers >= x) & (centers < x + w)
    in_y = (centers >= y) & (centers < y + h)
    return (in_y[:, None] & in_x[None, :]).astype(np.float64)


def _axis_coverage(lo: float, extent: float, grid_size: int) -> np.ndarray:
    edges = np.arange(grid_size + 1) / grid_size
    overlap = np.minimum(edges[1:], lo + extent) - np.maximum(edges[:-1], lo)
    return np.clip(overlap * grid_size, 0.0, 1.0)


def warp_embedding(
    embedding: np.ndarray, box: Sequence[float], grid_size: int
) -> np.ndarray:
    """Broadcast an embedding over a box with bilinear edge falloff.

    Interior cells carry the full vector; boundary cells are scaled by the
    product of their fractional coverage along each axis.
    """
    x, y, w, h = (float(v) for v in box)
    cov = _axis_coverage(y, h, grid_size)[:, None] * _axis_coverage(x, w, grid_size)
    return cov[:, :, None] * np.asarray(embedding, dtype=np.float64)


def compose_layout(entity_layouts: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise sum of entity layouts (order-invariant; overlapping
    entities both remain present in the sum)."""
    layouts = list(entity_layouts)
    if not layouts:
        raise ValueError("compose_layout: no entity layouts")
    total = np.zeros_like(layouts[0])
    for layout in layouts:
        if layout.shape != total.shape:
            raise ad.ShapeError(
                f"layout shape {layout.shape} does not match {total.shape}"
            )
        total = total + layout
    return total


def forward(
    scene: SceneGraph,
    params: ModelParams,
    mode: str = "full",
    compute_layout: bool = True,
) -> LayoutResult:
    """Full pipeline on one scene; returns materialized arrays."""
    batch = SceneBatch.build([Scene(scene)], params.config)
    out = forward_batch(batch, params, mode=mode)
    init = out.init_boxes.data
    enriched = [
        EnrichedEdge(
            subj_emb=out.enriched_subj.data[k],
            pred_emb=out.enriched_pred.data[k],
            obj_emb=out.enriched_obj.data[k],
            subj_init_box=init[e.subject],
            obj_init_box=init[e.object],
        )
        for k, e in enumerate(scene.edges)
    ]
    units = []
    if out.units is not None:
        units = [
            RelationUnit(subj_box=row[:4], obj_box=row[4:])
            for row in out.units.data
        ]
    grid = None
    if compute_layout:
        g = params.config.grid_size
        layouts = [
            warp_embedding(out.entity_embeddings.data[i], out.refined_boxes.data[i], g)
            for i in range(batch.n_entities)
        ]
        grid = compose_layout(layouts)
    return LayoutResult(
        enriched_edges=enriched,
        relation_units=units,
        distributions=None if out.distributions is None else out.distributions.data,
        unit_weights=None if out.unit_weights is None else out.unit_weights.data[:, 0],
        init_boxes=init,
        refined_boxes=out.refined_boxes.data,
        entity_embeddings=out.entity_embeddings.data,
        layout_grid=grid,
    )


def relation_loss(distributions, edges: Sequence) -> Tensor:
    """Summed cross-entropy of each edge's distribution against its
    ground-truth predicate."""
    dist = distributions if isinstance(distributions, Tensor) else Tensor(distributions)
    n, r = dist.shape
    if n != len(edges):
        raise ValueError(f"{len(edges)} edges but {n} distributions")
    one_hot = np.zeros((n, r))
    for k, e in enumerate(edges):
        one_hot[k, e.predicate] = 1.0
    return ad.cross_entropy(dist, Tensor(one_hot))


def box_loss(refined, gt) -> Tensor:
    """Mean squared error over all box coordinates of a scene."""
    refined = refined if isinstance(refined, Tensor) else Tensor(refined)
    gt = gt if isinstance(gt, Tensor) else Tensor(gt)
    if refined.shape != gt.shape:
        raise ad.ShapeError(
            f"box_loss: {refined.shape} refined vs {gt.shape} ground truth"
        )
    return ad.mse(refined, gt)


def scene_loss(
    scene: Scene,
    params: ModelParams,
    mode: str = "full",
    lambda_rel: float = 1.0,
    lambda_box: float = 1.0,
) -> Tensor:
    """Tape-connected composite loss for a single scene."""
    batch = SceneBatch.build([scene], params.config)
    out = forward_batch(batch, params, mode=mode)
    loss, _, _ = batch_loss(out, batch, lambda_rel, lambda_box)
    return loss
