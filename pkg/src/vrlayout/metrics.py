"""Layout evaluation metrics and the canonical geometric predicate semantics.

Four corpus metrics: entity recall at an IoU threshold, relation IoU (product
of subject and object IoU per edge), relation score (fraction of edges whose
predicate geometrically holds on the predicted boxes), and coverage (area of
the union of predicted boxes). Per-scene values are averaged uniformly over
the corpus.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .scenegraph import BoundingBox, Dataset, Edge

#: Canonical geometric predicates, in vocabulary order.
GEOMETRIC_PREDICATES = (
    "left of",
    "right of",
    "above",
    "below",
    "inside",
    "surrounding",
)

DEFAULT_TAUS = (0.3, 0.5, 0.7, 0.9)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    # the subtraction form of ix/iy can overshoot w*h by an ulp; keep the
    # ratio inside [0, 1]
    return min(1.0, inter / union)


def recall_at_tau(
    pred: Sequence[BoundingBox], gt: Sequence[BoundingBox], tau: float
) -> float:
    """Fraction of entities whose predicted box overlaps ground truth with
    IoU >= tau. Entities are matched by shared index; the first
    min(len(pred), len(gt)) pairs are scored."""
    if not gt:
        raise ValueError("recall_at_tau: empty ground-truth box list")
    n = min(len(pred), len(gt))
    hits = sum(1 for i in range(n) if iou(pred[i], gt[i]) >= tau)
    return hits / n


def relation_iou(
    pred: Sequence[BoundingBox], gt: Sequence[BoundingBox], edges: Sequence[Edge]
) -> float:
    """Mean over edges of iou(subject) * iou(object)."""
    if not edges:
        raise ValueError("relation_iou: no edges")
    total = 0.0
    for e in edges:
        total += iou(pred[e.subject], gt[e.subject]) * iou(pred[e.object], gt[e.object])
    return total / len(edges)


def _center(b: BoundingBox) -> tuple[float, float]:
    return (b.x + b.w / 2.0, b.y + b.h / 2.0)


def _strictly_inside(px: float, py: float, b: BoundingBox) -> bool:
    return b.x < px < b.x + b.w and b.y < py < b.y + b.h


def relation_holds(predicate: str, subject: BoundingBox, obj: BoundingBox) -> bool:
    """Truth condition of a geometric predicate on a subject/object box pair.

    Directional predicates compare box centers with strict inequalities
    (y grows downward, so "above" means a strictly smaller center y);
    "inside" holds when the subject's center lies strictly within the object
    box, "surrounding" is its converse.
    """
    sx, sy = _center(subject)
    ox, oy = _center(obj)
    if predicate == "left of":
        return sx < ox
    if predicate == "right of":
        return sx > ox
    if predicate == "above":
        return sy < oy
    if predicate == "below":
        return sy > oy
    if predicate == "inside":
        return _strictly_inside(sx, sy, obj)
    if predicate == "surrounding":
        return _strictly_inside(ox, oy, subject)
    raise ValueError(f"unknown predicate: {predicate!r}")


def relation_score(
    boxes: Sequence[BoundingBox],
    edges: Sequence[Edge],
    predicate_names: Sequence[str],
) -> float:
    """Fraction of edges whose predicate holds on the given boxes."""
    if not edges:
        raise ValueError("relation_score: no edges")
    hits = sum(
        1
        for e in edges
        if relation_holds(predicate_names[e.predicate], boxes[e.subject], boxes[e.object])
    )
    return hits / len(edges)


def coverage(boxes: Sequence[BoundingBox]) -> float:
    """Exact area of the union of boxes, relative to the unit image.

    Sweeps compressed x-coordinates; within each vertical strip the covered
    y-length is the measure of merged intervals of the boxes spanning it.
    """
    if not boxes:
        raise ValueError("coverage: empty box list")
    xs = sorted({v for b in boxes for v in (b.x, b.x + b.w)})
    area = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        if x1 <= x0:
            continue
        spans = sorted(
            (b.y, b.y + b.h) for b in boxes if b.x <= x0 and x1 <= b.x + b.w
        )
        covered = 0.0
        cur_lo, cur_hi = None, None
        for lo, hi in spans:
            if cur_hi is None or lo > cur_hi:
                if cur_hi is not None:
                    covered += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            elif hi > cur_hi:
                cur_hi = hi
        if cur_hi is not None:
            covered += cur_hi - cur_lo
        area += (x1 - x0) * covered
    return min(1.0, area)


@dataclass
class MetricReport:
    """Corpus-level metric values, all in [0, 1]."""

    recall_at: dict[float, float]
    r_iou: float
    rs: float
    coverage: float
    n_scenes: int

    def to_json(self) -> str:
        def num(value: float) -> str:
            s = f"{value:.17g}"
            return s if ("." in s or "e" in s) else s + ".0"

        recalls = ", ".join(
            f'"{tau:g}": {num(value)}' for tau, value in self.recall_at.items()
        )
        return (
            "{"
            + f'"recall_at": {{{recalls}}}, '
            + f'"r_iou": {num(self.r_iou)}, '
            + f'"rs": {num(self.rs)}, '
            + f'"coverage": {num(self.coverage)}, '
            + f'"n_scenes": {self.n_scenes}'
            + "}"
        )


def evaluate(
    pred: Dataset, gt: Dataset, taus: Sequence[float] = DEFAULT_TAUS
) -> MetricReport:
    """Score a prediction corpus against ground truth.

    Both datasets must contain the same scene graphs with boxes in the
    ``gt_boxes`` slots; per-scene metrics are averaged uniformly.
    """
    if len(pred.scenes) != len(gt.scenes):
        raise ValueError(
            f"scene count mismatch: pred {len(pred.scenes)}, gt {len(gt.scenes)}"
        )
    if not pred.scenes:
        raise ValueError("evaluate: empty corpus")
    taus = tuple(taus)
    recall_sums = {tau: 0.0 for tau in taus}
    riou_sum = 0.0
    rs_sum = 0.0
    cover_sum = 0.0
    names = gt.vocab.predicates
    for i, (ps, gs) in enumerate(zip(pred.scenes, gt.scenes)):
        if ps.graph.entities != gs.graph.entities or ps.graph.edges != gs.graph.edges:
            raise ValueError(f"scene {i}: scene graphs differ")
        if ps.gt_boxes is None or gs.gt_boxes is None:
            raise ValueError(f"scene {i}: missing boxes")
        if not gs.graph.edges:
            raise ValueError(f"scene {i}: no edges")
        for tau in taus:
            recall_sums[tau] += recall_at_tau(ps.gt_boxes, gs.gt_boxes, tau)
        riou_sum += relation_iou(ps.gt_boxes, gs.gt_boxes, gs.graph.edges)
        rs_sum += relation_score(ps.gt_boxes, gs.graph.edges, names)
        cover_sum += coverage(ps.gt_boxes)
    n = len(pred.scenes)
    return MetricReport(
        recall_at={tau: recall_sums[tau] / n for tau in taus},
        r_iou=riou_sum / n,
        rs=rs_sum / n,
        coverage=cover_sum / n,
        n_scenes=n,
    )
