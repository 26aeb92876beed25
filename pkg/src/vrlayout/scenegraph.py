"""Scene-graph data model: vocabularies, boxes, scenes, datasets, JSON I/O.

Boxes live in normalized image coordinates with a top-left origin: ``x`` is
the left edge, ``y`` the top edge, ``y`` grows downward. Coordinates are
stored at 9 significant decimal digits (the serialized precision), which
makes ``parse_dataset(serialize_dataset(d)) == d`` an exact identity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

COORD_EPS = 1e-6


class DatasetParseError(ValueError):
    """Malformed JSON or a document that does not match the dataset schema."""


class ValidationError(ValueError):
    """A structurally well-formed document that violates a data invariant."""


def round9(value: float) -> float:
    """Quantize to 9 significant decimal digits."""
    return float(f"{value:.9g}")


def _fmt_float(value: float) -> str:
    # 9 significant digits; integral values keep a trailing ".0" so the
    # column is unambiguously a float.
    s = f"{value:.9g}"
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


@dataclass(frozen=True)
class Vocabulary:
    """Ordered category and predicate name lists; index equals list position."""

    categories: tuple[str, ...]
    predicates: tuple[str, ...]

    def __init__(self, categories, predicates):
        object.__setattr__(self, "categories", tuple(categories))
        object.__setattr__(self, "predicates", tuple(predicates))
        if len(self.categories) < 1:
            raise ValidationError("vocab: categories must be non-empty")
        if len(self.predicates) < 1:
            raise ValidationError("vocab: predicates must be non-empty")
        if len(set(self.categories)) != len(self.categories):
            raise ValidationError("vocab: duplicate category name")
        if len(set(self.predicates)) != len(self.predicates):
            raise ValidationError("vocab: duplicate predicate name")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box ``[x, y, w, h]`` inside the unit square."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, round9(float(getattr(self, name))))

    def validate(self) -> None:
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValidationError(f"box corner out of range: {self.as_tuple()}")
        if self.w <= 0.0 or self.h <= 0.0:
            raise ValidationError(f"degenerate box: {self.as_tuple()}")
        if self.w > 1.0 or self.h > 1.0:
            raise ValidationError(f"box side out of range: {self.as_tuple()}")
        if self.x + self.w > 1.0 + COORD_EPS or self.y + self.h > 1.0 + COORD_EPS:
            raise ValidationError(f"box exceeds unit square: {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class Edge:
    """Directed subject-predicate-object triple, all fields vocabulary indices."""

    subject: int
    predicate: int
    object: int


@dataclass
class SceneGraph:
    """Entity category indices plus directed labeled edges between entities."""

    entities: list[int]
    edges: list[Edge]


@dataclass
class Scene:
    graph: SceneGraph
    gt_boxes: list[BoundingBox] | None = None


@dataclass
class Dataset:
    vocab: Vocabulary
    scenes: list[Scene] = field(default_factory=list)


def validate_scene(scene: Scene, vocab: Vocabulary) -> None:
    """Check every scene invariant against `vocab`; raise on the first violation.

    Error messages carry the path of the offending element (for example
    ``edge 0: entity index out of range``).
    """
    graph = scene.graph
    n = len(graph.entities)
    if n < 1:
        raise ValidationError("scene has no entities")
    for i, cat in enumerate(graph.entities):
        if not (0 <= cat < len(vocab.categories)):
            raise ValidationError(f"entity {i}: category index out of range")
    seen: set[tuple[int, int, int]] = set()
    for j, edge in enumerate(graph.edges):
        if not (0 <= edge.subject < n) or not (0 <= edge.object < n):
            raise ValidationError(f"edge {j}: entity index out of range")
        if not (0 <= edge.predicate < len(vocab.predicates)):
            raise ValidationError(f"edge {j}: predicate index out of range")
        if edge.subject == edge.object:
            raise ValidationError(f"edge {j}: subject equals object")
        triple = (edge.subject, edge.predicate, edge.object)
        if triple in seen:
            raise ValidationError(f"edge {j}: duplicate edge")
        seen.add(triple)
    if scene.gt_boxes is not None:
        if len(scene.gt_boxes) != n:
            raise ValidationError(
                f"gt_boxes: expected {n} boxes, got {len(scene.gt_boxes)}"
            )
        for k, box in enumerate(scene.gt_boxes):
            try:
                box.validate()
            except ValidationError as err:
                raise ValidationError(f"gt_boxes[{k}]: {err}") from None


def validate_dataset(dataset: Dataset) -> None:
    for i, scene in enumerate(dataset.scenes):
        try:
            validate_scene(scene, dataset.vocab)
        except ValidationError as err:
            raise ValidationError(f"scene {i}: {err}") from None


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise DatasetParseError(message)


def parse_dataset(text: str) -> Dataset:
    """Parse and validate a dataset JSON document.

    Malformed JSON reports the byte offset; invariant violations name the
    scene index and field.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise DatasetParseError(
            f"malformed JSON at offset {err.pos}: {err.msg}"
        ) from None

    _expect(isinstance(doc, dict), "top level must be an object")
    unknown = set(doc) - {"vocab", "scenes"}
    _expect(not unknown, f"unexpected top-level field {sorted(unknown)}")
    _expect("vocab" in doc, "missing field 'vocab'")
    _expect("scenes" in doc, "missing field 'scenes'")

    raw_vocab = doc["vocab"]
    _expect(isinstance(raw_vocab, dict), "'vocab' must be an object")
    unknown = set(raw_vocab) - {"categories", "predicates"}
    _expect(not unknown, f"vocab: unexpected field {sorted(unknown)}")
    for key in ("categories", "predicates"):
        _expect(key in raw_vocab, f"vocab: missing field '{key}'")
        _expect(
            isinstance(raw_vocab[key], list)
            and all(isinstance(s, str) for s in raw_vocab[key]),
            f"vocab: '{key}' must be a list of strings",
        )
    vocab = Vocabulary(raw_vocab["categories"], raw_vocab["predicates"])

    _expect(isinstance(doc["scenes"], list), "'scenes' must be a list")
    scenes = []
    for i, raw in enumerate(doc["scenes"]):
        _expect(isinstance(raw, dict), f"scene {i}: must be an object")
        unknown = set(raw) - {"entities", "edges", "gt_boxes"}
        _expect(not unknown, f"scene {i}: unexpected field {sorted(unknown)}")
        for key in ("entities", "edges"):
            _expect(key in raw, f"scene {i}: missing field '{key}'")
        ents = raw["entities"]
        _expect(
            isinstance(ents, list) and all(isinstance(e, int) for e in ents),
            f"scene {i}: 'entities' must be a list of integers",
        )
        edges = []
        _expect(isinstance(raw["edges"], list), f"scene {i}: 'edges' must be a list")
        for j, triple in enumerate(raw["edges"]):
            _expect(
                isinstance(triple, list)
                and len(triple) == 3
                and all(isinstance(v, int) for v in triple),
                f"scene {i}: edge {j}: must be [subject, predicate, object]",
            )
            edges.append(Edge(triple[0], triple[1], triple[2]))
        boxes = None
        if "gt_boxes" in raw and raw["gt_boxes"] is not None:
            _expect(
                isinstance(raw["gt_boxes"], list),
                f"scene {i}: 'gt_boxes' must be a list",
            )
            boxes = []
            for k, quad in enumerate(raw["gt_boxes"]):
                _expect(
                    isinstance(quad, list)
                    and len(quad) == 4
                    and all(isinstance(v, (int, float)) for v in quad),
                    f"scene {i}: gt_boxes[{k}]: must be [x, y, w, h]",
                )
                boxes.append(BoundingBox(*quad))
        scenes.append(Scene(SceneGraph(list(ents), edges), boxes))

    dataset = Dataset(vocab, scenes)
    validate_dataset(dataset)
    return dataset


def serialize_dataset(dataset: Dataset) -> str:
    """Render a dataset as canonical JSON: fixed key order, one scene per
    line, floats at 9 significant digits. Deterministic byte-for-byte."""
    out = ["{\n"]
    out.append(
        '"vocab": {"categories": %s, "predicates": %s},\n'
        % (json.dumps(list(dataset.vocab.categories)),
           json.dumps(list(dataset.vocab.predicates)))
    )
    if not dataset.scenes:
        out.append('"scenes": []\n}\n')
        return "".join(out)
    out.append('"scenes": [\n')
    lines = []
    for scene in dataset.scenes:
        ents = ", ".join(str(e) for e in scene.graph.entities)
        edges = ", ".join(
            f"[{e.subject}, {e.predicate}, {e.object}]" for e in scene.graph.edges
        )
        parts = [f'"entities": [{ents}]', f'"edges": [{edges}]']
        if scene.gt_boxes is not None:
            boxes = ", ".join(
                "[%s]" % ", ".join(_fmt_float(v) for v in box.as_tuple())
                for box in scene.gt_boxes
            )
            parts.append(f'"gt_boxes": [{boxes}]')
        lines.append("{%s}" % ", ".join(parts))
    out.append(",\n".join(lines))
    out.append("\n]\n}\n")
    return "".join(out)
