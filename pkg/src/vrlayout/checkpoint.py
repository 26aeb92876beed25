"""Checkpoint serialization: model parameters plus vocabulary as JSON.

Floats are written with 17 significant digits (enough to reproduce any
float64 exactly), keys in a fixed order, tensors sorted by name, so
load-then-save is byte-identical.
"""
from __future__ import annotations

import json

import numpy as np

from .autodiff import Tensor
from .model import ModelConfig, ModelParams
from .scenegraph import Vocabulary

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or structurally invalid checkpoint document."""


def _fmt(value: float) -> str:
    s = f"{value:.17g}"
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def checkpoint_to_json(params: ModelParams, vocab: Vocabulary, mode: str) -> str:
    c = params.config
    out = ['{\n"format_version": %d,\n' % FORMAT_VERSION]
    out.append(
        '"config": {"categories": %s, "predicates": %s, '
        '"d_emb": %d, "gcn_layers": %d, "iu_hidden": %d, "cls_hidden": %d, '
        '"grid_size": %d, "mode": %s},\n'
        % (
            json.dumps(list(vocab.categories)),
            json.dumps(list(vocab.predicates)),
            c.d_emb,
            c.gcn_layers,
            c.iu_hidden,
            c.cls_hidden,
            c.grid_size,
            json.dumps(mode),
        )
    )
    out.append('"tensors": {\n')
    entries = []
    for name in sorted(params.tensors):
        tensor = params.tensors[name]
        shape = ", ".join(str(d) for d in tensor.shape)
        data = ", ".join(_fmt(v) for v in tensor.data.reshape(-1))
        entries.append('"%s": {"shape": [%s], "data": [%s]}' % (name, shape, data))
    out.append(",\n".join(entries))
    out.append("\n}\n}\n")
    return "".join(out)


def checkpoint_from_json(text: str) -> tuple[ModelParams, Vocabulary, str]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise CheckpointError(f"malformed JSON at offset {err.pos}: {err.msg}") from None
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError("missing or unsupported format_version")
    try:
        cfg = doc["config"]
        vocab = Vocabulary(cfg["categories"], cfg["predicates"])
        config = ModelConfig(
            num_categories=len(vocab.categories),
            num_predicates=len(vocab.predicates),
            d_emb=cfg["d_emb"],
            gcn_layers=cfg["gcn_layers"],
            iu_hidden=cfg["iu_hidden"],
            cls_hidden=cfg["cls_hidden"],
            grid_size=cfg["grid_size"],
        )
        mode = cfg["mode"]
        tensors = {}
        for name, entry in doc["tensors"].items():
            shape = tuple(entry["shape"])
            arr = np.array(entry["data"], dtype=np.float64).reshape(shape)
            tensors[name] = Tensor(arr, requires_grad=True)
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointError(f"invalid checkpoint structure: {err}") from None
    return ModelParams(config, tensors), vocab, mode
