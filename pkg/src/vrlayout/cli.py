"""Command-line entry point: gen, train, predict, eval, render.

Every subcommand is a deterministic function of its flags; output files are
written atomically (temp file + rename). Exit codes: 0 success, 1 runtime or
data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile

from .checkpoint import checkpoint_from_json, checkpoint_to_json
from .metrics import DEFAULT_TAUS, evaluate
from .model import MODES
from .reference import predict_dataset
from .render import render_scene
from .scenegraph import parse_dataset, serialize_dataset
from .synthdata import ALL_CONSISTENT, GeneratorConfig, generate_dataset
from .training import TrainConfig, train


def _write_atomic(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-vrlayout-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _edges_arg(value: str):
    if value == ALL_CONSISTENT:
        return value
    return int(value)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrlayout",
        description="Scene-graph layout generation, training, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--scenes", type=int, default=100)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--min-entities", type=int, default=3)
    gen.add_argument("--max-entities", type=int, default=5)
    gen.add_argument("--categories", type=int, default=10)
    gen.add_argument("--min-side", type=float, default=0.1)
    gen.add_argument("--max-side", type=float, default=0.6)
    gen.add_argument(
        "--edges",
        type=_edges_arg,
        default=4,
        help=f"edges per scene (count or '{ALL_CONSISTENT}')",
    )

    tr = sub.add_parser("train", help="train a model on a dataset")
    tr.add_argument("--data", required=True)
    tr.add_argument("--out", required=True, help="checkpoint path")
    tr.add_argument("--history", default=None, help="history JSON path")
    tr.add_argument("--epochs", type=int, default=200)
    tr.add_argument("--batch", type=int, default=16)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--lambda-rel", type=float, default=1.0)
    tr.add_argument("--lambda-box", type=float, default=1.0)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--mode", choices=MODES, default="full")

    pr = sub.add_parser("predict", help="predict boxes for a dataset")
    pr.add_argument("--ckpt", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--mode", choices=MODES, default=None,
                    help="override the checkpoint's mode")

    ev = sub.add_parser("eval", help="score predictions against ground truth")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument(
        "--tau",
        default=",".join(f"{t:g}" for t in DEFAULT_TAUS),
        help="comma-separated IoU thresholds",
    )
    ev.add_argument("--out", default=None)

    rd = sub.add_parser("render", help="render one scene's boxes to a PPM image")
    rd.add_argument("--data", required=True)
    rd.add_argument("--scene", type=int, default=0)
    rd.add_argument("--size", type=int, default=256)
    rd.add_argument("--out", required=True)
    return parser


def _cmd_gen(args) -> int:
    config = GeneratorConfig(
        num_scenes=args.scenes,
        min_entities=args.min_entities,
        max_entities=args.max_entities,
        num_categories=args.categories,
        seed=args.seed,
        min_box_side=args.min_side,
        max_box_side=args.max_side,
        edges_per_scene=args.edges,
    )
    dataset = generate_dataset(config)
    _write_atomic(args.out, serialize_dataset(dataset).encode("utf-8"))
    n_edges = sum(len(s.graph.edges) for s in dataset.scenes)
    print(f"wrote {len(dataset.scenes)} scenes, {n_edges} edges to {args.out}")
    return 0


def _history_json(history) -> str:
    rows = ",\n".join(
        '{"epoch": %d, "l_rel": %.17g, "box_loss": %.17g, "val_rs": %.17g}'
        % (h.epoch, h.l_rel, h.box_loss, h.val_rs)
        for h in history
    )
    return "[\n%s\n]\n" % rows if history else "[]\n"


def _cmd_train(args) -> int:
    dataset = parse_dataset(_read(args.data))
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        seed=args.seed,
        lambda_rel=args.lambda_rel,
        lambda_box=args.lambda_box,
        mode=args.mode,
    )
    params, history = train(dataset, config)
    _write_atomic(
        args.out,
        checkpoint_to_json(params, dataset.vocab, args.mode).encode("utf-8"),
    )
    history_path = args.history or args.out + ".history.json"
    _write_atomic(history_path, _history_json(history).encode("utf-8"))
    if history:
        last = history[-1]
        print(
            f"epoch {last.epoch}: l_rel={last.l_rel:.6f} "
            f"box_loss={last.box_loss:.6f} val_rs={last.val_rs:.4f}"
        )
    print(f"wrote checkpoint to {args.out}, history to {history_path}")
    return 0


def _cmd_predict(args) -> int:
    params, vocab, trained_mode = checkpoint_from_json(_read(args.ckpt))
    dataset = parse_dataset(_read(args.data))
    if dataset.vocab != vocab:
        raise ValueError("checkpoint vocabulary does not match dataset vocabulary")
    mode = args.mode or trained_mode
    predictions = predict_dataset(dataset, params, mode)
    _write_atomic(args.out, serialize_dataset(predictions).encode("utf-8"))
    print(f"wrote predictions for {len(predictions.scenes)} scenes to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    pred = parse_dataset(_read(args.pred))
    gt = parse_dataset(_read(args.gt))
    taus = tuple(float(t) for t in args.tau.split(",") if t)
    report = evaluate(pred, gt, taus)
    text = report.to_json()
    print(text)
    if args.out:
        _write_atomic(args.out, (text + "\n").encode("utf-8"))
    return 0


def _cmd_render(args) -> int:
    dataset = parse_dataset(_read(args.data))
    if not (0 <= args.scene < len(dataset.scenes)):
        raise ValueError(
            f"scene index {args.scene} out of range (0..{len(dataset.scenes) - 1})"
        )
    image = render_scene(dataset.scenes[args.scene], args.size)
    _write_atomic(args.out, image)
    print(f"wrote {args.size}x{args.size} PPM to {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "render": _cmd_render,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
