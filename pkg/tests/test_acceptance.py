"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``. Criterion 5 trains three
models for 200 epochs (about five minutes) and, when the ablation margins
fail on the primary seed, repeats the comparison on four more fixed seeds
(about twenty further minutes); everything else completes in seconds.
"""

import time

import numpy as np
import pytest

from vrlayout import autodiff as ad
from vrlayout.autodiff import Tensor, gradient_check
from vrlayout.checkpoint import checkpoint_from_json, checkpoint_to_json
from vrlayout.cli import main
from vrlayout.metrics import (
    coverage,
    evaluate,
    iou,
    recall_at_tau,
    relation_iou,
    relation_score,
)
from vrlayout.model import (
    CandidateSet,
    ModelConfig,
    ModelParams,
    compose_layout,
    init_params,
    rasterize_mask,
    scene_loss,
    unify,
    warp_embedding,
)
from vrlayout.rng import Xoshiro256StarStar
from vrlayout.scenegraph import (
    BoundingBox,
    Edge,
    Scene,
    SceneGraph,
    parse_dataset,
    serialize_dataset,
)
from vrlayout.synthdata import GeneratorConfig, default_vocabulary, generate_dataset
from vrlayout.training import TrainConfig, dataset_losses, dataset_relation_score, train

from test_metrics import brute_recall, brute_relation_iou, grid_coverage, grid_iou, random_box


def report(criterion: str, detail: str) -> None:
    print(f"\nPASS {criterion}: {detail}")


# ---------------------------------------------------------------------------
# Criterion 1: gradient correctness, every op + full composite loss, < 10 s.
# ---------------------------------------------------------------------------

def test_criterion_1_gradient_correctness():
    start = time.monotonic()
    rng = np.random.default_rng(11)

    def rand(*shape, low=-1.0, high=1.0):
        return rng.uniform(low, high, size=shape)

    other = Tensor(rand(3, 4))
    col = Tensor(rand(3, 1, low=0.5, high=1.5))
    mat = Tensor(rand(4, 2))
    one_hot = np.zeros((3, 5))
    one_hot[np.arange(3), [1, 0, 4]] = 1.0
    target = Tensor(one_hot)
    relu_in = rand(3, 4)
    relu_in = np.where(np.abs(relu_in) < 1e-2, 0.05, relu_in)

    op_checks = {
        "add": (lambda t: ad.sum((t + other) * (t + other)), rand(3, 4)),
        "sub": (lambda t: ad.sum((t - other) * (t - other)), rand(3, 4)),
        "mul": (lambda t: ad.sum(t * col), rand(3, 4)),
        "div": (lambda t: ad.sum(other / t), rand(3, 4, low=0.8, high=2.0)),
        "matmul": (lambda t: ad.sum((t @ mat) * (t @ mat)), rand(3, 4)),
        "concat": (
            lambda t: ad.sum(ad.concat([t, other], 1) * ad.concat([t, other], 1)),
            rand(3, 4),
        ),
        "slice": (
            lambda t: ad.sum(ad.slice_axis(t, 1, 1, 3) * ad.slice_axis(t, 1, 1, 3)),
            rand(3, 4),
        ),
        "relu": (lambda t: ad.sum(ad.relu(t)), relu_in),
        "sigmoid": (lambda t: ad.sum(ad.sigmoid(t) * ad.sigmoid(t)), rand(3, 4)),
        "softmax": (lambda t: ad.sum(ad.softmax(t, axis=1) * other), rand(3, 4)),
        "sum": (lambda t: ad.sum(ad.sum(t, axis=1, keepdims=True) * col), rand(3, 4)),
        "mean": (lambda t: ad.mean(t) * ad.mean(t), rand(3, 4)),
        "mse": (lambda t: ad.mse(t, other), rand(3, 4)),
        "cross_entropy": (
            lambda t: ad.cross_entropy(ad.softmax(t, axis=1), target),
            rand(3, 5),
        ),
    }
    worst_op = 0.0
    for name, (f, x) in op_checks.items():
        err = gradient_check(f, x, 1e-4)
        assert err < 1e-3, f"op {name}: max relative error {err}"
        worst_op = max(worst_op, err)

    # full composite loss (relation + box terms through the whole pipeline)
    # on a 2-entity / 1-edge scene, at reduced widths so exhaustive central
    # differences fit the runtime budget
    small = ModelConfig(
        num_categories=3, num_predicates=6, d_emb=6, iu_hidden=8, cls_hidden=8,
        grid_size=8,
    )
    scene = Scene(
        SceneGraph([0, 2], [Edge(0, 0, 1)]),
        [BoundingBox(0.1, 0.2, 0.3, 0.4), BoundingBox(0.5, 0.1, 0.3, 0.3)],
    )
    params = init_params(small, seed=2024)
    worst_model = 0.0
    for name in params.names():

        def f(t, _name=name):
            probe = ModelParams(
                small,
                {n: (t if n == _name else p) for n, p in params.tensors.items()},
            )
            return scene_loss(scene, probe, mode="full")

        worst_model = max(worst_model, gradient_check(f, params[name].data, 1e-4))
    assert worst_model < 1e-3

    # spot-check the production width on a seeded coordinate sample
    wide = init_params(ModelConfig(num_categories=3, num_predicates=6), seed=7)
    picker = np.random.default_rng(3)
    worst_wide = 0.0
    for name in ("gcn_w2", "iu_w1", "cls_w2", "ent_table", "box_w"):
        base = wide[name].data
        loss = scene_loss(scene, wide, mode="full")
        loss.backward()
        analytic = wide[name].grad.reshape(-1)
        flat = base.reshape(-1)
        for i in picker.choice(flat.size, size=min(20, flat.size), replace=False):
            probe = flat.copy()
            probe[i] += 1e-4
            hi_params = ModelParams(
                wide.config,
                {
                    n: (Tensor(probe.reshape(base.shape)) if n == name else p)
                    for n, p in wide.tensors.items()
                },
            )
            hi = scene_loss(scene, hi_params, mode="full").item()
            probe[i] -= 2e-4
            lo_params = ModelParams(
                wide.config,
                {
                    n: (Tensor(probe.reshape(base.shape)) if n == name else p)
                    for n, p in wide.tensors.items()
                },
            )
            lo = scene_loss(scene, lo_params, mode="full").item()
            numeric = (hi - lo) / 2e-4
            err = abs(analytic[i] - numeric) / max(1.0, abs(analytic[i]))
            worst_wide = max(worst_wide, err)
        for p in wide.as_list():
            p.zero_grad()
    assert worst_wide < 1e-3

    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"gradient checks took {elapsed:.1f}s"
    report(
        "criterion 1 (gradient correctness)",
        f"ops max err {worst_op:.2e}, composite max err {worst_model:.2e}, "
        f"wide spot-check {worst_wide:.2e}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# Criterion 2: metric-oracle equivalence on 100 seeded random inputs, < 30 s.
# ---------------------------------------------------------------------------

def test_criterion_2_metric_oracle_equivalence():
    start = time.monotonic()
    rng = Xoshiro256StarStar(20240501)
    worst_iou = worst_cover = 0.0
    for _ in range(100):
        a, b = random_box(rng), random_box(rng)
        worst_iou = max(worst_iou, abs(iou(a, b) - grid_iou(a, b)))
        boxes = [random_box(rng) for _ in range(rng.randint(1, 5))]
        worst_cover = max(worst_cover, abs(coverage(boxes) - grid_coverage(boxes)))
    assert worst_iou < 2e-3
    assert worst_cover < 2e-3

    for _ in range(100):
        n = rng.randint(1, 6)
        gt = [random_box(rng) for _ in range(n)]
        pred = [random_box(rng) for _ in range(n)]
        for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
            assert recall_at_tau(pred, gt, tau) == brute_recall(pred, gt, tau)
        edges = [Edge(0, 0, min(1, n - 1))] if n > 1 else []
        if n > 2:
            edges.append(Edge(n - 1, 2, 0))
        if edges:
            assert relation_iou(pred, gt, edges) == brute_relation_iou(pred, gt, edges)

    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"metric oracles took {elapsed:.1f}s"
    report(
        "criterion 2 (metric-oracle equivalence)",
        f"iou max dev {worst_iou:.2e}, coverage max dev {worst_cover:.2e}, "
        f"recall/rIoU exact, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# Criterion 3: unification formula.
# ---------------------------------------------------------------------------

def test_criterion_3_unification_formula():
    rng = Xoshiro256StarStar(333)
    # all-zero weights reduce to the arithmetic mean
    worst = 0.0
    for _ in range(200):
        n = rng.randint(1, 6)
        boxes = [np.array([rng.random() for _ in range(4)]) for _ in range(n)]
        got = unify(CandidateSet(boxes=boxes, weights=[0.0] * n, embeddings=boxes))
        worst = max(worst, float(np.max(np.abs(got - np.mean(boxes, axis=0)))))
    assert worst <= 1e-12

    # worked example: weights (1+1, 1+0) over two boxes
    cands = CandidateSet(
        boxes=[np.array([0.0, 0.0, 0.5, 0.5]), np.array([0.2, 0.2, 0.5, 0.5])],
        weights=[1.0, 0.0],
        embeddings=[np.zeros(1), np.zeros(1)],
    )
    expected = np.array([0.2 / 3.0, 0.2 / 3.0, 0.5, 0.5])
    assert np.max(np.abs(unify(cands) - expected)) < 1e-9

    # monotone pull on 1000 random candidate sets
    checked = 0
    for _ in range(1000):
        n = rng.randint(2, 6)
        boxes = [np.array([rng.random() for _ in range(4)]) for _ in range(n)]
        weights = [rng.random() * 0.7 for _ in range(n)]
        idx = rng.randint(0, n - 1)
        before = unify(CandidateSet(boxes=boxes, weights=weights, embeddings=boxes))
        if np.allclose(before, boxes[idx]):
            continue
        bumped = list(weights)
        bumped[idx] += 0.3
        after = unify(CandidateSet(boxes=boxes, weights=bumped, embeddings=boxes))
        assert np.linalg.norm(after - boxes[idx]) < np.linalg.norm(before - boxes[idx])
        checked += 1
    assert checked >= 990
    report(
        "criterion 3 (unification formula)",
        f"zero-weight mean dev {worst:.1e}, worked example ok, "
        f"monotone pull on {checked} sets",
    )


# ---------------------------------------------------------------------------
# Criterion 4: generator/metric consistency on a 500-scene corpus.
# ---------------------------------------------------------------------------

def test_criterion_4_generator_metric_consistency():
    ds = generate_dataset(GeneratorConfig(num_scenes=500, seed=99))
    names = ds.vocab.predicates
    scores = [relation_score(s.gt_boxes, s.graph.edges, names) for s in ds.scenes]
    assert scores == [1.0] * 500
    assert evaluate(ds, ds).rs == 1.0
    report(
        "criterion 4 (generator/metric consistency)",
        "RS over ground truth of 500 generated scenes = 1.0 exactly",
    )


# ---------------------------------------------------------------------------
# Criterion 5: training smoke + ablation ordering on the reference config
# (|C|=10, |R|=6, 3-5 entities, 200 train / 100 held-out, seed 42, 200
# epochs, defaults otherwise). The margins are checked on seed 42 first;
# when they fail there, the criterion's seed-sensitivity fallback runs the
# same comparison on five fixed seeds and requires at least four passes.
# The single-seed run fits the 15-minute budget; the fallback, by
# construction (15 trainings of 200 epochs), cannot.
# ---------------------------------------------------------------------------

REFERENCE_SEEDS = (42, 1, 2, 3, 4)

# Realized final training relation loss of the full model on the seed-42
# reference run was 4.7e-5; pinned with headroom as a regression guard.
PINNED_FINAL_L_REL = 1e-3


def run_reference(seed: int) -> dict:
    from vrlayout.reference import reference_split
    from vrlayout.rng import Xoshiro256StarStar as Rng

    train_ds, val_ds = reference_split(seed)
    init = init_params(
        ModelConfig(num_categories=10, num_predicates=6), Rng(seed).next_u64()
    )
    initial_l_rel, _ = dataset_losses(train_ds, init, mode="full")
    result = {"seed": seed, "initial_l_rel": initial_l_rel}
    for mode in ("full", "no-weighted-unification", "no-individual"):
        params, history = train(
            train_ds,
            TrainConfig(epochs=200, seed=seed, mode=mode),
            val_dataset=val_ds,
        )
        result[mode] = dataset_relation_score(val_ds, params, mode=mode)
        if mode == "full":
            result["final_l_rel"] = history[-1].l_rel
    return result


def margins_pass(r: dict) -> bool:
    return (
        r["full"] - r["no-weighted-unification"] >= 0.02
        and r["no-weighted-unification"] - r["no-individual"] >= 0.02
        and r["full"] >= 0.70
    )


def describe(r: dict) -> str:
    return (
        f"seed {r['seed']}: RS full={r['full']:.4f} "
        f"no-wu={r['no-weighted-unification']:.4f} "
        f"no-ind={r['no-individual']:.4f}"
    )


@pytest.mark.slow
def test_criterion_5_training_smoke_and_ablation_ordering():
    start = time.monotonic()
    first = run_reference(42)

    # (a) the relation loss at least halves over training
    assert first["final_l_rel"] <= 0.5 * first["initial_l_rel"]
    assert first["final_l_rel"] <= PINNED_FINAL_L_REL
    print(
        f"\n  criterion 5a: l_rel {first['initial_l_rel']:.3f} -> "
        f"{first['final_l_rel']:.4f} ({time.monotonic() - start:.0f}s)"
    )
    print(f"  criterion 5b/5c: {describe(first)}")

    if margins_pass(first):
        assert time.monotonic() - start <= 15 * 60
        report(
            "criterion 5 (training smoke + ablation ordering)",
            describe(first),
        )
        return

    # seed-sensitive margins: fall back to the five-fixed-seed protocol
    results = [first] + [run_reference(seed) for seed in REFERENCE_SEEDS[1:]]
    passes = sum(margins_pass(r) for r in results)
    lines = "\n".join(
        f"  {describe(r)} margins=({r['full'] - r['no-weighted-unification']:+.4f}, "
        f"{r['no-weighted-unification'] - r['no-individual']:+.4f}) "
        f"pass={margins_pass(r)}"
        for r in results
    )
    print(f"\n  criterion 5 fallback over seeds {REFERENCE_SEEDS}:\n{lines}")
    if passes < 4:
        print(f"\nFAIL criterion 5 (ablation ordering): {passes}/5 seeds pass")
    assert passes >= 4, (
        f"ablation ordering holds on only {passes}/5 seeds (need 4):\n{lines}"
    )
    report(
        "criterion 5 (training smoke + ablation ordering)",
        f"{passes}/5 seeds pass the margin test",
    )


# ---------------------------------------------------------------------------
# Criterion 6: CLI determinism.
# ---------------------------------------------------------------------------

def test_criterion_6_cli_determinism(tmp_path):
    outputs = {}
    for tag in ("run1", "run2"):
        base = tmp_path / tag
        base.mkdir()
        data = base / "d.json"
        ckpt = base / "m.ckpt"
        pred = base / "p.json"
        rep = base / "r.json"
        assert main(["gen", "--scenes", "12", "--seed", "42", "--out", str(data)]) == 0
        assert main([
            "train", "--data", str(data), "--out", str(ckpt),
            "--epochs", "3", "--seed", "42",
        ]) == 0
        assert main([
            "predict", "--ckpt", str(ckpt), "--data", str(data), "--out", str(pred),
        ]) == 0
        assert main([
            "eval", "--pred", str(pred), "--gt", str(data), "--out", str(rep),
        ]) == 0
        outputs[tag] = tuple(
            p.read_bytes() for p in (data, ckpt, ckpt.with_suffix(".ckpt.history.json"), pred, rep)
        )
    assert outputs["run1"] == outputs["run2"]
    report(
        "criterion 6 (determinism)",
        "gen/train/predict/eval byte-identical across two runs",
    )


# ---------------------------------------------------------------------------
# Criterion 7: rasterization and layout composition.
# ---------------------------------------------------------------------------

def test_criterion_7_rasterization():
    mask = rasterize_mask([0.25, 0.25, 0.5, 0.5], 8)
    expected = np.zeros((8, 8))
    expected[2:6, 2:6] = 1.0
    assert np.array_equal(mask, expected)

    rng = np.random.default_rng(5)
    for _ in range(20):
        g = 8
        c0, r0 = rng.integers(0, 4, size=2)
        w, h = rng.integers(1, 4, size=2)
        box = [c0 / g, r0 / g, w / g, h / g]
        emb = rng.normal(size=6)
        assert np.allclose(
            warp_embedding(emb, box, g),
            rasterize_mask(box, g)[:, :, None] * emb,
        )

    ds = generate_dataset(GeneratorConfig(num_scenes=100, seed=17))
    rng_local = np.random.default_rng(9)
    for scene in ds.scenes:
        layouts = [
            warp_embedding(rng_local.normal(size=16), b.as_tuple(), 16)
            for b in scene.gt_boxes
        ]
        perm = rng_local.permutation(len(layouts))
        direct = compose_layout(layouts)
        shuffled = compose_layout([layouts[i] for i in perm])
        assert np.allclose(direct, shuffled)
    report(
        "criterion 7 (rasterization)",
        "16-cell mask exact, grid-aligned warp = mask x embedding, "
        "composition permutation-invariant on 100 scenes",
    )


# ---------------------------------------------------------------------------
# Criterion 8: round-trips and recall monotonicity.
# ---------------------------------------------------------------------------

def test_criterion_8_round_trips_and_monotonicity():
    ds = generate_dataset(GeneratorConfig(num_scenes=40, seed=23))
    text = serialize_dataset(ds)
    assert parse_dataset(text) == ds
    assert serialize_dataset(parse_dataset(text)) == text

    params = init_params(
        ModelConfig(
            num_categories=4, num_predicates=6, d_emb=6, iu_hidden=8, cls_hidden=8
        ),
        seed=3,
    )
    vocab = default_vocabulary(4)
    ck = checkpoint_to_json(params, vocab, "full")
    loaded, vocab2, mode = checkpoint_from_json(ck)
    assert checkpoint_to_json(loaded, vocab2, mode) == ck

    rng = Xoshiro256StarStar(88)
    taus = (0.1, 0.3, 0.5, 0.7, 0.9)
    for _ in range(100):
        n = rng.randint(1, 6)
        gt = [random_box(rng) for _ in range(n)]
        pred = [random_box(rng) for _ in range(n)]
        values = [recall_at_tau(pred, gt, tau) for tau in taus]
        assert all(a >= b for a, b in zip(values, values[1:]))
    report(
        "criterion 8 (round-trips)",
        "dataset and checkpoint JSON bit-exact, recall non-increasing in tau "
        "on 100 corpora",
    )
