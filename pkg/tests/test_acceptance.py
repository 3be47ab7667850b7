"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Heavy criteria share six trained embedding models (seeds 0..5) on the
default synthetic benchmark dataset. Run with `pytest tests/test_acceptance.py -v -s`
to see the per-criterion lines and timings.
"""

import itertools
import subprocess
import sys
import time
from dataclasses import replace

import json

import numpy as np
import pytest

from fieldguide import (
    ModelConfig,
    OracleConfig,
    Strategy,
    SynthConfig,
    harmonic_mean,
    image_based_scores,
    image_split,
    impute,
    next_query,
    run_session,
    start_session,
)
from fieldguide.learner import MLP, per_class_accuracy
from fieldguide import bench

SEEDS = (0, 1, 2, 3, 4, 5)
MODEL_CFG = ModelConfig()
ALL_STRATEGY_KINDS = (
    "sibling_variance",
    "representation_change",
    "image_based",
    "global_variance",
    "random",
    "fixed_order",
)


def report(criterion: str, ok: bool, detail: str, started: float, limit_s: float):
    elapsed = time.time() - started
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail} ({elapsed:.1f}s)"
    print(line, file=sys.stderr)
    assert ok, line
    assert elapsed < limit_s, f"{criterion} exceeded runtime limit {limit_s}s: {elapsed:.1f}s"


@pytest.fixture(scope="module")
def default_dataset():
    return bench.resolve_dataset(SynthConfig())


@pytest.fixture(scope="module")
def models(default_dataset):
    return {s: bench.trained_model(default_dataset, replace(MODEL_CFG, seed=s)) for s in SEEDS}


def strategies_for(ds, seed: int):
    G = ds.schema.n_groups
    return (
        Strategy.sibling_variance(),
        Strategy.representation_change(),
        Strategy.image_based(),
        Strategy.global_variance(),
        Strategy.random(seed=seed),
        Strategy.fixed_order(tuple(range(G))),
    )


def test_a1_imputation_exactness():
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 64))
        truth = rng.normal(size=d)
        similar = rng.normal(size=d)
        answered_idx = rng.choice(d, size=int(rng.integers(0, d + 1)), replace=False)
        answers = {int(i): float(truth[i]) for i in answered_idx}
        got = impute(answers, similar)
        for i in range(d):
            expected = truth[i] if i in answers else similar[i]
            worst = max(worst, abs(got[i] - expected))
    report("A1 imputation exactness", worst == 0.0, f"max_abs_err={worst}", t0, 1.0)


def test_a2_jacobian_correctness():
    t0 = time.time()
    rng = np.random.default_rng(202)
    net = MLP.init([48, 32, 12], "tanh", rng)  # randomly initialized 2-layer encoder
    h = 1e-4
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=48)
        jac = net.jacobian(x)
        fd = np.empty_like(jac)
        for i in range(48):
            e = np.zeros(48)
            e[i] = h
            fd[:, i] = (net(x + e[None, :])[0] - net(x - e[None, :])[0]) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(jac), np.abs(fd)), 1e-8)
        worst = max(worst, float(np.max(np.abs(jac - fd) / denom)))
    report("A2 jacobian correctness", worst < 1e-4, f"max_rel_err={worst:.2e}", t0, 60.0)


def test_a3_endpoint_equality(default_dataset, models):
    t0 = time.time()
    ds = default_dataset
    G = ds.schema.n_groups
    split = image_split(ds)
    oracle = OracleConfig(noise_std=0.0)
    from fieldguide.learner import evaluate, train_classifier

    ok = True
    details = []
    for seed in SEEDS:
        model = models[seed]
        ref = bench.full_annotation_reference(ds, seed, MODEL_CFG)
        for strategy in strategies_for(ds, seed):
            descriptors = {}
            for y in sorted(ds.novel):
                exemplar = (
                    ds.features[split.exemplar_rows[y]]
                    if strategy.kind == "image_based"
                    else None
                )
                st = start_session(ds, y, ds.similar[y], strategy, G, exemplar=exemplar)
                st = run_session(ds, st, oracle, tax=ds.taxonomy, model=model)
                if not np.array_equal(st.imputed, ds.attributes_of(y)):
                    ok = False
                    details.append(f"{strategy.label}/{seed}/{y}: descriptor != truth")
                descriptors[y] = st.imputed
            clf = train_classifier(model, ds, descriptors, seed=seed)
            m = evaluate(clf, model, ds, "unseen_only")
            if (m.acc_unseen, m.acc_seen, m.harmonic) != (
                ref.acc_unseen, ref.acc_seen, ref.harmonic,
            ):
                ok = False
                details.append(f"{strategy.label}/{seed}: metrics differ from reference")
    report(
        "A3 endpoint equality",
        ok,
        "all strategies reach ground-truth descriptors and reference metrics"
        if ok
        else "; ".join(details[:4]),
        t0,
        300.0,
    )


@pytest.fixture(scope="module")
def a4_sweep(default_dataset, models):
    G = default_dataset.schema.n_groups
    cfg = bench.SweepConfig(
        dataset=default_dataset,
        strategies=(Strategy.sibling_variance(), Strategy.random()),
        budgets=(9, G),
        seeds=SEEDS,
        model=MODEL_CFG,
    )
    return bench.run_budget_sweep(cfg)


def test_a4_budget_efficiency(default_dataset, models, a4_sweep):
    t0 = time.time()
    ds = default_dataset
    G = ds.schema.n_groups
    assert int(np.ceil(0.35 * G)) == 9
    means = bench.mean_curve(a4_sweep)
    sib9 = means[("sibling_variance", 9)]
    sib_full = means[("sibling_variance", G)]
    rand9 = means[("random", 9)]
    reduced9 = float(
        np.mean([
            bench.reduced_vocabulary_baseline(ds, 9, s, MODEL_CFG).acc_unseen for s in SEEDS
        ])
    )
    ok = (
        sib9 >= 0.95 * sib_full
        and sib9 - rand9 >= 0.05
        and sib9 - reduced9 >= 0.05
    )
    report(
        "A4 budget efficiency",
        ok,
        f"sib@9={sib9:.3f} vs sib@{G}={sib_full:.3f}, random@9={rand9:.3f}, "
        f"reduced@9={reduced9:.3f}",
        t0,
        900.0,
    )


def test_a5_similar_class_importance(default_dataset, models):
    t0 = time.time()
    expert = bench.similar_class_variants(
        default_dataset, "expert", seeds=SEEDS, budgets=(0,), model_cfg=MODEL_CFG
    )
    random_map = bench.similar_class_variants(
        default_dataset, "random", seeds=SEEDS, budgets=(0,), model_cfg=MODEL_CFG
    )
    acc_e = float(np.mean([r.acc_unseen for r in expert]))
    acc_r = float(np.mean([r.acc_unseen for r in random_map]))
    ok = acc_e >= 2.0 * acc_r
    report(
        "A5 similar-class importance",
        ok,
        f"expert@0={acc_e:.3f} vs random-similar@0={acc_r:.3f} (ratio {acc_e / max(acc_r, 1e-9):.1f}x)",
        t0,
        600.0,
    )


def test_a6_taxonomy_ablation(default_dataset, models):
    t0 = time.time()
    cfg = bench.SweepConfig(
        dataset=default_dataset,
        strategies=(Strategy.sibling_variance(), Strategy.global_variance()),
        budgets=(3, 6, 9),
        seeds=SEEDS,
        model=MODEL_CFG,
    )
    means = bench.mean_curve(bench.run_budget_sweep(cfg))
    ok = all(
        means[("global_variance", b)] <= means[("sibling_variance", b)] for b in (3, 6, 9)
    )
    margin3 = means[("sibling_variance", 3)] - means[("global_variance", 3)]
    ok = ok and margin3 >= 0.03
    report(
        "A6 taxonomy ablation",
        ok,
        f"margin@3={margin3:.3f}; sib={[round(means[('sibling_variance', b)], 3) for b in (3, 6, 9)]} "
        f"vs global={[round(means[('global_variance', b)], 3) for b in (3, 6, 9)]}",
        t0,
        900.0,
    )


def test_a7_noise_robustness(default_dataset, models):
    t0 = time.time()
    ds = default_dataset

    def sib5(noise_std):
        cfg = bench.SweepConfig(
            dataset=ds,
            strategies=(Strategy.sibling_variance(),),
            budgets=(5,),
            seeds=SEEDS,
            oracle=OracleConfig(noise_std=noise_std),
            model=MODEL_CFG,
        )
        return np.array([r.acc_unseen for r in bench.run_budget_sweep(cfg)])

    drop_sib = float(np.mean(sib5(0.0) - sib5(0.1)))
    rv_clean = np.array([
        bench.reduced_vocabulary_baseline(ds, 5, s, MODEL_CFG).acc_unseen for s in SEEDS
    ])
    rv_noisy = np.array([
        bench.reduced_vocabulary_baseline(
            ds, 5, s, MODEL_CFG, noise_std=0.1, oracle_seed=s
        ).acc_unseen
        for s in SEEDS
    ])
    drop_rv = float(np.mean(rv_clean - rv_noisy))
    ok = drop_sib <= drop_rv
    report(
        "A7 noise robustness",
        ok,
        f"sibling-variance drop={drop_sib:.3f} <= reduced-vocabulary drop={drop_rv:.3f}",
        t0,
        900.0,
    )


def test_a8_metric_exactness():
    t0 = time.time()
    checks = [
        abs(harmonic_mean(0.6, 0.3) - 0.4) < 1e-12,
        harmonic_mean(0.0, 0.7) == 0.0,
        harmonic_mean(0.7, 0.0) == 0.0,
        harmonic_mean(0.0, 0.0) == 0.0,
        abs(harmonic_mean(1.0, 1.0) - 1.0) < 1e-12,
        abs(harmonic_mean(0.25, 0.75) - 0.375) < 1e-12,
        per_class_accuracy(["a", "a", "b", "b"], ["a", "a", "b", "x"], ["a", "b"]) == 0.75,
        per_class_accuracy(["a"] * 9 + ["b"], ["a"] * 9 + ["x"], ["a", "b"]) == 0.5,
    ]
    report("A8 metric exactness", all(checks), f"{sum(checks)}/{len(checks)} identities hold", t0, 1.0)


def test_a9_sweep_determinism(tmp_path):
    t0 = time.time()
    synth = {
        "n_super": 3, "per_super": 4, "n_novel": 4, "d": 12, "G": 6, "m": 16,
        "local_groups_per_super": 2, "images_per_class": 9, "feature_noise": 0.05,
        "seed": 7,
    }
    sweep = {
        "dataset": {"synth": synth},
        "strategies": ["sibling_variance", "random", "representation_change"],
        "budgets": [0, 2, 6],
        "seeds": [0, 1],
        "oracle": {"noise_std": 0.1, "seed": 3},
        "model": {"latent_dim": 6, "hidden_dims": [16], "epochs": 300},
    }
    cfg_path = tmp_path / "sweep.json"
    cfg_path.write_text(json.dumps(sweep))
    outputs = []
    for name in ("one.csv", "two.csv"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "fieldguide.cli", "sweep",
             "--config", str(cfg_path), "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    ok = outputs[0] == outputs[1]
    report("A9 sweep determinism", ok, "two fresh processes emit byte-identical curves.csv", t0, 300.0)


def test_a10_acquisition_oracles(tiny_dataset, tiny_model):
    t0 = time.time()
    ok = True
    detail = []

    # Exhaustive brute force over every queried subset for G <= 6.
    for G in (2, 3, 4, 5, 6):
        rng = np.random.default_rng(G)
        scores = rng.uniform(size=G)
        order = [int(g) for g in rng.permutation(G)]
        for r in range(G):
            for queried in itertools.combinations(range(G), r):
                queried = set(queried)
                unqueried = [g for g in range(G) if g not in queried]
                brute = max(unqueried, key=lambda g: (scores[g], -g))
                for kind in ("sibling_variance", "representation_change",
                             "image_based", "global_variance"):
                    pick = next_query(Strategy(kind), queried, G, scores=scores)
                    if pick != brute:
                        ok = False
                        detail.append(f"{kind} G={G} queried={queried}")
                pick = next_query(Strategy.fixed_order(order), queried, G)
                if pick != [g for g in order if g not in queried][0]:
                    ok = False
                    detail.append(f"fixed_order G={G} queried={queried}")
                pick = next_query(Strategy.random(seed=9), queried, G, rng_context=("y", r))
                if pick in queried:
                    ok = False
                    detail.append(f"random picked queried group G={G}")

    # Image-based: inverse-distance argmax equals direct distance argmin.
    ds, model = tiny_dataset, tiny_model
    G = ds.schema.n_groups
    rng = np.random.default_rng(1010)
    for _ in range(100):
        x = ds.features[rng.integers(ds.features.shape[0])]
        a_prime = rng.uniform(0, 1, ds.schema.d)
        queried = set(rng.choice(G, size=int(rng.integers(0, G - 1)), replace=False).tolist())
        scores = image_based_scores(model, a_prime, x, ds.schema, queried)
        pick = next_query(Strategy.image_based(), queried, G, scores=scores)
        z = model.encode_image(x)
        recognized = model.decode_attributes(z)
        dists = {}
        for g in range(G):
            if g in queried:
                continue
            hyp = a_prime.copy()
            hyp[list(ds.schema.groups[g])] = recognized[list(ds.schema.groups[g])]
            dists[g] = float(np.linalg.norm(model.encode_attributes(hyp) - z))
        best = min(sorted(dists), key=lambda g: (dists[g], g))
        if pick != best:
            ok = False
            detail.append("image_based argmax != distance argmin")

    report(
        "A10 acquisition oracles",
        ok,
        "greedy selection matches brute force for every strategy" if ok else "; ".join(detail[:3]),
        t0,
        120.0,
    )
