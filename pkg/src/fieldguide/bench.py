"""Benchmark harness: accuracy-vs-annotation-budget sweeps and baselines.

A sweep trains one embedding model per seed (shared by every strategy and
budget), runs an annotation session for each novel class, trains a latent
classifier on the finalized descriptors at each budget, and records
unseen/seen/harmonic accuracies as CSV rows. Identical configs produce
byte-identical CSV output.

Sessions are driven once to the largest requested budget and snapshotted at
the smaller ones; every strategy here picks round r independently of the
final budget, so the snapshots equal what a shorter session would produce.
"""

from __future__ import annotations

import csv
import hashlib
import io
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._rng import key_to_int, make_rng
from .acquisition import Strategy, parse_strategy
from .dataset import (
    AttributeSchema,
    Dataset,
    SynthConfig,
    generate_synthetic,
    image_split,
    load_dataset,
    normalize_attributes,
    siblings,
)
from .learner import (
    EmbeddingModel,
    Metrics,
    ModelConfig,
    evaluate,
    train_classifier,
    train_embedding_model,
)
from .session import (
    OracleConfig,
    propose_query,
    simulated_oracle_answer,
    start_session,
    submit_answer,
)

DEFAULT_SEEDS = (0, 1, 2, 3, 4, 5)

CURVES_HEADER = ("strategy", "budget", "seed", "acc_unseen", "acc_seen", "harmonic")


@dataclass(frozen=True)
class SweepConfig:
    """What to sweep: dataset source, strategies, budgets, seeds, oracle."""

    dataset: str | Path | SynthConfig | Dataset
    strategies: tuple[Strategy, ...]
    budgets: tuple[int, ...]
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    oracle: OracleConfig = OracleConfig()
    model: ModelConfig = ModelConfig()
    generalized: bool = False

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.budgets:
            raise ValueError("need at least one budget")
        if not self.strategies:
            raise ValueError("need at least one strategy")


@dataclass(frozen=True)
class CurveRow:
    strategy: str
    budget: int
    seed: int
    acc_unseen: float
    acc_seen: float
    harmonic: float


def resolve_dataset(source: str | Path | SynthConfig | Dataset) -> Dataset:
    """Load or generate the dataset and normalize it."""
    if isinstance(source, Dataset):
        ds = source
    elif isinstance(source, SynthConfig):
        ds = generate_synthetic(source)
    else:
        ds = load_dataset(source)
    if ds.norm_stats is None:
        ds = normalize_attributes(ds)
    return ds


# ---------------------------------------------------------------------------
# Model cache: training depends only on (base attributes, train image rows,
# model config), so independent sweep calls on equal datasets can share one
# trained model per (dataset, config) pair. Retraining would produce the
# bit-identical model, so caching never changes results.

_MODEL_CACHE: dict[tuple[str, ModelConfig], EmbeddingModel] = {}
_MODEL_CACHE_LOCK = threading.Lock()


def _training_fingerprint(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(repr(ds.schema.groups).encode())
    split = image_split(ds)
    for cid in sorted(ds.base):
        h.update(cid.encode())
        h.update(np.ascontiguousarray(ds.attributes_of(cid)).tobytes())
        h.update(np.ascontiguousarray(ds.features[split.train_rows[cid]]).tobytes())
    if ds.norm_stats is not None:
        h.update(np.ascontiguousarray(ds.norm_stats[0]).tobytes())
        h.update(np.ascontiguousarray(ds.norm_stats[1]).tobytes())
    return h.hexdigest()


def trained_model(ds: Dataset, cfg: ModelConfig) -> EmbeddingModel:
    """Train (or fetch the cached) embedding model for this dataset+config."""
    key = (_training_fingerprint(ds), cfg)
    with _MODEL_CACHE_LOCK:
        if key in _MODEL_CACHE:
            return _MODEL_CACHE[key]
    model = train_embedding_model(ds, cfg)
    with _MODEL_CACHE_LOCK:
        _MODEL_CACHE.setdefault(key, model)
    return model


def clear_model_cache() -> None:
    with _MODEL_CACHE_LOCK:
        _MODEL_CACHE.clear()


# ---------------------------------------------------------------------------
# Sweeps


def _session_descriptor_snapshots(
    ds: Dataset,
    model: EmbeddingModel,
    strategy: Strategy,
    budgets: Sequence[int],
    oracle: OracleConfig,
    seed: int,
) -> dict[int, dict[str, np.ndarray]]:
    """Descriptors per budget for every novel class, from one session each."""
    max_budget = max(budgets)
    wanted = set(budgets)
    split = image_split(ds)
    snaps: dict[int, dict[str, np.ndarray]] = {b: {} for b in budgets}
    for y in sorted(ds.novel):
        exemplar = None
        if strategy.kind == "image_based":
            if y not in split.exemplar_rows:
                raise ValueError(f"image_based strategy needs an exemplar image for {y!r}")
            exemplar = ds.features[split.exemplar_rows[y]]
        st = start_session(ds, y, ds.similar[y], strategy, max_budget, exemplar=exemplar)
        while True:
            if st.rounds_answered in wanted:
                snaps[st.rounds_answered][y] = st.imputed.copy()
            if st.rounds_answered >= max_budget:
                break
            proposal = propose_query(st, ds, tax=ds.taxonomy, model=model)
            values = simulated_oracle_answer(ds, oracle, y, proposal.group_id)
            st = submit_answer(st, ds, proposal.group_id, values)
    return snaps


def _per_run_strategy(strategy: Strategy, seed: int) -> Strategy:
    # The random baseline re-draws its order per sweep seed unless pinned.
    if strategy.kind == "random" and strategy.seed is None:
        return replace(strategy, seed=seed)
    return strategy


def _per_run_oracle(oracle: OracleConfig, seed: int) -> OracleConfig:
    # Noise draws vary across sweep seeds; a fixed oracle seed still keeps
    # each run reproducible.
    if oracle.noise_std == 0.0:
        return oracle
    return replace(oracle, seed=key_to_int(f"{oracle.seed}/{seed}"))


def run_budget_sweep(cfg: SweepConfig) -> list[CurveRow]:
    """All (strategy, budget, seed) accuracy rows, sorted for stable output."""
    ds = resolve_dataset(cfg.dataset)
    G = ds.schema.n_groups
    for b in cfg.budgets:
        if not (0 <= b <= G):
            raise ValueError(f"budget {b} outside [0, {G}]")
    rows = _run_sweep_on(ds, cfg)
    rows.sort(key=lambda r: (r.strategy, r.budget, r.seed))
    return rows


def full_annotation_reference(
    ds: Dataset, seed: int, model_cfg: ModelConfig, mode: str = "unseen_only"
) -> Metrics:
    """The traditional fully-annotated run: ground-truth novel descriptors."""
    model = trained_model(ds, replace(model_cfg, seed=seed))
    descriptors = {y: ds.attributes_of(y) for y in sorted(ds.novel)}
    clf = train_classifier(model, ds, descriptors, seed=seed)
    return evaluate(clf, model, ds, mode)


def mean_curve(rows: Iterable[CurveRow]) -> dict[tuple[str, int], float]:
    """Mean unseen accuracy per (strategy, budget) across seeds."""
    acc: dict[tuple[str, int], list[float]] = {}
    for r in rows:
        acc.setdefault((r.strategy, r.budget), []).append(r.acc_unseen)
    return {k: float(np.mean(v)) for k, v in acc.items()}


def write_curves(rows: Iterable[CurveRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(curves_csv(rows))


def curves_csv(rows: Iterable[CurveRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVES_HEADER)
    for r in rows:
        w.writerow(
            [r.strategy, r.budget, r.seed,
             repr(r.acc_unseen), repr(r.acc_seen), repr(r.harmonic)]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Baselines and ablations


def restrict_to_groups(ds: Dataset, group_ids: Sequence[int]) -> Dataset:
    """A dataset whose attribute space keeps only the given groups.

    Kept attributes stay in their original relative order, so restricting to
    all groups returns an identical dataset.
    """
    chosen = sorted(set(int(g) for g in group_ids))
    keep = sorted(j for g in chosen for j in ds.schema.groups[g])
    old_to_new = {j: i for i, j in enumerate(keep)}
    groups = tuple(
        tuple(old_to_new[j] for j in ds.schema.groups[g]) for g in chosen
    )
    schema = AttributeSchema(
        d=len(keep),
        groups=groups,
        attribute_names=None
        if ds.schema.attribute_names is None
        else tuple(ds.schema.attribute_names[j] for j in keep),
        group_names=None
        if ds.schema.group_names is None
        else tuple(ds.schema.group_names[g] for g in chosen),
    )
    classes = tuple(replace(c, attributes=c.attributes[keep]) for c in ds.classes)
    stats = ds.norm_stats
    if stats is not None:
        stats = (stats[0][keep], stats[1][keep])
    return replace(ds, schema=schema, classes=classes, norm_stats=stats)


def reduced_vocabulary_baseline(
    ds: Dataset,
    k: int,
    seed: int,
    model_cfg: ModelConfig,
    noise_std: float = 0.0,
    oracle_seed: int = 0,
    mode: str = "unseen_only",
) -> Metrics:
    """Traditional ZSL with a smaller vocabulary: keep k uniformly sampled
    groups, retrain everything at the reduced dimensionality, and describe
    every novel class fully (optionally with noisy values)."""
    G = ds.schema.n_groups
    if not (1 <= k <= G):
        raise ValueError(f"k must be in [1, {G}], got {k}")
    rng = make_rng("fieldguide-reduced-vocab", seed)
    chosen = sorted(int(g) for g in rng.choice(G, size=k, replace=False))
    reduced = restrict_to_groups(ds, chosen)
    model = trained_model(reduced, replace(model_cfg, seed=seed))
    oracle = OracleConfig(noise_std=noise_std, seed=oracle_seed)
    descriptors = {}
    for y in sorted(reduced.novel):
        parts = [
            simulated_oracle_answer(reduced, oracle, y, g)
            for g in range(reduced.schema.n_groups)
        ]
        desc = np.empty(reduced.schema.d)
        for g, vals in enumerate(parts):
            desc[list(reduced.schema.groups[g])] = vals
        descriptors[y] = desc
    clf = train_classifier(model, reduced, descriptors, seed=seed)
    return evaluate(clf, model, reduced, mode)


def similar_map_variant(ds: Dataset, variant: str, seed: int = 0) -> dict[str, str]:
    """expert: as annotated; random: uniform over base; nearest_sibling:
    the sibling closest to the expert choice by attribute L2 (the expert
    choice itself when it has no other siblings)."""
    if variant == "expert":
        return dict(ds.similar)
    base_sorted = sorted(ds.base)
    out: dict[str, str] = {}
    for y in sorted(ds.similar):
        s = ds.similar[y]
        if variant == "random":
            rng = make_rng("fieldguide-similar-variant", seed, y)
            out[y] = base_sorted[int(rng.integers(len(base_sorted)))]
        elif variant == "nearest_sibling":
            others = sorted(siblings(ds.taxonomy, ds.base, s) - {s})
            if not others:
                out[y] = s
            else:
                ref = ds.attributes_of(s)
                dists = [float(np.linalg.norm(ds.attributes_of(b) - ref)) for b in others]
                out[y] = others[int(np.argmin(dists))]
        else:
            raise ValueError(f"unknown similar-class variant {variant!r}")
    return out


def similar_class_variants(
    ds: Dataset,
    variant: str,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    strategy: Strategy = Strategy.sibling_variance(),
    budgets: Sequence[int] = (0,),
    oracle: OracleConfig = OracleConfig(),
    model_cfg: ModelConfig = ModelConfig(),
    generalized: bool = False,
) -> list[CurveRow]:
    """Budget sweep with the similar map replaced by the chosen variant.

    The random variant re-draws its map per sweep seed; the embedding model
    does not depend on the similar map, so models are shared across
    variants.
    """
    ds = resolve_dataset(ds)
    rows: list[CurveRow] = []
    for seed in seeds:
        vds = replace(ds, similar=similar_map_variant(ds, variant, seed=seed))
        sweep = SweepConfig(
            dataset=vds,
            strategies=(strategy,),
            budgets=tuple(budgets),
            seeds=(seed,),
            oracle=oracle,
            model=model_cfg,
            generalized=generalized,
        )
        rows.extend(_run_sweep_on(vds, sweep))
    rows.sort(key=lambda r: (r.strategy, r.budget, r.seed))
    return rows


def _run_sweep_on(ds: Dataset, cfg: SweepConfig) -> list[CurveRow]:
    # run_budget_sweep, but on an in-memory dataset that is already resolved.
    mode = "generalized" if cfg.generalized else "unseen_only"
    rows: list[CurveRow] = []
    for seed in cfg.seeds:
        model = trained_model(ds, replace(cfg.model, seed=seed))
        oracle = _per_run_oracle(cfg.oracle, seed)
        for strategy in cfg.strategies:
            strat = _per_run_strategy(strategy, seed)
            snaps = _session_descriptor_snapshots(ds, model, strat, cfg.budgets, oracle, seed)
            for budget in cfg.budgets:
                clf = train_classifier(model, ds, snaps[budget], seed=seed)
                metrics = evaluate(clf, model, ds, mode)
                rows.append(
                    CurveRow(strategy.label, budget, seed,
                             metrics.acc_unseen, metrics.acc_seen, metrics.harmonic)
                )
    return rows


# ---------------------------------------------------------------------------
# Latent export


def export_latents(
    model: EmbeddingModel,
    ds: Dataset,
    descriptors: Mapping[str, np.ndarray],
    out_path: str | Path,
    transcripts: Sequence[Mapping] | None = None,
) -> int:
    """Write (tag, class_id, latent coords) rows for external projection.

    One row per held-out test image ("image"), one per descriptor
    ("descriptor"), and, when transcripts are given, one per answered round
    ("round_r", including round_0 at the similar-class start).
    Returns the number of data rows written.
    """
    split = image_split(ds)
    l = model.latent_dim
    rows: list[list] = []

    for cid in sorted(split.test_rows):
        test = split.test_rows[cid]
        if len(test) == 0:
            continue
        z = model.encode_image(ds.features[test])
        for zi in z:
            rows.append(["image", cid] + [repr(float(v)) for v in zi])

    for cid in sorted(descriptors):
        z = model.encode_attributes(np.asarray(descriptors[cid], dtype=float))
        rows.append(["descriptor", cid] + [repr(float(v)) for v in z])

    for doc in transcripts or ():
        st = start_session(
            ds, doc["novel_id"], doc["similar_id"], parse_strategy(doc["strategy"]),
            doc["budget"], exemplar=None if doc.get("exemplar") is None
            else np.asarray(doc["exemplar"]), require_known_novel=False,
        )
        z = model.encode_attributes(st.imputed)
        rows.append(["round_0", st.novel_id] + [repr(float(v)) for v in z])
        for i, ans in enumerate(sorted(doc["answers"], key=lambda a: a["round"]), start=1):
            st = submit_answer(st, ds, ans["group_id"], np.asarray(ans["values"], dtype=float))
            z = model.encode_attributes(st.imputed)
            rows.append([f"round_{i}", st.novel_id] + [repr(float(v)) for v in z])

    with open(out_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["tag", "class_id"] + [f"z_{j}" for j in range(l)])
        w.writerows(rows)
    return len(rows)


# ---------------------------------------------------------------------------
# JSON sweep configs (CLI surface)


def sweep_config_from_dict(doc: Mapping) -> SweepConfig:
    """Parse the sweep JSON schema used by the command line."""
    src = doc["dataset"]
    dataset: str | SynthConfig
    if isinstance(src, str):
        dataset = src
    elif isinstance(src, Mapping) and "synth" in src:
        dataset = SynthConfig(**src["synth"])
    elif isinstance(src, Mapping) and "path" in src:
        dataset = src["path"]
    else:
        raise ValueError("dataset must be a path or {'synth': {...}}")
    model_doc = dict(doc.get("model", {}))
    for k in ("hidden_dims", "loss_weights"):
        if k in model_doc:
            model_doc[k] = tuple(model_doc[k])
    oracle_doc = doc.get("oracle", {})
    return SweepConfig(
        dataset=dataset,
        strategies=tuple(parse_strategy(s) for s in doc["strategies"]),
        budgets=tuple(int(b) for b in doc["budgets"]),
        seeds=tuple(int(s) for s in doc.get("seeds", DEFAULT_SEEDS)),
        oracle=OracleConfig(
            noise_std=float(oracle_doc.get("noise_std", 0.0)),
            seed=int(oracle_doc.get("seed", 0)),
        ),
        model=ModelConfig(**model_doc),
        generalized=bool(doc.get("generalized", False)),
    )
