"""Query strategies: score attribute groups and pick the next one to ask.

Three informed strategies plus baselines. Sibling-variance ranks groups by
how much their attributes vary across the taxonomy siblings of the similar
base class; representation-change ranks by how strongly the attribute
encoder's latent output reacts to each attribute (Jacobian column norms) at
the current imputed descriptor; the image-based strategy scores each group
by how much swapping in image-recognized values would pull the descriptor's
embedding toward the exemplar image's embedding. Baselines: seeded random
order, a fixed expert order, and variance measured over all base classes
instead of siblings.

Scores live on groups (one real per group id); ties always break toward the
lowest group id so runs replay exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._rng import make_rng
from .dataset import AttributeSchema, Dataset, Taxonomy, siblings
from .learner import EmbeddingModel

KINDS = (
    "sibling_variance",
    "representation_change",
    "image_based",
    "random",
    "fixed_order",
    "global_variance",
)

# A ScoreVector is a plain float array with one entry per group id. All
# entries are finite except in image-based scoring, where already-queried
# groups carry -inf and an exact embedding match carries +inf.
ScoreVector = np.ndarray


class BudgetExhausted(RuntimeError):
    """No unqueried group remains within the session's budget."""


@dataclass(frozen=True)
class Strategy:
    """One of the query strategies in KINDS, with its parameters."""

    kind: str
    seed: int | None = None
    order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "fixed_order":
            if self.order is None:
                raise ValueError("fixed_order needs an order")
            if sorted(self.order) != list(range(len(self.order))):
                raise ValueError("fixed_order must be a permutation of group ids")

    @classmethod
    def sibling_variance(cls) -> "Strategy":
        return cls("sibling_variance")

    @classmethod
    def representation_change(cls) -> "Strategy":
        return cls("representation_change")

    @classmethod
    def image_based(cls) -> "Strategy":
        return cls("image_based")

    @classmethod
    def random(cls, seed: int | None = None) -> "Strategy":
        return cls("random", seed=seed)

    @classmethod
    def fixed_order(cls, order: Sequence[int]) -> "Strategy":
        return cls("fixed_order", order=tuple(int(g) for g in order))

    @classmethod
    def global_variance(cls) -> "Strategy":
        return cls("global_variance")

    @property
    def label(self) -> str:
        return self.kind

    def __str__(self) -> str:
        if self.kind == "random" and self.seed is not None:
            return f"random:{self.seed}"
        if self.kind == "fixed_order":
            return "fixed_order:" + ",".join(str(g) for g in self.order)
        return self.kind


def parse_strategy(text: str) -> Strategy:
    """Inverse of str(Strategy); used by sweep configs and the HTTP API."""
    kind, _, arg = text.partition(":")
    if kind == "random":
        return Strategy.random(int(arg) if arg else None)
    if kind == "fixed_order":
        if not arg:
            raise ValueError("fixed_order needs a comma-separated permutation")
        return Strategy.fixed_order([int(g) for g in arg.split(",")])
    return Strategy(kind)


def group_max(per_attribute: np.ndarray, schema: AttributeSchema) -> ScoreVector:
    """Collapse per-attribute values to per-group scores by taking the max."""
    return np.array([max(per_attribute[j] for j in members) for members in schema.groups])


def sibling_variance_scores(ds: Dataset, tax: Taxonomy, y: str) -> ScoreVector:
    """Population variance across siblings of the similar class, max per group.

    A singleton sibling set carries no signal (all variances zero), so it
    falls back to variance over all base classes.
    """
    if y not in ds.similar:
        raise KeyError(f"similar map has no entry for {y!r}")
    return sibling_variance_scores_around(ds, tax, ds.similar[y])


def sibling_variance_scores_around(ds: Dataset, tax: Taxonomy, s: str) -> ScoreVector:
    """Sibling-variance scores anchored at a base class directly."""
    sibs = sorted(siblings(tax, ds.base, s))
    if len(sibs) == 1:
        return global_variance_scores(ds)
    mat = ds.attribute_matrix(sibs)
    return group_max(mat.var(axis=0), ds.schema)


def global_variance_scores(ds: Dataset) -> ScoreVector:
    """Taxonomy-free variant: variance measured over all base classes."""
    mat = ds.attribute_matrix(sorted(ds.base))
    return group_max(mat.var(axis=0), ds.schema)


def representation_change_scores(
    model: EmbeddingModel, a_prime: np.ndarray, schema: AttributeSchema
) -> ScoreVector:
    """L2 norms of attribute-encoder Jacobian columns at the imputed vector,
    max per group. Recomputed whenever the imputed vector changes."""
    jac = model.attribute_jacobian(a_prime)
    return group_max(np.linalg.norm(jac, axis=0), schema)


def image_based_scores(
    model: EmbeddingModel,
    a_prime: np.ndarray,
    x_y: np.ndarray,
    schema: AttributeSchema,
    queried: Iterable[int],
) -> ScoreVector:
    """Inverse distance between each group-corrected descriptor's embedding
    and the exemplar image's embedding.

    For each unqueried group, the hypothetical descriptor replaces that
    group's values with the ones recognized from the image. A zero distance
    scores +inf (that correction would match the image exactly); queried
    groups score -inf and are never re-selected.
    """
    a_prime = np.asarray(a_prime, dtype=float)
    queried = set(queried)
    z_img = model.encode_image(x_y)
    recognized = model.decode_attributes(z_img)
    scores = np.full(schema.n_groups, -np.inf)
    for g, members in enumerate(schema.groups):
        if g in queried:
            continue
        hyp = a_prime.copy()
        hyp[list(members)] = recognized[list(members)]
        dist = float(np.linalg.norm(model.encode_attributes(hyp) - z_img))
        scores[g] = np.inf if dist == 0.0 else 1.0 / dist
    return scores


def next_query(
    strategy: Strategy,
    queried: Iterable[int],
    n_groups: int,
    scores: ScoreVector | None = None,
    rng_context: tuple = (),
) -> int:
    """Pick the next group id for the strategy; ties break to lowest id.

    ``scores`` is required for score-based strategies. The random strategy
    draws from its own RNG keyed by (seed, *rng_context) so replays are
    exact; ``rng_context`` is typically (novel_id, round).
    """
    queried = set(queried)
    unqueried = [g for g in range(n_groups) if g not in queried]
    if not unqueried:
        raise BudgetExhausted("budget exhausted: all groups already queried")

    if strategy.kind == "random":
        seed = strategy.seed if strategy.seed is not None else 0
        rng = make_rng("fieldguide-random-strategy", seed, *rng_context)
        return int(unqueried[rng.integers(len(unqueried))])
    if strategy.kind == "fixed_order":
        for g in strategy.order:
            if g not in queried:
                return int(g)
        raise BudgetExhausted("budget exhausted: all groups already queried")

    if scores is None:
        raise ValueError(f"strategy {strategy.kind} needs a score vector")
    if len(scores) != n_groups:
        raise ValueError(f"expected {n_groups} scores, got {len(scores)}")
    best = max(scores[g] for g in unqueried)
    return int(min(g for g in unqueried if scores[g] == best))
