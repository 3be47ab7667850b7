"""Interactive annotation session for one novel class.

A session starts from an expert-named similar base class: the working
descriptor is that class's attribute vector. Each round the strategy
proposes one unanswered attribute group, the oracle (simulated or human)
supplies that group's values, and the descriptor is updated in place of the
imputed ones. At any point the descriptor equals: answered value where the
group was answered, similar-class value everywhere else.

States are immutable; submit_answer returns a new state. Transcripts
serialize to JSON and replay to the same state.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from ._rng import make_rng
from .acquisition import (
    BudgetExhausted,
    Strategy,
    global_variance_scores,
    image_based_scores,
    next_query,
    parse_strategy,
    representation_change_scores,
    sibling_variance_scores_around,
)
from .dataset import Dataset, Taxonomy
from .learner import EmbeddingModel

TRANSCRIPT_VERSION = 1


@dataclass(frozen=True)
class OracleConfig:
    """Answer source for simulated benchmarks.

    noise_std is the std of Gaussian noise added to ground-truth values, as
    a fraction of the normalized attribute range (1.0); noisy answers are
    clamped to [0, 1]. Draws depend only on (seed, class, group), so a
    session's transcript is reproducible.
    """

    kind: str = "simulated"
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("simulated", "external"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass(frozen=True)
class LogEntry:
    round: int
    group_id: int
    values: tuple[float, ...]
    timestamp: float


@dataclass(frozen=True)
class QueryProposal:
    round: int
    group_id: int
    group_name: str
    members: tuple[int, ...]
    member_names: tuple[str, ...]


@dataclass(frozen=True)
class SessionState:
    """Snapshot of one annotation session; transitions return new states."""

    novel_id: str
    similar_id: str
    strategy: Strategy
    budget: int
    similar_attributes: np.ndarray
    answered: Mapping[int, tuple[float, ...]]
    imputed: np.ndarray
    exemplar: np.ndarray | None
    log: tuple[LogEntry, ...]

    @property
    def rounds_answered(self) -> int:
        return len(self.answered)

    def __post_init__(self):
        object.__setattr__(self, "imputed", _read_only(self.imputed))
        object.__setattr__(self, "similar_attributes", _read_only(self.similar_attributes))
        if self.exemplar is not None:
            object.__setattr__(self, "exemplar", _read_only(self.exemplar))
        if not (0 <= len(self.answered) <= self.budget):
            raise ValueError("answered count exceeds budget")
        if len(self.log) != len(self.answered):
            raise ValueError("log length must equal answered count")


def _read_only(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def answered_indices(st: SessionState, ds: Dataset) -> frozenset[int]:
    """Attribute indices whose values came from the annotator."""
    return frozenset(j for g in st.answered for j in ds.schema.groups[g])


def impute(answers: Mapping[int, float], a_similar: np.ndarray) -> np.ndarray:
    """Merge answered attribute values over the similar class's vector."""
    a_similar = np.asarray(a_similar, dtype=float)
    out = a_similar.copy()
    for j, v in answers.items():
        if not (0 <= int(j) < a_similar.shape[0]):
            raise IndexError(f"attribute index out of range: {j}")
        out[int(j)] = v
    return out


def start_session(
    ds: Dataset,
    y: str,
    s: str,
    strategy: Strategy,
    budget: int,
    exemplar: np.ndarray | None = None,
    require_known_novel: bool = True,
) -> SessionState:
    """Open a session for novel class ``y`` anchored at base class ``s``.

    ``require_known_novel=False`` admits class ids unknown to the dataset
    (human-oracle mode); everything except simulated answers still works.
    """
    if s not in ds.base:
        raise ValueError(f"similar class not in base: {s!r}")
    if require_known_novel and y not in ds.novel:
        raise ValueError(f"unknown novel class: {y!r}")
    if y in ds.base:
        raise ValueError(f"novel class id collides with a base class: {y!r}")
    G = ds.schema.n_groups
    if not (0 <= budget <= G):
        raise ValueError(f"budget must be in [0, {G}], got {budget}")
    if strategy.kind == "image_based" and exemplar is None:
        raise ValueError("exemplar required for image-based querying")
    if exemplar is not None:
        exemplar = np.asarray(exemplar, dtype=float)
        if exemplar.shape != (ds.m,):
            raise ValueError(f"exemplar must have length {ds.m}")
    a_sim = ds.attributes_of(s)
    return SessionState(
        novel_id=y,
        similar_id=s,
        strategy=strategy,
        budget=budget,
        similar_attributes=a_sim,
        answered={},
        imputed=a_sim.copy(),
        exemplar=exemplar,
        log=(),
    )


def propose_query(
    st: SessionState,
    ds: Dataset,
    tax: Taxonomy | None = None,
    model: EmbeddingModel | None = None,
) -> QueryProposal:
    """Pick the next group to ask about; read-only, so repeat calls agree.

    Requirements per strategy: sibling_variance needs ``tax``;
    representation_change and image_based need ``model``.
    """
    if st.rounds_answered >= st.budget:
        raise BudgetExhausted(
            f"budget exhausted: {st.rounds_answered}/{st.budget} queries used"
        )
    schema = ds.schema
    kind = st.strategy.kind
    scores = None
    rng_context: tuple = ()
    if kind == "sibling_variance":
        if tax is None:
            raise ValueError("sibling_variance needs the taxonomy")
        scores = sibling_variance_scores_around(ds, tax, st.similar_id)
    elif kind == "global_variance":
        scores = global_variance_scores(ds)
    elif kind == "representation_change":
        if model is None:
            raise ValueError("representation_change needs the embedding model")
        scores = representation_change_scores(model, st.imputed, schema)
    elif kind == "image_based":
        if model is None:
            raise ValueError("image_based needs the embedding model")
        scores = image_based_scores(model, st.imputed, st.exemplar, schema, st.answered)
    elif kind == "random":
        rng_context = (st.novel_id, st.rounds_answered)

    g = next_query(
        st.strategy,
        queried=st.answered,
        n_groups=schema.n_groups,
        scores=scores,
        rng_context=rng_context,
    )
    members = schema.groups[g]
    return QueryProposal(
        round=st.rounds_answered,
        group_id=g,
        group_name=schema.group_name(g),
        members=members,
        member_names=tuple(schema.attribute_name(j) for j in members),
    )


def submit_answer(
    st: SessionState, ds: Dataset, group_id: int, values: np.ndarray
) -> SessionState:
    """Record the annotator's values for one group; returns the new state."""
    schema = ds.schema
    if not (0 <= group_id < schema.n_groups):
        raise IndexError(f"unknown group id: {group_id}")
    if group_id in st.answered:
        raise ValueError(f"group {group_id} already answered")
    if st.rounds_answered >= st.budget:
        raise BudgetExhausted(f"budget exceeded: {st.budget} answers already recorded")
    members = schema.groups[group_id]
    values = np.asarray(values, dtype=float)
    if values.shape != (len(members),):
        raise ValueError(
            f"group {group_id} expects {len(members)} values, got {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("answer values must be finite")

    imputed = st.imputed.copy()
    imputed[list(members)] = values
    answered = dict(st.answered)
    answered[group_id] = tuple(float(v) for v in values)
    entry = LogEntry(
        round=st.rounds_answered,
        group_id=group_id,
        values=tuple(float(v) for v in values),
        timestamp=time.time(),
    )
    return replace(st, answered=answered, imputed=imputed, log=st.log + (entry,))


def simulated_oracle_answer(
    ds: Dataset, oc: OracleConfig, y: str, group_id: int
) -> np.ndarray:
    """Ground-truth values for the group, optionally noised and clamped.

    Noiseless answers are returned exactly as stored (no clamping), so a
    full noiseless session always ends at the true attribute vector.
    """
    if oc.kind != "simulated":
        raise ValueError("simulated_oracle_answer requires a simulated oracle")
    if y not in ds.class_map:
        raise KeyError(f"no ground-truth attributes for {y!r}")
    members = list(ds.schema.groups[group_id])
    truth = ds.attributes_of(y)[members]
    if oc.noise_std == 0.0:
        return truth.copy()
    rng = make_rng("fieldguide-oracle", oc.seed, y, group_id)
    return np.clip(truth + rng.normal(0.0, oc.noise_std, size=len(members)), 0.0, 1.0)


def finalize(st: SessionState) -> tuple[str, np.ndarray]:
    """The (novel id, descriptor) pair to hand to classifier training."""
    return st.novel_id, st.imputed.copy()


def run_session(
    ds: Dataset,
    st: SessionState,
    oracle: OracleConfig,
    tax: Taxonomy | None = None,
    model: EmbeddingModel | None = None,
) -> SessionState:
    """Drive a session against the simulated oracle until budget exhaustion."""
    while st.rounds_answered < st.budget:
        proposal = propose_query(st, ds, tax=tax, model=model)
        values = simulated_oracle_answer(ds, oracle, st.novel_id, proposal.group_id)
        st = submit_answer(st, ds, proposal.group_id, values)
    return st


# ---------------------------------------------------------------------------
# Transcripts


def transcript_dict(st: SessionState) -> dict:
    """JSON-ready transcript: identity, ordered answers, final descriptor."""
    return {
        "format_version": TRANSCRIPT_VERSION,
        "novel_id": st.novel_id,
        "similar_id": st.similar_id,
        "strategy": str(st.strategy),
        "budget": st.budget,
        "answers": [
            {"round": e.round, "group_id": e.group_id, "values": list(e.values)}
            for e in st.log
        ],
        "descriptor": [float(v) for v in st.imputed],
        "exemplar": None if st.exemplar is None else [float(v) for v in st.exemplar],
    }


def save_transcript(st: SessionState, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(transcript_dict(st), f, indent=2)
        f.write("\n")


def load_transcript(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format_version") != TRANSCRIPT_VERSION:
        raise ValueError(f"unsupported transcript version: {doc.get('format_version')!r}")
    return doc


def replay_transcript(ds: Dataset, doc: dict, require_known_novel: bool = False) -> SessionState:
    """Rebuild the session state by replaying a transcript's answers."""
    st = start_session(
        ds,
        doc["novel_id"],
        doc["similar_id"],
        parse_strategy(doc["strategy"]),
        doc["budget"],
        exemplar=None if doc.get("exemplar") is None else np.asarray(doc["exemplar"]),
        require_known_novel=require_known_novel,
    )
    for ans in sorted(doc["answers"], key=lambda a: a["round"]):
        st = submit_answer(st, ds, ans["group_id"], np.asarray(ans["values"], dtype=float))
    return st
