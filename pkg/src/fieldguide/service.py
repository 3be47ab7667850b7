"""HTTP/JSON API for live annotation sessions.

Puts a human expert in the oracle seat: create a session for a (possibly
truly novel) class against a chosen similar base class, fetch the next
attribute-group query, post answers, and finalize to kick off asynchronous
classifier retraining. Sessions persist as transcript JSON files under a
data directory and are reloaded on startup, so a restart never loses an
annotation in progress.

All endpoints live under /api/v1 and return errors as {code, message}.
A static frontend bundle, when provided, is served at /.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .acquisition import KINDS, BudgetExhausted, parse_strategy
from .dataset import Dataset
from .learner import EmbeddingModel, evaluate, train_classifier
from .session import (
    SessionState,
    finalize,
    propose_query,
    replay_transcript,
    start_session,
    submit_answer,
    transcript_dict,
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


class CreateSessionBody(BaseModel):
    novel_name: str
    similar_class_id: str
    strategy: str = "sibling_variance"
    budget: int
    exemplar: list[float] | None = None


class AnswerBody(BaseModel):
    group_id: int
    values: list[float]


@dataclass
class SessionEntry:
    state: SessionState
    created: float
    updated: float
    finalized: bool = False
    job_id: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class JobRunner:
    """Bounded worker pool running classifier retraining jobs."""

    def __init__(self, workers: int = 1):
        self._queue: queue.Queue = queue.Queue()
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._threads = [
            threading.Thread(target=self._run, daemon=True) for _ in range(max(1, workers))
        ]
        for t in self._threads:
            t.start()

    def submit(self, fn) -> str:
        job_id = uuid.uuid4().hex
        with self._lock:
            self._jobs[job_id] = {"status": "queued"}
        self._queue.put((job_id, fn))
        return job_id

    def status(self, job_id: str) -> dict | None:
        with self._lock:
            doc = self._jobs.get(job_id)
            return None if doc is None else dict(doc)

    def _run(self):
        while True:
            job_id, fn = self._queue.get()
            with self._lock:
                self._jobs[job_id]["status"] = "running"
            try:
                result = fn()
                with self._lock:
                    self._jobs[job_id] = {"status": "done", **result}
            except Exception as e:  # surfaced through GET /jobs/{id}
                with self._lock:
                    self._jobs[job_id] = {"status": "failed", "error": str(e)}


def create_app(
    ds: Dataset,
    model: EmbeddingModel,
    sessions_dir: str | Path,
    static_dir: str | Path | None = None,
    workers: int = 1,
    clf_seed: int = 0,
) -> FastAPI:
    """Build the API around a normalized dataset and a trained model."""
    if ds.norm_stats is None:
        raise ValueError("service needs a normalized dataset")
    sessions_dir = Path(sessions_dir)
    sessions_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="fieldguide annotation service")
    sessions: dict[str, SessionEntry] = {}
    store_lock = threading.Lock()
    jobs = JobRunner(workers=workers)

    def persist(sid: str, entry: SessionEntry) -> None:
        doc = transcript_dict(entry.state)
        doc["session_id"] = sid
        doc["created"] = entry.created
        doc["updated"] = entry.updated
        doc["finalized"] = entry.finalized
        doc["job_id"] = entry.job_id
        path = sessions_dir / f"{sid}.json"
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2)
        tmp.replace(path)

    def restore() -> None:
        for path in sorted(sessions_dir.glob("*.json")):
            try:
                with open(path, encoding="utf-8") as f:
                    doc = json.load(f)
                state = replay_transcript(ds, doc, require_known_novel=False)
                sessions[doc["session_id"]] = SessionEntry(
                    state=state,
                    created=doc.get("created", path.stat().st_mtime),
                    updated=doc.get("updated", path.stat().st_mtime),
                    finalized=bool(doc.get("finalized", False)),
                    job_id=doc.get("job_id"),
                )
            except Exception:
                continue  # a corrupt transcript should not block startup

    restore()

    def get_entry(sid: str) -> SessionEntry:
        entry = sessions.get(sid)
        if entry is None:
            raise ApiError(404, "not_found", f"unknown session {sid!r}")
        return entry

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422, content={"code": "validation_error", "message": str(exc.errors())}
        )

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"code": "internal", "message": str(exc)}
        )

    api = "/api/v1"

    @app.get(api + "/meta")
    def meta() -> dict:
        return {
            "n_groups": ds.schema.n_groups,
            "d": ds.schema.d,
            "m": ds.m,
            "strategies": list(KINDS),
            "groups": [
                {"group_id": g, "name": ds.schema.group_name(g), "members": list(members)}
                for g, members in enumerate(ds.schema.groups)
            ],
        }

    @app.get(api + "/classes")
    def classes() -> list[dict]:
        return [
            {
                "id": c.id,
                "name": c.name,
                "supercategory": c.parent,
            }
            for c in sorted(ds.classes, key=lambda c: c.id)
            if c.id in ds.base
        ]

    @app.post(api + "/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict:
        try:
            strategy = parse_strategy(body.strategy)
        except (ValueError, KeyError) as e:
            raise ApiError(400, "invalid_strategy", str(e))
        if strategy.kind == "image_based" and body.exemplar is None:
            raise ApiError(422, "exemplar_required", "image_based needs an exemplar vector")
        try:
            state = start_session(
                ds,
                body.novel_name,
                body.similar_class_id,
                strategy,
                body.budget,
                exemplar=None if body.exemplar is None else np.asarray(body.exemplar),
                require_known_novel=False,
            )
        except ValueError as e:
            raise ApiError(400, "invalid_request", str(e))
        sid = uuid.uuid4().hex
        now = time.time()
        entry = SessionEntry(state=state, created=now, updated=now)
        with store_lock:
            sessions[sid] = entry
        persist(sid, entry)
        return {"session_id": sid}

    @app.get(api + "/sessions/{sid}/next-query")
    def next_query_endpoint(sid: str) -> dict:
        entry = get_entry(sid)
        if entry.finalized:
            raise ApiError(409, "finalized", "session already finalized")
        try:
            proposal = propose_query(entry.state, ds, tax=ds.taxonomy, model=model)
        except BudgetExhausted as e:
            raise ApiError(409, "budget_exhausted", str(e))
        st = entry.state
        return {
            "round": proposal.round,
            "group_id": proposal.group_id,
            "group_name": proposal.group_name,
            "attributes": [
                {
                    "index": j,
                    "name": name,
                    "current_value": float(st.imputed[j]),
                }
                for j, name in zip(proposal.members, proposal.member_names)
            ],
        }

    @app.post(api + "/sessions/{sid}/answers")
    def post_answer(sid: str, body: AnswerBody) -> dict:
        entry = get_entry(sid)
        with entry.lock:
            if entry.finalized:
                raise ApiError(409, "finalized", "session already finalized")
            if not all(0.0 <= v <= 1.0 for v in body.values):
                raise ApiError(400, "out_of_range", "values must lie in [0, 1]")
            if not (0 <= body.group_id < ds.schema.n_groups):
                raise ApiError(400, "invalid_group", f"unknown group id {body.group_id}")
            if body.group_id in entry.state.answered:
                raise ApiError(409, "already_answered", f"group {body.group_id} already answered")
            try:
                new_state = submit_answer(
                    entry.state, ds, body.group_id, np.asarray(body.values, dtype=float)
                )
            except BudgetExhausted as e:
                raise ApiError(409, "budget_exhausted", str(e))
            except (ValueError, IndexError) as e:
                raise ApiError(400, "invalid_answer", str(e))
            entry.state = new_state
            entry.updated = time.time()
            persist(sid, entry)
        members = ds.schema.groups[body.group_id]
        return {"imputed_changed_indices": list(members)}

    @app.post(api + "/sessions/{sid}/finalize")
    def finalize_session(sid: str) -> dict:
        entry = get_entry(sid)
        with entry.lock:
            if entry.finalized:
                raise ApiError(409, "already_finalized", "session already finalized")
            novel_id, descriptor = finalize(entry.state)

            def job():
                clf = train_classifier(model, ds, {novel_id: descriptor}, seed=clf_seed)
                metrics = evaluate(clf, model, ds, "generalized")
                return {
                    "metrics": {
                        "acc_unseen": metrics.acc_unseen,
                        "acc_seen": metrics.acc_seen,
                        "harmonic": metrics.harmonic,
                    }
                }

            job_id = jobs.submit(job)
            entry.finalized = True
            entry.job_id = job_id
            entry.updated = time.time()
            persist(sid, entry)
        return {
            "descriptor": [float(v) for v in descriptor],
            "training_job_id": job_id,
        }

    @app.get(api + "/sessions/{sid}")
    def get_session(sid: str) -> dict:
        entry = get_entry(sid)
        st = entry.state
        doc = transcript_dict(st)
        doc.update(
            {
                "session_id": sid,
                "rounds_answered": st.rounds_answered,
                "finalized": entry.finalized,
                "job_id": entry.job_id,
                "created": entry.created,
                "updated": entry.updated,
                "group_names": [ds.schema.group_name(g) for g in range(ds.schema.n_groups)],
                "answered_groups": sorted(st.answered),
            }
        )
        return doc

    @app.get(api + "/jobs/{job_id}")
    def job_status(job_id: str) -> dict:
        doc = jobs.status(job_id)
        if doc is None:
            raise ApiError(404, "not_found", f"unknown job {job_id!r}")
        return doc

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
