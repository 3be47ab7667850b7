"""Drive the HTTP annotation API end to end, playing the expert ourselves.

Starts the FastAPI app in-process (no network), creates a session for a
truly novel class name, answers three queries with slider-style values,
finalizes, and polls the retraining job for metrics. The same flow backs
the web console in frontend/.
"""

import time

from fastapi.testclient import TestClient

from fieldguide import (
    ModelConfig,
    SynthConfig,
    generate_synthetic,
    normalize_attributes,
    train_embedding_model,
)
from fieldguide.service import create_app

ds = normalize_attributes(generate_synthetic(SynthConfig()))
model = train_embedding_model(ds, ModelConfig(seed=0))
app = create_app(ds, model, sessions_dir="out/demo_sessions")

with TestClient(app) as http:
    classes = http.get("/api/v1/classes").json()
    print(f"GET /classes -> {len(classes)} base classes; first: {classes[0]}")

    body = {
        "novel_name": "hypothetical-warbler",
        "similar_class_id": classes[0]["id"],
        "strategy": "sibling_variance",
        "budget": 3,
    }
    sid = http.post("/api/v1/sessions", json=body).json()["session_id"]
    print(f"POST /sessions -> {sid}")

    for round_no in range(3):
        q = http.get(f"/api/v1/sessions/{sid}/next-query").json()
        names = [a["name"] for a in q["attributes"]]
        print(f"round {q['round']}: asked group {q['group_id']} ({q['group_name']}): {names}")
        # Pretend the expert nudges every slider a little off the prefill.
        values = [min(1.0, a["current_value"] * 0.8 + 0.1) for a in q["attributes"]]
        r = http.post(
            f"/api/v1/sessions/{sid}/answers",
            json={"group_id": q["group_id"], "values": values},
        )
        print(f"  answered -> changed indices {r.json()['imputed_changed_indices']}")

    final = http.post(f"/api/v1/sessions/{sid}/finalize").json()
    job_id = final["training_job_id"]
    print(f"finalized; descriptor length {len(final['descriptor'])}, job {job_id}")

    while True:
        job = http.get(f"/api/v1/jobs/{job_id}").json()
        if job["status"] in ("done", "failed"):
            break
        time.sleep(0.2)
    print(f"job {job['status']}: {job.get('metrics')}")
