"""Export latent coordinates for external projection (t-SNE, UMAP, ...).

Writes one CSV row per held-out test image and per class descriptor, plus
per-round descriptor embeddings for two annotation transcripts so the
progression from similar-class start to full description can be plotted.
"""

import csv
from pathlib import Path

import numpy as np

from fieldguide import (
    ModelConfig,
    OracleConfig,
    Strategy,
    SynthConfig,
    generate_synthetic,
    normalize_attributes,
    run_session,
    start_session,
    train_embedding_model,
    transcript_dict,
)
from fieldguide.bench import export_latents

Path("out").mkdir(exist_ok=True)
ds = normalize_attributes(generate_synthetic(SynthConfig()))
model = train_embedding_model(ds, ModelConfig(seed=0))

y = sorted(ds.novel)[0]
transcripts = []
for strategy in (Strategy.sibling_variance(), Strategy.random(seed=0)):
    st = start_session(ds, y, ds.similar[y], strategy, budget=ds.schema.n_groups)
    st = run_session(ds, st, OracleConfig(), tax=ds.taxonomy, model=model)
    transcripts.append(transcript_dict(st))

descriptors = {c: ds.attributes_of(c) for c in sorted(ds.novel)}
n = export_latents(model, ds, descriptors, "out/demo_latents.csv", transcripts=transcripts)
print(f"wrote {n} rows to out/demo_latents.csv")

with open("out/demo_latents.csv") as f:
    tags = [row[0] for row in csv.reader(f)][1:]
print("row tags:", {t: tags.count(t) for t in sorted(set(tags), key=tags.index)})

# Distance of each per-round descriptor embedding to the full-annotation
# embedding: the informed strategy closes the gap in fewer rounds.
with open("out/demo_latents.csv") as f:
    rows = [r for r in csv.reader(f) if r[0].startswith("round_")]
target = model.encode_attributes(ds.attributes_of(y))
per_strategy = [rows[: ds.schema.n_groups + 1], rows[ds.schema.n_groups + 1 :]]
for label, seq in zip(("sibling_variance", "random"), per_strategy):
    dists = [np.linalg.norm(np.array([float(v) for v in r[2:]]) - target) for r in seq]
    shown = " ".join(f"{d:.2f}" for d in dists[:10])
    print(f"{label:17s} round distances: {shown} ...")
