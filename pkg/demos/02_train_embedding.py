"""Train the cross-modal embedding and check what the latent space learned.

Four small tanh networks share one latent space: attribute encoder/decoder
and image-feature encoder/decoder, trained with reconstruction,
cross-reconstruction, and latent-alignment losses by full-batch gradient
descent. Training is deterministic in the config seed.
"""

from pathlib import Path

import numpy as np

from fieldguide import (
    ModelConfig,
    SynthConfig,
    generate_synthetic,
    image_split,
    load_model,
    normalize_attributes,
    save_model,
    train_embedding_model,
)

Path("out").mkdir(exist_ok=True)
ds = normalize_attributes(generate_synthetic(SynthConfig()))
cfg = ModelConfig(seed=0)
model = train_embedding_model(ds, cfg)

h = model.loss_history
print(f"training loss: {h[0]:.4f} -> {h[-1]:.5f} over {len(h) - 1} epochs")

# How tightly do attribute embeddings sit on their class's image cluster?
split = image_split(ds)
base = sorted(ds.base)
gaps = []
for cid in base:
    z_imgs = model.encode_image(ds.features[split.train_rows[cid]])
    z_attr = model.encode_attributes(ds.attributes_of(cid))
    gaps.append(np.linalg.norm(z_attr - z_imgs.mean(axis=0)))
print(f"attribute-to-image-cluster gap: mean {np.mean(gaps):.3f}")

inter = [
    np.linalg.norm(
        model.encode_attributes(ds.attributes_of(base[0]))
        - model.encode_attributes(ds.attributes_of(c))
    )
    for c in base[1:]
]
print(f"typical inter-class latent distance: {np.mean(inter):.3f}")

# The analytic Jacobian of the attribute encoder drives one of the query
# strategies; eyeball it against finite differences here.
a = ds.attributes_of(sorted(ds.novel)[0])
jac = model.attribute_jacobian(a)
i = int(np.argmax(np.linalg.norm(jac, axis=0)))
e = np.zeros(ds.schema.d)
e[i] = 1e-5
fd_col = (model.encode_attributes(a + e) - model.encode_attributes(a - e)) / 2e-5
print(f"jacobian col {i}: analytic vs finite-diff max diff {np.abs(jac[:, i] - fd_col).max():.2e}")

save_model(model, "out/demo_model.json")
reloaded = load_model("out/demo_model.json")
assert np.array_equal(reloaded.attr_encoder.weights[0], model.attr_encoder.weights[0])
print("checkpoint round-trips bit-exactly -> out/demo_model.json")
