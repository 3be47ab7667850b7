import numpy as np
import pytest

from fieldguide import (
    AttributeSchema,
    ClassRecord,
    Dataset,
    ModelConfig,
    SynthConfig,
    Taxonomy,
    generate_synthetic,
    normalize_attributes,
    train_embedding_model,
)

# Small enough to train in a couple of seconds; used everywhere a real
# model is needed but accuracy is not under test.
TINY_SYNTH = SynthConfig(
    n_super=3,
    per_super=4,
    n_novel=4,
    d=12,
    G=6,
    m=16,
    local_groups_per_super=2,
    images_per_class=9,
    feature_noise=0.05,
    seed=7,
)

TINY_MODEL = ModelConfig(latent_dim=6, hidden_dims=(16,), epochs=400, seed=0)


@pytest.fixture(scope="session")
def tiny_dataset() -> Dataset:
    return normalize_attributes(generate_synthetic(TINY_SYNTH))


@pytest.fixture(scope="session")
def tiny_model(tiny_dataset):
    return train_embedding_model(tiny_dataset, TINY_MODEL)


def micro_dataset() -> Dataset:
    """Hand-built four-class dataset with exactly known values."""
    schema = AttributeSchema(d=4, groups=((0, 1), (2,), (3,)))
    classes = (
        ClassRecord("a", "class a", np.array([0.0, 1.0, 0.0, 2.0]), "P"),
        ClassRecord("b", "class b", np.array([1.0, 0.0, 0.0, 4.0]), "P"),
        ClassRecord("c", "class c", np.array([0.5, 0.5, 0.0, 3.0]), "Q"),
        ClassRecord("n", "novel n", np.array([0.25, 0.75, 0.0, 2.5]), "P"),
    )
    image_ids, image_classes, rows = [], [], []
    rng = np.random.default_rng(5)
    for c in classes:
        for j in range(3):
            image_ids.append(f"{c.id}_img{j}")
            image_classes.append(c.id)
            rows.append(np.concatenate([c.attributes, rng.normal(0, 0.01, 1)]))
    return Dataset(
        schema=schema,
        classes=classes,
        base=frozenset({"a", "b", "c"}),
        novel=frozenset({"n"}),
        image_ids=tuple(image_ids),
        image_classes=tuple(image_classes),
        features=np.stack(rows),
        similar={"n": "a"},
        taxonomy=Taxonomy({"a": "P", "b": "P", "c": "Q", "n": "P"}),
    )


@pytest.fixture
def micro() -> Dataset:
    return micro_dataset()
