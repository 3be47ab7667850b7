"""Walk one novel class through the interactive annotation loop.

The session starts from the expert-named similar base class, asks the
annotator (here: a simulated oracle with ground truth) for one attribute
group per round, and imputes everything unasked from the similar class.
Different query strategies ask in different orders; informed ones go for
the groups that actually distinguish the class.
"""

import numpy as np

from fieldguide import (
    ModelConfig,
    OracleConfig,
    Strategy,
    SynthConfig,
    finalize,
    generate_synthetic,
    image_split,
    normalize_attributes,
    propose_query,
    simulated_oracle_answer,
    start_session,
    submit_answer,
    train_embedding_model,
)

ds = normalize_attributes(generate_synthetic(SynthConfig()))
model = train_embedding_model(ds, ModelConfig(seed=0))
split = image_split(ds)

y = sorted(ds.novel)[0]
s = ds.similar[y]
truth = ds.attributes_of(y)
print(f"novel class {y}, similar base class {s}")
print(f"initial descriptor error: {np.linalg.norm(ds.attributes_of(s) - truth):.3f}\n")

strategies = [
    Strategy.sibling_variance(),
    Strategy.representation_change(),
    Strategy.image_based(),
    Strategy.random(seed=0),
]

budget = 8
for strategy in strategies:
    exemplar = ds.features[split.exemplar_rows[y]] if strategy.kind == "image_based" else None
    st = start_session(ds, y, s, strategy, budget, exemplar=exemplar)
    oracle = OracleConfig()
    asked = []
    errors = [np.linalg.norm(st.imputed - truth)]
    while st.rounds_answered < st.budget:
        proposal = propose_query(st, ds, tax=ds.taxonomy, model=model)
        values = simulated_oracle_answer(ds, oracle, y, proposal.group_id)
        st = submit_answer(st, ds, proposal.group_id, values)
        asked.append(proposal.group_id)
        errors.append(np.linalg.norm(st.imputed - truth))
    _, descriptor = finalize(st)
    err_path = " -> ".join(f"{e:.2f}" for e in errors)
    print(f"{strategy.label:22s} asked groups {asked}")
    print(f"{'':22s} descriptor error {err_path}\n")
