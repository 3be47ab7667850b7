"""Accuracy as a function of annotation budget, per query strategy.

One embedding model is trained per seed and shared across strategies and
budgets; each (strategy, budget, seed) cell runs an annotation session per
novel class, trains a latent classifier on the finalized descriptors, and
scores held-out images. Uses two seeds here to stay quick; the acceptance
suite runs the full six.
"""

from collections import defaultdict
from pathlib import Path

from fieldguide import OracleConfig, Strategy, SynthConfig
from fieldguide.bench import SweepConfig, mean_curve, run_budget_sweep, write_curves

cfg = SweepConfig(
    dataset=SynthConfig(),
    strategies=(
        Strategy.sibling_variance(),
        Strategy.representation_change(),
        Strategy.global_variance(),
        Strategy.random(),
    ),
    budgets=(0, 3, 6, 9, 12, 24),
    seeds=(0, 1),
    oracle=OracleConfig(),
)

Path("out").mkdir(exist_ok=True)
rows = run_budget_sweep(cfg)
write_curves(rows, "out/demo_curves.csv")
print("wrote out/demo_curves.csv\n")

means = mean_curve(rows)
by_strategy = defaultdict(dict)
for (strategy, budget), acc in means.items():
    by_strategy[strategy][budget] = acc

header = "budget:               " + "".join(f"{b:>7d}" for b in cfg.budgets)
print(header)
for strategy in sorted(by_strategy):
    cells = "".join(f"{by_strategy[strategy][b]:7.3f}" for b in cfg.budgets)
    print(f"{strategy:22s}{cells}")

print(
    "\nReading the table: informed strategies climb fastest; taxonomy-free "
    "global variance stays flat until the very end because the globally "
    "varying groups say nothing about which sibling you are looking at."
)
