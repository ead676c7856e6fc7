"""
Counterfactual augmentation on an imbalanced training set
=========================================================

Shrink the training split to 150 rows at 4:1, turn majority-class rows into
minority-class counterfactuals, add them with the model's label and retrain.
The test split is never touched.
"""

import numpy as np

from llmcf.augment import run_experiment
from llmcf.datasets import load_heart
from llmcf.schema import split

data, _ = load_heart()


def four_to_one(seed, n=150):
    train_set, test_set = split(data, 0.2, seed)
    rng = np.random.default_rng(seed)
    y = np.asarray(train_set.labels)
    keep = np.concatenate([rng.choice(np.flatnonzero(y == 1), n * 4 // 5, replace=False),
                           rng.choice(np.flatnonzero(y == 0), n // 5, replace=False)])
    return train_set.subset(np.sort(keep)), test_set


gains = {"llm-few": [], "nice": [], "cfnow": []}
for seed in range(3):
    rep = run_experiment(data, ["rf"], list(gains) + ["none"], seed=seed,
                         split_data=four_to_one(seed), minority_only=True)
    base = rep.report("rf", "none").accuracy
    for method in gains:
        gains[method].append(rep.report("rf", method).accuracy - base)
    print(rep.to_markdown())

for method, g in gains.items():
    print(f"{method:>8}: mean accuracy change {np.mean(g):+.3f}")
