"""
Search-based counterfactuals on the heart table
===============================================

NICE copies features from the nearest unlike neighbour, CFNOW climbs a
quantile grid and then reverts what it can, DiCE-style search evolves a
small diverse set. All three only query the model.
"""

import time

from llmcf.baselines import SearchBudget, generate_baseline_batch, nice_cf
from llmcf.cfmetrics import evaluate_batch, render_reports
from llmcf.datasets import load_heart
from llmcf.models import train
from llmcf.schema import feature_bounds, split

data, source = load_heart()
print("data:", source, len(data), "rows")
train_set, test_set = split(data, 0.2, seed=42)
bounds = feature_bounds(train_set)
model = train("rf", train_set, seed=42, bounds=bounds)

# one instance, step by step
x = train_set.rows[0]
pair = nice_cf(x, model, train_set, bounds)
for name, a, b in zip(train_set.schema.names, pair.factual, pair.counterfactual):
    print(f"{name:>14} {a!s:>8} -> {b!s:<8}" + ("  *" if a != b else ""))
print("prediction", pair.factual_pred.label, "->", pair.cf_pred.label)

# now a batch per method; dice returns up to k per instance
instances = train_set.rows[:60]
reports = []
for method in ("nice", "cfnow", "dice"):
    t0 = time.perf_counter()
    batch = generate_baseline_batch(method, instances, model, train_set, bounds,
                                    SearchBudget(2000, seed=42))
    reports.append(evaluate_batch(batch, model, bounds=bounds, method=method))
    print(f"{method}: {len(batch)} pairs, {batch.n_failures} failures, "
          f"{time.perf_counter() - t0:.1f}s")

print(render_reports(reports))
