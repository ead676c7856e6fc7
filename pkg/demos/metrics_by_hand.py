"""
Counterfactual metrics on a hand-made batch
===========================================

Two patients, two proposed edits, and what each quality number means.
"""

from llmcf.cfmetrics import CfBatch, CfPair, Prediction, evaluate_batch
from llmcf.cfmetrics import distance, render_reports
from llmcf.datasets import heart_schema
from llmcf.schema import Bounds

schema = heart_schema()
print(schema.names)

# reference ranges normally come from feature_bounds(train); typed in here
bounds = Bounds(
    {"Age": (28.0, 77.0), "RestingBP": (0.0, 200.0), "Cholesterol": (0.0, 603.0),
     "MaxHR": (60.0, 202.0), "Oldpeak": (-2.6, 6.2)},
    {"Sex": frozenset("FM"), "ChestPainType": frozenset(["ASY", "ATA", "NAP", "TA"]),
     "FastingBS": frozenset("01"), "RestingECG": frozenset(["LVH", "Normal", "ST"])},
)

x1 = (54.0, "M", "ASY", 140.0, 239.0, "0", "Normal", 118.0, 1.4)
cf1 = (54.0, "M", "ASY", 120.0, 239.0, "0", "Normal", 160.0, 1.4)   # two edits
x2 = (61.0, "F", "NAP", 150.0, 310.0, "1", "ST", 130.0, 2.0)
cf2 = (61.0, "F", "NAP", 130.0, 220.0, "0", "ST", 150.0, 0.5)       # five edits

# distance: normalized L2 over continuous features plus a count of changed categories
print("distance of first edit:", round(distance(x1, cf1, schema, bounds), 4))

sick, healthy = Prediction(1, 0.81), Prediction(0, 0.32)
batch = CfBatch.of(schema, [
    CfPair(x1, cf1, sick, healthy, "by-hand"),
    CfPair(x2, cf2, sick, healthy, "by-hand"),
])

# sparsity is (2 + 5) / 2 = 3.5; both flips reach the other class so validity is 1
report = evaluate_batch(batch, bounds=bounds)
print(render_reports([report]))
