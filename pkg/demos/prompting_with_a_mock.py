"""
Prompting for counterfactuals, offline
======================================

The LLM pipeline is prompt -> transport -> parse -> verify. A mock transport
answers with the nearest unlike neighbour so the whole loop runs without a
network. Swap in HttpTransport, which reads its key from the environment, for a real model.
"""

from llmcf.cfmetrics import evaluate_batch, render_reports
from llmcf.datasets import load_heart
from llmcf.llm import GenConfig, MockTransport, PromptSpec, build_prompt, default_exemplars
from llmcf.llm import generate_llm_batch
from llmcf.models import predict, train
from llmcf.schema import feature_bounds, split

data, _ = load_heart()
train_set, _ = split(data, 0.2, seed=42)
bounds = feature_bounds(train_set)
model = train("rf", train_set, seed=42, bounds=bounds)

# what the model actually sees for one factual, with three worked examples
x = train_set.rows[3]
label, score = predict(model, x)
pairs, labels = default_exemplars(x, label, model, train_set, 3, bounds)
print(build_prompt(x, label, train_set.schema, PromptSpec(shots=3), pairs, bounds, labels))

mock = MockTransport(model, train_set, bounds, seed=7)
reports = []
for shots in (0, 3):
    batch = generate_llm_batch(train_set.rows[:100], model, mock, train_set.schema,
                               PromptSpec(shots=shots), GenConfig(seed=7), train_set, bounds)
    reports.append(evaluate_batch(batch, model, bounds=bounds))

# the mock ignores the examples, so zero- and few-shot agree; a real model will not
print(render_reports(reports))
