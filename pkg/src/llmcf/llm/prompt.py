"""Prompt templates, exemplar construction and prompt rendering.

Templates use ``$name`` placeholders (``string.Template``), which leaves the
braces of embedded JSON alone. Every template must contain all of
``REQUIRED_PLACEHOLDERS``; ``$dataset`` is optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from string import Template
from typing import Sequence

import numpy as np

from .. import errors
from ..baselines import _unlike_order, context_for, nice_cf
from ..schema import CONTINUOUS, Bounds, Dataset, FeatureSchema, Instance

REQUIRED_PLACEHOLDERS = ("features", "prediction", "desired", "target", "immutables",
                         "exemplars", "output_format")

# mock transports locate the factual through this line
INSTANCE_MARKER = "Input instance (JSON):"


def default_template() -> str:
    return resources.files("llmcf").joinpath("data/prompt_template.txt").read_text()


def template_placeholders(template: str) -> set[str]:
    names = set()
    for m in Template.pattern.finditer(template):
        name = m.group("named") or m.group("braced")
        if name:
            names.add(name)
    return names


@dataclass(frozen=True)
class PromptSpec:
    template: str = field(default_factory=default_template)
    shots: int = 3
    # hand-authored (factual, counterfactual) demonstrations; None = build per instance
    exemplars: tuple[tuple[Instance, Instance], ...] | None = None
    immutables: tuple[str, ...] | None = None
    output_format: str = ""
    dataset: str = ""

    def __post_init__(self):
        if self.shots < 0:
            raise errors.DataError("shots must be >= 0")
        if self.exemplars is not None and len(self.exemplars) != self.shots:
            raise errors.DataError(
                f"shots={self.shots} but {len(self.exemplars)} exemplars were given")
        missing = [p for p in REQUIRED_PLACEHOLDERS if p not in template_placeholders(self.template)]
        if missing:
            raise errors.PlaceholderMissing(f"template lacks placeholders: {missing}")

    def immutable_names(self, schema: FeatureSchema) -> tuple[str, ...]:
        names = schema.immutable_names if self.immutables is None else tuple(self.immutables)
        unknown = [n for n in names if n not in schema.names]
        if unknown:
            raise errors.DataError(f"immutable features not in schema: {unknown}")
        return names


def instance_json(x: Instance, schema: FeatureSchema) -> str:
    return json.dumps(schema.as_mapping(x))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return f"{v:g}"


def feature_block(x: Instance, schema: FeatureSchema, bounds: Bounds | None = None,
                  immutables: Sequence[str] = ()) -> str:
    lines = [f"{INSTANCE_MARKER} {instance_json(x, schema)}", "", "Features:"]
    for spec, v in zip(schema.predictors, x):
        if spec.kind == CONTINUOUS:
            desc = "continuous"
            if bounds is not None and spec.name in bounds.continuous:
                lo, hi = bounds.continuous[spec.name]
                desc += f", range {_fmt(lo)} to {_fmt(hi)}"
        else:
            desc = "categorical, one of " + ", ".join(spec.categories)
        if spec.name in immutables:
            desc += ", immutable"
        lines.append(f"- {spec.name} = {_fmt(v)} ({desc})")
    return "\n".join(lines)


def exemplar_block(exemplars: Sequence[tuple[Instance, Instance]], schema: FeatureSchema,
                   labels: Sequence[tuple[int, int]] | None = None) -> str:
    if not exemplars:
        return ""
    lines = ["", "Examples of valid counterfactuals:"]
    for i, (fx, cx) in enumerate(exemplars, 1):
        fl, cl = labels[i - 1] if labels else (None, None)
        ftag = f" (prediction {fl})" if fl is not None else ""
        ctag = f" (prediction {cl})" if cl is not None else ""
        lines.append(f"Example {i}:")
        lines.append(f"  Original{ftag}: {instance_json(fx, schema)}")
        lines.append(f"  Counterfactual{ctag}: {instance_json(cx, schema)}")
    return "\n".join(lines)


def output_instruction(schema: FeatureSchema) -> str:
    return ("Respond with a single JSON object and nothing else. It must contain every feature ("
            + ", ".join(schema.names)
            + ") with its counterfactual value: numbers for continuous features, strings for "
              "categorical features.")


def build_prompt(x: Instance, prediction: int, schema: FeatureSchema, prompt_spec: PromptSpec,
                 exemplars: Sequence[tuple[Instance, Instance]] | None = None,
                 bounds: Bounds | None = None,
                 exemplar_labels: Sequence[tuple[int, int]] | None = None) -> str:
    """Render the prompt for factual ``x`` currently predicted ``prediction``.

    ``exemplars`` overrides ``prompt_spec.exemplars``; only the first
    ``prompt_spec.shots`` are rendered.
    """
    if len(x) != schema.d:
        raise errors.ArityMismatch(f"instance has {len(x)} values, schema has {schema.d}")
    immutables = prompt_spec.immutable_names(schema)
    shots = prompt_spec.exemplars if exemplars is None else tuple(exemplars)
    shots = tuple(shots or ())[: prompt_spec.shots]
    desired = 1 - int(prediction)
    target_name = schema.target.name
    values = {
        "dataset": prompt_spec.dataset or schema.name or "clinical",
        "features": feature_block(x, schema, bounds, immutables),
        "prediction": f"{int(prediction)} ({target_name} = {schema.token_of(prediction)})",
        "desired": f"{desired} ({target_name} = {schema.token_of(desired)})",
        "target": f"flip the prediction from {int(prediction)} to {desired}",
        "immutables": ", ".join(immutables) if immutables else "(none)",
        "exemplars": exemplar_block(shots, schema, exemplar_labels),
        "output_format": prompt_spec.output_format or output_instruction(schema),
    }
    return Template(prompt_spec.template).safe_substitute(values)


def default_exemplars(x: Instance, label: int, model, train: Dataset, k: int,
                      bounds: Bounds | None = None):
    """k demonstrations drawn from training rows predicted as ``label``.

    Factuals are the training rows of that predicted class closest to x
    (x itself excluded). Each is paired with its nearest unlike neighbour
    with immutables reset to the factual's values; if that no longer flips,
    the greedy-copy counterfactual from the same neighbours is used. Rows
    for which neither flips are skipped. Returns (pairs, label pairs).
    """
    if k <= 0:
        return (), ()
    ctx = context_for(model, train, bounds)
    schema = train.schema
    same = np.flatnonzero(ctx.train_labels == label)
    if len(same) == 0:
        return (), ()
    d = ctx.distances_to_train(x)[same]
    order = same[np.lexsort((same, d))]
    pairs, labs = [], []
    immutable = schema.immutable_indices
    for i in order:
        row = train.rows[int(i)]
        if row == tuple(x):
            continue
        try:
            nun = train.rows[int(_unlike_order(row, label, ctx)[0])]
        except errors.NoOppositeClass:
            break
        cf = list(nun)
        for j in immutable:
            cf[j] = row[j]
        cf = tuple(cf)
        cl, _ = model.predict_many([cf])
        if cl[0] == label:
            try:
                cf = nice_cf(row, model, train, ctx.bounds).counterfactual
            except errors.CfRuntimeError:
                continue
        pairs.append((row, cf))
        labs.append((int(label), 1 - int(label)))
        if len(pairs) == k:
            break
    return tuple(pairs), tuple(labs)
