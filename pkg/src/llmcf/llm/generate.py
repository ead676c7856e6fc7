"""Batch counterfactual generation through an LLM transport."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .. import errors
from ..cfmetrics import CfBatch, CfFailure, CfPair, Prediction
from ..schema import Bounds, Dataset, FeatureSchema, Instance, feature_bounds
from .parse import POLICIES, REPAIR, parse_response
from .prompt import PromptSpec, build_prompt, default_exemplars
from .transport import RETRY_MARKER

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenConfig:
    verify_flip: bool = True
    max_retries: int = 3
    immutable_policy: str = REPAIR
    temperature: float = 0.0
    seed: int = 0
    workers: int = 4

    def __post_init__(self):
        if self.max_retries < 0:
            raise errors.DataError("max_retries must be >= 0")
        if self.immutable_policy not in POLICIES:
            raise errors.DataError(f"immutable_policy must be one of {POLICIES}")
        if self.workers < 1:
            raise errors.DataError("workers must be >= 1")


def method_tag(prompt_spec: PromptSpec) -> str:
    return "llm-zero" if prompt_spec.shots == 0 else "llm-few"


def _note_no_flip(label: int) -> str:
    return (f"\n\n{RETRY_MARKER} it did not flip the prediction (the model still predicts "
            f"{label}). Propose a different counterfactual that reaches the desired prediction "
            "while respecting all constraints.")


def _note_unusable(exc: Exception) -> str:
    return (f"\n\n{RETRY_MARKER} the response could not be used ({exc}). Answer with one JSON "
            "object containing every feature.")


def generate_one(x: Instance, model, transport, schema: FeatureSchema, prompt_spec: PromptSpec,
                 gen_config: GenConfig, train: Dataset | None = None,
                 bounds: Bounds | None = None, index: int = 0):
    """Prompt, parse and verify one factual; returns a CfPair or CfFailure."""
    method = method_tag(prompt_spec)
    labels, scores = model.predict_many([x])
    fpred = Prediction(int(labels[0]), float(scores[0]))
    exemplars, ex_labels = prompt_spec.exemplars, None
    if prompt_spec.shots > 0 and exemplars is None:
        if train is None:
            raise errors.DataError("few-shot prompting without exemplars needs training data")
        exemplars, ex_labels = default_exemplars(x, fpred.label, model, train,
                                                 prompt_spec.shots, bounds)
    base = build_prompt(x, fpred.label, schema, prompt_spec, exemplars, bounds, ex_labels)
    notes = ""
    last_error = "no attempt made"
    attempts = gen_config.max_retries + 1
    for attempt in range(1, attempts + 1):
        try:
            text = transport.send(base + notes)
        except Exception as exc:  # transports retry internally; give up on this instance
            log.warning("instance %d: transport failed: %s", index, exc)
            return CfFailure(tuple(x), fpred, method, attempt, f"{type(exc).__name__}: {exc}")
        try:
            parsed = parse_response(text, x, schema, gen_config.immutable_policy)
        except errors.DataError as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            log.info("instance %d attempt %d: unusable response: %s", index, attempt, exc)
            notes += _note_unusable(exc)
            continue
        cl, cs = model.predict_many([parsed.instance])
        cpred = Prediction(int(cl[0]), float(cs[0]))
        if gen_config.verify_flip and cpred.label == fpred.label:
            last_error = "prediction not flipped"
            log.info("instance %d attempt %d: no flip", index, attempt)
            notes += _note_no_flip(cpred.label)
            continue
        log.info("instance %d: counterfactual after %d attempt(s)%s", index, attempt,
                 f", repaired {list(parsed.repaired)}" if parsed.repaired else "")
        return CfPair(tuple(x), parsed.instance, fpred, cpred, method, attempt, parsed.repaired)
    log.warning("instance %d: no counterfactual after %d attempts (%s)", index, attempts, last_error)
    return CfFailure(tuple(x), fpred, method, attempts, last_error)


def generate_llm_batch(instances: Sequence[Instance], model, transport, schema: FeatureSchema,
                       prompt_spec: PromptSpec | None = None, gen_config: GenConfig | None = None,
                       train: Dataset | None = None, bounds: Bounds | None = None) -> CfBatch:
    """Generate one counterfactual per factual; output order follows input order."""
    prompt_spec = prompt_spec or PromptSpec()
    gen_config = gen_config or GenConfig()
    if model.schema != schema:
        raise errors.SchemaMismatch("model was trained on a different schema")
    if train is not None and train.schema != schema:
        raise errors.SchemaMismatch("training data uses a different schema")
    if bounds is None and train is not None and len(train):
        bounds = feature_bounds(train)

    def one(item):
        i, x = item
        return generate_one(x, model, transport, schema, prompt_spec, gen_config, train, bounds, i)

    items = list(enumerate(instances))
    if gen_config.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=gen_config.workers) as pool:
            records = list(pool.map(one, items))
    else:
        records = [one(it) for it in items]
    return CfBatch(schema, tuple(records))
