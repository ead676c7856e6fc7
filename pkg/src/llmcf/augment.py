"""Counterfactual data augmentation and the model x method experiment grid."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from . import errors
from .baselines import SearchBudget, generate_baseline_batch
from .cfmetrics import CfBatch, CfPair
from .llm import GenConfig, MockTransport, PromptSpec, generate_llm_batch
from .models import REPORT_FIELDS, SHORT_NAMES, ClassReport, canonical_kind, classification_report, train
from .schema import Dataset, feature_bounds, split

log = logging.getLogger(__name__)

NONE = "none"
BOTH = "both"
LLM_ZERO = "llm-zero"
LLM_FEW = "llm-few"
SOURCES = (LLM_ZERO, LLM_FEW, BOTH, "nice", "cfnow", "dice", NONE)

# row labels used in rendered tables
METHOD_LABELS = {LLM_ZERO: "Zero", LLM_FEW: "Few", BOTH: "Both", "dice": "DICE",
                 "nice": "NICE", "cfnow": "CFNOW", NONE: "×"}


@dataclass(frozen=True)
class AugPolicy:
    sources: tuple[str, ...] = (LLM_FEW,)
    label_rule: str = "model-prediction"
    cap: int | None = None

    def __post_init__(self):
        bad = [s for s in self.sources if s not in SOURCES]
        if bad:
            raise errors.DataError(f"unknown augmentation sources {bad}; choose from {SOURCES}")
        if self.label_rule != "model-prediction":
            raise errors.DataError("only the model-prediction label rule is supported")

    def methods(self) -> set[str]:
        out = set()
        for s in self.sources:
            if s == BOTH:
                out |= {LLM_ZERO, LLM_FEW}
            elif s != NONE:
                out.add(s)
        return out


def label_cf(pair: CfPair) -> int:
    """Label for a synthetic row: the model's prediction on the counterfactual."""
    if pair.cf_pred.label == pair.factual_pred.label:
        raise errors.NotValidCf("counterfactual does not flip the prediction")
    return int(pair.cf_pred.label)


def build_augmented(train_set: Dataset, batches: Iterable[CfBatch] | Mapping[str, CfBatch],
                    policy: AugPolicy | None = None) -> Dataset:
    """train ∪ labeled valid counterfactuals from the policy's sources.

    Counterfactuals whose feature values exactly match a row already present
    (original or previously added) are dropped. Provenance is "train" for
    original rows and the generating method for added ones.
    """
    policy = policy or AugPolicy()
    if isinstance(batches, Mapping):
        batches = list(batches.values())
    schema = train_set.schema
    wanted = policy.methods()
    rows = list(train_set.rows)
    labels = list(train_set.labels)
    prov = list(train_set.provenance or ("train",) * len(train_set))
    seen = set(rows)
    added = 0
    for batch in batches:
        if batch.schema != schema:
            raise errors.SchemaMismatch("counterfactual batch schema differs from training data")
        for pair in batch.pairs:
            if pair.method not in wanted or not pair.is_valid:
                continue
            if policy.cap is not None and added >= policy.cap:
                break
            if pair.counterfactual in seen:
                continue
            seen.add(pair.counterfactual)
            rows.append(pair.counterfactual)
            labels.append(label_cf(pair))
            prov.append(pair.method)
            added += 1
    return Dataset(schema, tuple(rows), tuple(labels), tuple(prov))


@dataclass
class ExperimentReport:
    # (model kind, method) -> ClassReport, or an error string for failed cells
    cells: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    n_added: dict = field(default_factory=dict)

    def report(self, kind: str, method: str):
        return self.cells[(canonical_kind(kind), method)]

    def rows(self):
        for (kind, method), rep in self.cells.items():
            yield kind, method, rep

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "method", "n_added", *[f.upper()[:3] if f != "f1" else "F1"
                                                       for f in REPORT_FIELDS], "error"])
        for kind, method, rep in self.rows():
            n = self.n_added.get((kind, method), 0)
            if isinstance(rep, ClassReport):
                vals = [f"{getattr(rep, f):.4f}" for f in REPORT_FIELDS]
                writer.writerow([SHORT_NAMES.get(kind, kind), method, n, *vals, ""])
            else:
                writer.writerow([SHORT_NAMES.get(kind, kind), method, n, *[""] * 5, rep])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = ["| Model | Method | ACC | PRE | REC | F1 | AUC |", "|---|---|---|---|---|---|---|"]
        last = None
        for kind, method, rep in self.rows():
            name = SHORT_NAMES.get(kind, kind) if kind != last else ""
            last = kind
            label = METHOD_LABELS.get(method, method)
            if isinstance(rep, ClassReport):
                vals = " | ".join(f"{getattr(rep, f):.3f}" for f in REPORT_FIELDS)
            else:
                vals = " | ".join(["error"] + [""] * 4)
            lines.append(f"| {name} | {label} | {vals} |")
        meta = ", ".join(f"{k}={v}" for k, v in self.metadata.items())
        if meta:
            lines += ["", meta]
        return "\n".join(lines) + "\n"


def _order_methods(methods: Sequence[str]) -> list[str]:
    # baseline row last, matching the usual table layout
    ms = [m for m in methods if m != NONE]
    return ms + [NONE]


def generate_for_method(method: str, factuals, model, train_set: Dataset, bounds, *, seed: int,
                        transport_factory: Callable | None = None,
                        budget: SearchBudget | None = None, gen_config: GenConfig | None = None,
                        shots: int = 3) -> list[CfBatch]:
    """Counterfactual batches for one augmentation source ("both" yields two)."""
    if method == NONE:
        return []
    if method == BOTH:
        return (generate_for_method(LLM_ZERO, factuals, model, train_set, bounds, seed=seed,
                                    transport_factory=transport_factory, gen_config=gen_config)
                + generate_for_method(LLM_FEW, factuals, model, train_set, bounds, seed=seed,
                                      transport_factory=transport_factory, gen_config=gen_config,
                                      shots=shots))
    if method in (LLM_ZERO, LLM_FEW):
        factory = transport_factory or (lambda m, tr, b: MockTransport(m, tr, b, seed=seed))
        transport = factory(model, train_set, bounds)
        spec = PromptSpec(shots=0 if method == LLM_ZERO else shots)
        cfg = gen_config or GenConfig(seed=seed)
        return [generate_llm_batch(factuals, model, transport, train_set.schema, spec, cfg,
                                   train_set, bounds)]
    budget = budget or SearchBudget(seed=seed)
    return [generate_baseline_batch(method, factuals, model, train_set, bounds, budget)]


def run_experiment(dataset: Dataset, model_kinds: Sequence[str], methods: Sequence[str],
                   seed: int = 42, split_fraction: float = 0.2, *, hyperparams: Mapping | None = None,
                   transport_factory: Callable | None = None, budget: SearchBudget | None = None,
                   gen_config: GenConfig | None = None, minority_only: bool = False,
                   max_factuals: int | None = None, shots: int = 3,
                   split_data: tuple[Dataset, Dataset] | None = None,
                   dataset_id: str = "") -> ExperimentReport:
    """Train, augment with counterfactuals from training factuals, retrain, test.

    For each model kind a base model is fitted on the training split; each
    method generates counterfactuals against that base model from training
    factuals only, and a fresh model of the same kind and seed is trained on
    the augmented set. Every model is scored on the untouched test split.
    ``minority_only`` restricts factuals to the majority class so that all
    counterfactuals land in the minority class.
    """
    if not model_kinds:
        raise errors.DataError("at least one model kind is required")
    for m in methods:
        if m not in SOURCES:
            raise errors.DataError(f"unknown method {m!r}; choose from {SOURCES}")
    kinds = [canonical_kind(k) for k in model_kinds]
    hyperparams = hyperparams or {}
    if split_data is None:
        train_set, test_set = split(dataset, split_fraction, seed, stratified=True)
    else:
        train_set, test_set = split_data
    bounds = feature_bounds(train_set)

    factual_idx = list(range(len(train_set)))
    if minority_only:
        counts = train_set.class_counts()
        majority = 0 if counts[0] >= counts[1] else 1
        factual_idx = [i for i in factual_idx if train_set.labels[i] == majority]
    if max_factuals is not None:
        factual_idx = factual_idx[:max_factuals]
    factuals = [train_set.rows[i] for i in factual_idx]

    report = ExperimentReport(metadata={
        "dataset": dataset_id or train_set.schema.name, "seed": seed,
        "split_fraction": split_fraction, "n_train": len(train_set), "n_test": len(test_set),
        "n_factuals": len(factuals), "minority_only": minority_only,
    })
    for kind in kinds:
        hp = hyperparams.get(kind)
        try:
            base = train(kind, train_set, hp, seed, bounds)
        except errors.LlmcfError as exc:
            for method in _order_methods(methods):
                report.cells[(kind, method)] = f"{type(exc).__name__}: {exc}"
            continue
        for method in _order_methods(methods):
            try:
                if method == NONE:
                    model, n_added = base, 0
                else:
                    batches = generate_for_method(
                        method, factuals, base, train_set, bounds, seed=seed,
                        transport_factory=transport_factory, budget=budget,
                        gen_config=gen_config, shots=shots)
                    aug = build_augmented(train_set, batches, AugPolicy((method,)))
                    n_added = len(aug) - len(train_set)
                    model = train(kind, aug, hp, seed, bounds)
                report.cells[(kind, method)] = classification_report(model, test_set)
                report.n_added[(kind, method)] = n_added
                log.info("%s / %s: +%d rows, acc %.4f", kind, method, n_added,
                         report.cells[(kind, method)].accuracy)
            except errors.LlmcfError as exc:
                log.warning("%s / %s failed: %s", kind, method, exc)
                report.cells[(kind, method)] = f"{type(exc).__name__}: {exc}"
    return report
