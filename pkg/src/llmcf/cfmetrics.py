"""Counterfactual pairs/batches, quality metrics and batch reports.

Distance adds the L2 norm of min-max normalized continuous differences to an
unnormalized Hamming count over categorical features. A continuous feature
counts as changed when its normalized absolute difference exceeds
``EPSILON``; features whose reference range is a single point contribute
nothing to either quantity.

Batches serialize as JSON lines, one object per attempted factual::

    {"factual": {...}, "counterfactual": {...} | null,
     "factual_pred": {"label": 1, "score": 0.83}, "cf_pred": {...} | null,
     "method": "nice", "attempts": 1, "repaired": [], "error": null}

Lines with a null counterfactual are generation failures; they count toward
``failure_rate`` and never toward ``‖CF‖``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from . import errors
from .schema import CONTINUOUS, Bounds, FeatureSchema, Instance

EPSILON = 1e-6


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float

    def to_json(self) -> dict:
        return {"label": int(self.label), "score": float(self.score)}

    @classmethod
    def from_json(cls, obj) -> "Prediction":
        return cls(int(obj["label"]), float(obj["score"]))


@dataclass(frozen=True)
class CfPair:
    factual: Instance
    counterfactual: Instance
    factual_pred: Prediction
    cf_pred: Prediction
    method: str = ""
    attempts: int = 1
    # immutable features that were reverted to the factual value
    repaired: tuple[str, ...] = ()

    @property
    def is_valid(self) -> bool:
        return self.cf_pred.label != self.factual_pred.label


@dataclass(frozen=True)
class CfFailure:
    factual: Instance
    factual_pred: Prediction
    method: str = ""
    attempts: int = 0
    error: str = ""


Record = Union[CfPair, CfFailure]


@dataclass(frozen=True)
class CfBatch:
    """Generation outcomes in input order; pairs and failures are views."""

    schema: FeatureSchema
    records: tuple[Record, ...] = ()

    @classmethod
    def of(cls, schema, pairs: Iterable[CfPair] = (), failures: Iterable[CfFailure] = ()):
        return cls(schema, tuple(pairs) + tuple(failures))

    @property
    def pairs(self) -> tuple[CfPair, ...]:
        return tuple(r for r in self.records if isinstance(r, CfPair))

    @property
    def failures(self) -> tuple[CfFailure, ...]:
        return tuple(r for r in self.records if isinstance(r, CfFailure))

    @property
    def n_failures(self) -> int:
        return len(self.failures)

    def __len__(self) -> int:
        return len(self.pairs)

    def extend(self, other: "CfBatch") -> "CfBatch":
        return CfBatch(self.schema, self.records + other.records)


def _require_pairs(batch: CfBatch) -> tuple[CfPair, ...]:
    pairs = batch.pairs
    if not pairs:
        raise errors.EmptyBatch("batch contains no counterfactuals")
    return pairs


def _span(bounds: Bounds | None, name: str) -> float | None:
    if bounds is None:
        return None
    return bounds.span(name)


def distance(x: Instance, x_cf: Instance, schema: FeatureSchema, bounds: Bounds) -> float:
    preds = schema.predictors
    if len(x) != len(preds) or len(x_cf) != len(preds):
        raise errors.ArityMismatch("instances do not match the schema arity")
    sq = 0.0
    hamming = 0
    for spec, a, b in zip(preds, x, x_cf):
        if spec.kind == CONTINUOUS:
            span = bounds.span(spec.name)
            if span > 0:
                sq += ((a - b) / span) ** 2
        elif a != b:
            hamming += 1
    return math.sqrt(sq) + hamming


def changed_features(x: Instance, x_cf: Instance, schema: FeatureSchema,
                     bounds: Bounds | None = None, epsilon: float = EPSILON) -> list[str]:
    """Names of features that differ; without bounds, continuous diffs are raw."""
    out = []
    for spec, a, b in zip(schema.predictors, x, x_cf):
        if spec.kind == CONTINUOUS:
            span = _span(bounds, spec.name)
            if span is None:
                diff = abs(a - b)
            elif span > 0:
                diff = abs(a - b) / span
            else:
                diff = 0.0
            if diff > epsilon:
                out.append(spec.name)
        elif a != b:
            out.append(spec.name)
    return out


def sparsity(batch: CfBatch, schema: FeatureSchema | None = None, epsilon: float = EPSILON,
             bounds: Bounds | None = None) -> float:
    """Mean number of changed features per produced counterfactual."""
    pairs = _require_pairs(batch)
    schema = schema or batch.schema
    total = sum(len(changed_features(p.factual, p.counterfactual, schema, bounds, epsilon))
                for p in pairs)
    return total / len(pairs)


def validity(batch: CfBatch) -> float:
    pairs = _require_pairs(batch)
    return sum(p.is_valid for p in pairs) / len(pairs)


def plausibility(batch: CfBatch, bounds: Bounds, schema: FeatureSchema | None = None) -> float:
    pairs = _require_pairs(batch)
    schema = schema or batch.schema
    return sum(bounds.contains(p.counterfactual, schema) for p in pairs) / len(pairs)


def mean_distance(batch: CfBatch, bounds: Bounds, schema: FeatureSchema | None = None) -> float:
    pairs = _require_pairs(batch)
    schema = schema or batch.schema
    return sum(distance(p.factual, p.counterfactual, schema, bounds) for p in pairs) / len(pairs)


def diversity_profile(batch: CfBatch, schema: FeatureSchema | None = None,
                      bounds: Bounds | None = None) -> dict[str, float]:
    """Spread of counterfactual values per mutable feature.

    Continuous: population std of the min-max normalized value. Categorical:
    one minus the frequency of the most common token.
    """
    pairs = _require_pairs(batch)
    schema = schema or batch.schema
    out = {}
    for j, spec in enumerate(schema.predictors):
        if not spec.mutable:
            continue
        col = [p.counterfactual[j] for p in pairs]
        if spec.kind == CONTINUOUS:
            vals = np.asarray(col, dtype=float)
            span = _span(bounds, spec.name)
            if span is not None:
                if span <= 0:
                    out[spec.name] = 0.0
                    continue
                vals = (vals - bounds.continuous[spec.name][0]) / span
            out[spec.name] = float(vals.std())
        else:
            counts = {}
            for v in col:
                counts[v] = counts.get(v, 0) + 1
            out[spec.name] = 1.0 - max(counts.values()) / len(col)
    return out


@dataclass(frozen=True)
class CfReport:
    validity: float
    mean_distance: float
    mean_sparsity: float
    plausibility: float
    diversity: dict = field(default_factory=dict)
    failure_rate: float = 0.0
    n_pairs: int = 0
    n_failures: int = 0
    method: str = ""

    CSV_FIELDS = ("method", "n_pairs", "n_failures", "validity", "distance", "sparsity",
                  "plausibility_pct", "failure_rate")

    def csv_row(self) -> dict:
        return {
            "method": self.method,
            "n_pairs": self.n_pairs,
            "n_failures": self.n_failures,
            "validity": round(self.validity, 6),
            "distance": round(self.mean_distance, 6),
            "sparsity": round(self.mean_sparsity, 6),
            "plausibility_pct": round(100.0 * self.plausibility, 4),
            "failure_rate": round(self.failure_rate, 6),
        }

    def to_json(self) -> dict:
        return {
            "method": self.method, "n_pairs": self.n_pairs, "n_failures": self.n_failures,
            "validity": self.validity, "mean_distance": self.mean_distance,
            "mean_sparsity": self.mean_sparsity, "plausibility": self.plausibility,
            "failure_rate": self.failure_rate, "diversity": dict(self.diversity),
        }

    @classmethod
    def from_json(cls, obj) -> "CfReport":
        return cls(obj["validity"], obj["mean_distance"], obj["mean_sparsity"],
                   obj["plausibility"], dict(obj.get("diversity", {})),
                   obj.get("failure_rate", 0.0), obj.get("n_pairs", 0),
                   obj.get("n_failures", 0), obj.get("method", ""))


def evaluate_batch(batch: CfBatch, model=None, schema: FeatureSchema | None = None,
                   bounds: Bounds | None = None, epsilon: float = EPSILON,
                   method: str | None = None) -> CfReport:
    """Score a batch; with ``model`` given, stored predictions are re-checked."""
    pairs = _require_pairs(batch)
    schema = schema or batch.schema
    if bounds is None:
        raise errors.DataError("evaluate_batch needs reference bounds")
    immutable = schema.immutable_indices
    for i, p in enumerate(pairs):
        for j in immutable:
            if p.factual[j] != p.counterfactual[j]:
                raise errors.ImmutableViolation(
                    f"pair {i}: immutable feature {schema.predictors[j].name!r} changed")
    if model is not None:
        rows = [p.factual for p in pairs] + [p.counterfactual for p in pairs]
        labels, scores = model.predict_many(rows)
        stored = [p.factual_pred for p in pairs] + [p.cf_pred for p in pairs]
        for k, (lab, sc, pred) in enumerate(zip(labels, scores, stored)):
            if int(lab) != pred.label or abs(float(sc) - pred.score) > 1e-9:
                which = "factual" if k < len(pairs) else "counterfactual"
                raise errors.PredictionMismatch(
                    f"pair {k % len(pairs)}: stored {which} prediction {pred} "
                    f"!= model ({int(lab)}, {float(sc):.6g})")
    n_fail = batch.n_failures
    methods = sorted({p.method for p in pairs})
    return CfReport(
        validity=validity(batch),
        mean_distance=mean_distance(batch, bounds, schema),
        mean_sparsity=sparsity(batch, schema, epsilon, bounds),
        plausibility=plausibility(batch, bounds, schema),
        diversity=diversity_profile(batch, schema, bounds),
        failure_rate=n_fail / (n_fail + len(pairs)),
        n_pairs=len(pairs),
        n_failures=n_fail,
        method=method if method is not None else "+".join(methods),
    )


def reports_to_csv(reports: Sequence[CfReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CfReport.CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def diversity_to_csv(reports: Sequence[CfReport]) -> str:
    """Long-format feature diversity table (method, feature, diversity)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "feature", "diversity"])
    for r in reports:
        for name, v in r.diversity.items():
            writer.writerow([r.method, name, round(v, 6)])
    return buf.getvalue()


def render_reports(reports: Sequence[CfReport]) -> str:
    """Markdown table: validity, distance, sparsity, plausibility (%)."""
    lines = [
        "| Method | validity | distance | sparsity | plausibility (%) | failure rate |",
        "|---|---|---|---|---|---|",
    ]
    for r in reports:
        lines.append(
            f"| {r.method} | {r.validity:.2f} | {r.mean_distance:.2f} | {r.mean_sparsity:.2f} "
            f"| {100 * r.plausibility:.1f} | {r.failure_rate:.2f} |")
    if reports and any(r.diversity for r in reports):
        lines.append("")
        lines.append("Diversity profile (per mutable feature; continuous: std of normalized "
                     "value, categorical: 1 - top-token frequency):")
        lines.append("")
        names = sorted({n for r in reports for n in r.diversity})
        lines.append("| Method | " + " | ".join(names) + " |")
        lines.append("|---|" + "---|" * len(names))
        for r in reports:
            cells = " | ".join(f"{r.diversity.get(n, float('nan')):.3f}" for n in names)
            lines.append(f"| {r.method} | {cells} |")
    return "\n".join(lines) + "\n"


# JSON lines

def record_to_json(record: Record, schema: FeatureSchema) -> dict:
    if isinstance(record, CfPair):
        return {
            "factual": schema.as_mapping(record.factual),
            "counterfactual": schema.as_mapping(record.counterfactual),
            "factual_pred": record.factual_pred.to_json(),
            "cf_pred": record.cf_pred.to_json(),
            "method": record.method,
            "attempts": int(record.attempts),
            "repaired": list(record.repaired),
            "error": None,
        }
    return {
        "factual": schema.as_mapping(record.factual),
        "counterfactual": None,
        "factual_pred": record.factual_pred.to_json(),
        "cf_pred": None,
        "method": record.method,
        "attempts": int(record.attempts),
        "repaired": [],
        "error": record.error,
    }


def dumps_jsonl(batch: CfBatch) -> str:
    return "".join(json.dumps(record_to_json(r, batch.schema)) + "\n" for r in batch.records)


def loads_jsonl(text: str, schema: FeatureSchema) -> CfBatch:
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            factual = schema.instance_from_mapping(obj["factual"], row=lineno)
            fpred = Prediction.from_json(obj["factual_pred"])
            if obj.get("counterfactual") is None:
                records.append(CfFailure(factual, fpred, obj.get("method", ""),
                                         int(obj.get("attempts", 0)), obj.get("error") or ""))
            else:
                records.append(CfPair(
                    factual, schema.instance_from_mapping(obj["counterfactual"], row=lineno),
                    fpred, Prediction.from_json(obj["cf_pred"]), obj.get("method", ""),
                    int(obj.get("attempts", 1)), tuple(obj.get("repaired", ()))))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise errors.DataError(f"line {lineno}: malformed counterfactual record ({exc})") from None
    return CfBatch(schema, tuple(records))


def write_jsonl(batch: CfBatch, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_jsonl(batch))


def read_jsonl(path, schema: FeatureSchema) -> CfBatch:
    with open(path) as fh:
        return loads_jsonl(fh.read(), schema)
