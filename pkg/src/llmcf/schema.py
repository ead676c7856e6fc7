"""Feature schema, schema-bound datasets, CSV I/O, splitting and bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import yaml

from . import errors

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
PREDICTOR = "predictor"
TARGET = "target"

Value = Union[float, str]
Instance = tuple  # values aligned with FeatureSchema.predictors


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    mutable: bool = True
    role: str = PREDICTOR
    categories: tuple[str, ...] = ()

    @property
    def is_continuous(self) -> bool:
        return self.kind == CONTINUOUS


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature declarations with exactly one binary categorical target.

    The target's first category maps to label 0 and its second to label 1.
    """

    features: tuple[FeatureSpec, ...]
    name: str = ""

    def __post_init__(self):
        seen = set()
        for spec in self.features:
            if spec.name in seen:
                raise errors.DuplicateName(f"duplicate feature name {spec.name!r}")
            seen.add(spec.name)
            if spec.kind not in (CONTINUOUS, CATEGORICAL):
                raise errors.UnknownKind(f"feature {spec.name!r}: unknown kind {spec.kind!r}")
            if spec.role not in (PREDICTOR, TARGET):
                raise errors.InvalidSchema(f"feature {spec.name!r}: unknown role {spec.role!r}")
            if spec.kind == CATEGORICAL:
                if not spec.categories:
                    raise errors.InvalidSchema(f"categorical feature {spec.name!r} has no categories")
                if len(set(spec.categories)) != len(spec.categories):
                    raise errors.InvalidSchema(f"feature {spec.name!r} repeats a category")
            elif spec.categories:
                raise errors.InvalidSchema(f"continuous feature {spec.name!r} lists categories")
        targets = [s for s in self.features if s.role == TARGET]
        if not targets:
            raise errors.NoTarget("schema declares no target feature")
        if len(targets) > 1:
            raise errors.MultipleTargets(
                "schema declares multiple targets: " + ", ".join(s.name for s in targets))
        target = targets[0]
        if target.kind != CATEGORICAL or len(target.categories) != 2:
            raise errors.InvalidSchema(
                f"target {target.name!r} must be categorical with exactly 2 categories")
        if not any(s.role == PREDICTOR for s in self.features):
            raise errors.InvalidSchema("schema has no predictor features")

    # cached views are recomputed cheaply; schemas are small
    @property
    def predictors(self) -> tuple[FeatureSpec, ...]:
        return tuple(s for s in self.features if s.role == PREDICTOR)

    @property
    def target(self) -> FeatureSpec:
        return next(s for s in self.features if s.role == TARGET)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.predictors)

    @property
    def d(self) -> int:
        return len(self.predictors)

    @property
    def immutable_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.predictors if not s.mutable)

    @property
    def mutable_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.predictors) if s.mutable)

    @property
    def immutable_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.predictors) if not s.mutable)

    @property
    def continuous_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.predictors) if s.kind == CONTINUOUS)

    @property
    def categorical_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.predictors) if s.kind == CATEGORICAL)

    def index(self, name: str) -> int:
        for i, s in enumerate(self.predictors):
            if s.name == name:
                return i
        raise KeyError(name)

    def label_of(self, token: str) -> int:
        cats = self.target.categories
        if token not in cats:
            raise errors.UnknownCategory(
                f"target value {token!r} not in {list(cats)}", column=self.target.name)
        return cats.index(token)

    def token_of(self, label: int) -> str:
        return self.target.categories[int(label)]

    def coerce(self, spec: FeatureSpec, raw, row=None) -> Value:
        """Convert a raw cell (CSV text or JSON scalar) to a schema value."""
        where = f" (row {row})" if row is not None else ""
        if spec.kind == CONTINUOUS:
            if isinstance(raw, bool):
                raise errors.NonNumeric(
                    f"{spec.name}{where}: boolean is not numeric", row=row, column=spec.name)
            try:
                value = float(raw.strip() if isinstance(raw, str) else raw)
            except (TypeError, ValueError):
                raise errors.NonNumeric(
                    f"{spec.name}{where}: {raw!r} is not numeric", row=row, column=spec.name) from None
            if not math.isfinite(value):
                raise errors.NonNumeric(
                    f"{spec.name}{where}: {raw!r} is not finite", row=row, column=spec.name)
            return value
        token = _category_token(raw)
        if token not in spec.categories:
            raise errors.UnknownCategory(
                f"{spec.name}{where}: category {token!r} not in {list(spec.categories)}",
                row=row, column=spec.name)
        return token

    def instance(self, values: Sequence, row=None) -> Instance:
        preds = self.predictors
        if len(values) != len(preds):
            raise errors.ArityMismatch(f"expected {len(preds)} values, got {len(values)}")
        return tuple(self.coerce(s, v, row) for s, v in zip(preds, values))

    def instance_from_mapping(self, mapping: Mapping, row=None) -> Instance:
        missing = [n for n in self.names if n not in mapping]
        if missing:
            raise errors.MissingColumn(f"missing features: {missing}")
        return self.instance([mapping[n] for n in self.names], row)

    def as_mapping(self, x: Instance) -> dict:
        return dict(zip(self.names, x))

    def to_config(self) -> dict:
        feats = []
        for s in self.features:
            entry = {"name": s.name, "kind": s.kind, "mutable": s.mutable, "role": s.role}
            if s.categories:
                entry["categories"] = list(s.categories)
            feats.append(entry)
        return {"name": self.name, "features": feats}


def _category_token(raw) -> str:
    if isinstance(raw, bool):
        return str(int(raw))
    if isinstance(raw, float) and raw.is_integer():
        return str(int(raw))
    if isinstance(raw, (int, np.integer)):
        return str(int(raw))
    return str(raw).strip() if isinstance(raw, str) else str(raw)


def schema_from_config(config: Mapping) -> FeatureSchema:
    if not isinstance(config, Mapping) or "features" not in config:
        raise errors.InvalidSchema("schema config must be a mapping with a 'features' list")
    specs = []
    for entry in config["features"]:
        if not isinstance(entry, Mapping) or "name" not in entry or "kind" not in entry:
            raise errors.InvalidSchema(f"feature entry needs 'name' and 'kind': {entry!r}")
        cats = tuple(_category_token(c) for c in entry.get("categories", ()) or ())
        specs.append(FeatureSpec(
            name=str(entry["name"]),
            kind=str(entry["kind"]),
            mutable=bool(entry.get("mutable", True)),
            role=str(entry.get("role", PREDICTOR)),
            categories=cats,
        ))
    return FeatureSchema(tuple(specs), name=str(config.get("name", "")))


def load_schema(config_text: str) -> FeatureSchema:
    """Parse a YAML (or JSON) schema config.

    Expected layout::

        name: heart
        features:
          - {name: Age, kind: continuous, mutable: false}
          - {name: Sex, kind: categorical, categories: [F, M], mutable: false}
          - {name: HeartDisease, kind: categorical, categories: ["0", "1"], role: target}
    """
    try:
        config = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise errors.InvalidSchema(f"schema config does not parse: {exc}") from None
    return schema_from_config(config)


def load_schema_file(path) -> FeatureSchema:
    return load_schema(Path(path).read_text())


def dump_schema(schema: FeatureSchema) -> str:
    return yaml.safe_dump(schema.to_config(), sort_keys=False)


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSchema
    rows: tuple[Instance, ...]
    labels: tuple[int, ...]
    # per-row origin tag, e.g. "train" or a counterfactual method name
    provenance: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.rows) != len(self.labels):
            raise errors.ArityMismatch("rows and labels differ in length")
        if self.provenance is not None and len(self.provenance) != len(self.rows):
            raise errors.ArityMismatch("provenance and rows differ in length")

    def __len__(self) -> int:
        return len(self.rows)

    def class_counts(self) -> dict[int, int]:
        labels = np.asarray(self.labels, dtype=int)
        return {0: int((labels == 0).sum()), 1: int((labels == 1).sum())}

    def subset(self, indices: Iterable[int]) -> "Dataset":
        idx = list(indices)
        prov = None if self.provenance is None else tuple(self.provenance[i] for i in idx)
        return Dataset(self.schema, tuple(self.rows[i] for i in idx),
                       tuple(self.labels[i] for i in idx), prov)

    def column(self, name: str) -> list:
        j = self.schema.index(name)
        return [r[j] for r in self.rows]

    def continuous_matrix(self) -> np.ndarray:
        cols = self.schema.continuous_indices
        if not self.rows:
            return np.zeros((0, len(cols)))
        return np.array([[r[j] for j in cols] for r in self.rows], dtype=float)


def make_dataset(schema: FeatureSchema, rows: Sequence[Sequence], labels: Sequence[int],
                 provenance=None) -> Dataset:
    """Validate raw rows against ``schema`` and build a Dataset."""
    inst = tuple(schema.instance(r, row=i) for i, r in enumerate(rows))
    labs = tuple(int(v) for v in labels)
    if any(v not in (0, 1) for v in labs):
        raise errors.DataError("labels must be 0 or 1")
    return Dataset(schema, inst, labs, None if provenance is None else tuple(provenance))


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read a headed CSV; columns are matched by exact name, extra columns ignored."""
    with open(path, newline="") as fh:
        return read_csv(fh, schema)


def read_csv(fh, schema: FeatureSchema) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise errors.MissingColumn("CSV has no header row") from None
    header = [h.strip() for h in header]
    wanted = [s.name for s in schema.predictors] + [schema.target.name]
    missing = [n for n in wanted if n not in header]
    if missing:
        raise errors.MissingColumn(f"CSV is missing columns: {missing}")
    pos = {n: header.index(n) for n in wanted}
    preds = schema.predictors
    target = schema.target
    rows, labels = [], []
    for i, cells in enumerate(reader):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) < len(header):
            raise errors.ArityMismatch(f"row {i}: expected {len(header)} cells, got {len(cells)}")
        rows.append(tuple(schema.coerce(s, cells[pos[s.name]], row=i) for s in preds))
        labels.append(schema.label_of(schema.coerce(target, cells[pos[target.name]], row=i)))
    return Dataset(schema, tuple(rows), tuple(labels))


def format_value(v: Value) -> str:
    if isinstance(v, str):
        return v
    if float(v).is_integer() and abs(v) < 1e15 and math.copysign(1.0, v) > 0:
        return str(int(v))
    return repr(float(v))


def write_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps_csv(dataset))


def dumps_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    schema = dataset.schema
    writer.writerow(list(schema.names) + [schema.target.name])
    for x, y in zip(dataset.rows, dataset.labels):
        writer.writerow([format_value(v) for v in x] + [schema.token_of(y)])
    return buf.getvalue()


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def split(dataset: Dataset, test_fraction: float, seed: int, stratified: bool = True):
    """Partition into (train, test); rows keep their original relative order."""
    if not 0.0 < test_fraction < 1.0:
        raise errors.FractionOutOfRange(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    if n == 0:
        raise errors.EmptyDataset("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    labels = np.asarray(dataset.labels, dtype=int)
    if stratified:
        groups = {c: np.flatnonzero(labels == c) for c in (0, 1)}
        for c, idx in groups.items():
            if 0 < len(idx) < 2:
                raise errors.TooFewInClass(f"class {c} has {len(idx)} row(s); stratified split needs 2")
        counts = {c: _round_half_up(len(idx) * test_fraction) for c, idx in groups.items()}
        larger = max((0, 1), key=lambda c: (len(groups[c]), -c))
        counts[larger] += _round_half_up(n * test_fraction) - sum(counts.values())
        test_idx = []
        for c in (0, 1):
            idx = groups[c]
            if len(idx) == 0:
                continue
            k = min(max(counts[c], 1), len(idx) - 1)
            test_idx.extend(rng.permutation(idx)[:k].tolist())
    else:
        k = min(max(_round_half_up(n * test_fraction), 1), n - 1) if n > 1 else 0
        test_idx = rng.permutation(n)[:k].tolist()
    test_set = set(test_idx)
    train_idx = [i for i in range(n) if i not in test_set]
    return dataset.subset(train_idx), dataset.subset(sorted(test_set))


@dataclass(frozen=True)
class Bounds:
    continuous: Mapping[str, tuple[float, float]]
    categorical: Mapping[str, frozenset] = field(default_factory=dict)

    def span(self, name: str) -> float:
        lo, hi = self.continuous[name]
        return hi - lo

    def contains(self, x: Instance, schema: FeatureSchema) -> bool:
        for spec, v in zip(schema.predictors, x):
            if spec.kind == CONTINUOUS:
                lo, hi = self.continuous[spec.name]
                if not lo <= v <= hi:
                    return False
            elif v not in self.categorical[spec.name]:
                return False
        return True

    def to_config(self) -> dict:
        return {
            "continuous": {k: [float(a), float(b)] for k, (a, b) in self.continuous.items()},
            "categorical": {k: sorted(v) for k, v in self.categorical.items()},
        }

    @classmethod
    def from_config(cls, config: Mapping) -> "Bounds":
        return cls(
            {k: (float(a), float(b)) for k, (a, b) in config["continuous"].items()},
            {k: frozenset(v) for k, v in config["categorical"].items()},
        )


def feature_bounds(dataset: Dataset) -> Bounds:
    if len(dataset) == 0:
        raise errors.EmptyDataset("bounds need at least one row")
    cont, cat = {}, {}
    for j, spec in enumerate(dataset.schema.predictors):
        col = [r[j] for r in dataset.rows]
        if spec.kind == CONTINUOUS:
            cont[spec.name] = (float(min(col)), float(max(col)))
        else:
            cat[spec.name] = frozenset(col)
    return Bounds(cont, cat)
