"""Schema space to model space: min-max scaling plus full one-hot blocks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import errors
from ..schema import CONTINUOUS, Bounds, FeatureSchema, Instance


@dataclass(frozen=True)
class EncodingSpec:
    schema: FeatureSchema
    # (name, lo, hi) for continuous, (name, categories) for categorical, in schema order
    scales: tuple[tuple[str, float, float], ...]
    slots: tuple[tuple[str, tuple[str, ...]], ...]

    @classmethod
    def from_bounds(cls, schema: FeatureSchema, bounds: Bounds) -> "EncodingSpec":
        scales, slots = [], []
        for spec in schema.predictors:
            if spec.kind == CONTINUOUS:
                lo, hi = bounds.continuous[spec.name]
                scales.append((spec.name, float(lo), float(hi)))
            else:
                slots.append((spec.name, tuple(spec.categories)))
        return cls(schema, tuple(scales), tuple(slots))

    @property
    def width(self) -> int:
        return len(self.scales) + sum(len(c) for _, c in self.slots)

    def to_config(self) -> dict:
        return {
            "scales": [[n, lo, hi] for n, lo, hi in self.scales],
            "slots": [[n, list(c)] for n, c in self.slots],
        }

    @classmethod
    def from_config(cls, schema: FeatureSchema, config: dict) -> "EncodingSpec":
        return cls(
            schema,
            tuple((n, float(lo), float(hi)) for n, lo, hi in config["scales"]),
            tuple((n, tuple(c)) for n, c in config["slots"]),
        )

    def encode_many(self, rows: Sequence[Instance]) -> np.ndarray:
        """Encode a batch of schema-space rows into a (n, width) matrix."""
        schema = self.schema
        d = schema.d
        n = len(rows)
        for r in rows:
            if len(r) != d:
                raise errors.ArityMismatch(f"instance has {len(r)} values, schema has {d}")
        out = np.zeros((n, self.width))
        col = 0
        scale_iter = iter(self.scales)
        slot_iter = iter(self.slots)
        for j, spec in enumerate(schema.predictors):
            if spec.kind == CONTINUOUS:
                _, lo, hi = next(scale_iter)
                vals = np.fromiter((r[j] for r in rows), dtype=float, count=n)
                if hi > lo:
                    out[:, col] = np.clip((vals - lo) / (hi - lo), 0.0, 1.0)
                col += 1
            else:
                _, cats = next(slot_iter)
                lookup = {c: k for k, c in enumerate(cats)}
                for i, r in enumerate(rows):
                    k = lookup.get(r[j])
                    if k is not None:
                        out[i, col + k] = 1.0
                col += len(cats)
        return out


def encode(instance: Instance, encoding: EncodingSpec) -> np.ndarray:
    return encoding.encode_many([instance])[0]
