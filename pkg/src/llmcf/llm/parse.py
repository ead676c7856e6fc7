"""Turn free-form LLM output into a schema instance."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .. import errors
from ..schema import FeatureSchema, Instance

REPAIR = "repair-revert"
REJECT = "reject"
POLICIES = (REPAIR, REJECT)


@dataclass(frozen=True)
class ParsedResponse:
    instance: Instance
    repaired: tuple[str, ...] = ()

    @property
    def was_repaired(self) -> bool:
        return bool(self.repaired)


def first_json_object(text: str) -> dict:
    """The first decodable JSON object in ``text`` (code fences and prose tolerated)."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    raise errors.NoJsonObject("response contains no JSON object")


def parse_response(text: str, x_factual: Instance, schema: FeatureSchema,
                   policy: str = REPAIR) -> ParsedResponse:
    if policy not in POLICIES:
        raise errors.DataError(f"unknown immutable policy {policy!r}; choose from {POLICIES}")
    obj = first_json_object(text or "")
    values = []
    for spec in schema.predictors:
        if spec.name not in obj:
            raise errors.MissingFeature(spec.name)
        values.append(schema.coerce(spec, obj[spec.name]))
    repaired = []
    for j in schema.immutable_indices:
        if values[j] != x_factual[j]:
            name = schema.predictors[j].name
            if policy == REJECT:
                raise errors.ImmutableChanged(name)
            values[j] = x_factual[j]
            repaired.append(name)
    return ParsedResponse(tuple(values), tuple(repaired))
