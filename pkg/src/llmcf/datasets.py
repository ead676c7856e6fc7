"""Shipped heart-disease schema and a deterministic heart-like table.

The public 918-row heart-failure CSV is not bundled. ``load_heart`` reads it
from ``$LLMCF_HEART_CSV`` (or ``data/heart.csv`` under the working
directory) when available and otherwise falls back to ``make_heart_like``,
a seeded generator that reproduces the table's columns, category domains,
marginal shapes (including the zero-cholesterol rows) and class balance.
"""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

import numpy as np

from .schema import Dataset, FeatureSchema, load_csv, load_schema, make_dataset

HEART_ROWS = 918
HEART_ENV = "LLMCF_HEART_CSV"


def heart_schema_text() -> str:
    return resources.files("llmcf").joinpath("data/heart.schema.yaml").read_text()


def heart_schema() -> FeatureSchema:
    return load_schema(heart_schema_text())


def heart_csv_path() -> Path | None:
    env = os.environ.get(HEART_ENV)
    if env and Path(env).is_file():
        return Path(env)
    local = Path("data") / "heart.csv"
    return local if local.is_file() else None


def load_heart(schema: FeatureSchema | None = None) -> tuple[Dataset, str]:
    """Return (dataset, source) where source is the CSV path or ``"heart-like"``."""
    schema = schema or heart_schema()
    path = heart_csv_path()
    if path is not None:
        return load_csv(path, schema), str(path)
    return make_heart_like(schema=schema), "heart-like"


def _choice(rng, tokens, probs, n):
    return [tokens[i] for i in rng.choice(len(tokens), size=n, p=probs)]


def make_heart_like(n: int = HEART_ROWS, seed: int = 918,
                    schema: FeatureSchema | None = None) -> Dataset:
    schema = schema or heart_schema()
    rng = np.random.default_rng(seed)

    age = np.clip(np.round(rng.normal(53.5, 9.4, n)), 28, 77)
    male = rng.random(n) < 0.79
    pain = _choice(rng, ["ASY", "NAP", "ATA", "TA"], [0.54, 0.22, 0.19, 0.05], n)
    bp = np.clip(np.round(rng.normal(132.0, 18.0, n) + 0.2 * (age - 53.5)), 80, 200)
    chol = np.clip(np.round(rng.normal(243.0, 55.0, n)), 85, 603)
    fbs = rng.random(n) < 0.23
    ecg = _choice(rng, ["Normal", "LVH", "ST"], [0.60, 0.205, 0.195], n)
    maxhr = np.clip(np.round(rng.normal(137.0, 23.0, n) - 0.9 * (age - 53.5)), 60, 202)
    flat = rng.random(n) < 0.40
    oldpeak = np.where(flat, 0.0, np.round(rng.gamma(2.0, 0.75, n), 1))
    oldpeak = np.where(rng.random(n) < 0.02, -np.round(rng.uniform(0.1, 2.6, n), 1), oldpeak)
    oldpeak = np.clip(oldpeak, -2.6, 6.2)

    asy = np.array([p == "ASY" for p in pain])
    ata = np.array([p == "ATA" for p in pain])
    logit = (
        -2.0
        + 2.2 * asy - 0.9 * ata
        + 1.3 * male
        + 1.0 * fbs
        + 0.9 * (oldpeak - 0.9)
        - 0.035 * (maxhr - 137.0)
        + 0.03 * (age - 53.5)
        + 0.012 * (bp - 132.0)
    )
    # zero cholesterol encodes "not measured" upstream and skews positive
    missing_chol = rng.random(n) < 0.12 + 0.12 * (logit > 0)
    chol = np.where(missing_chol, 0.0, chol)
    logit = logit + 1.2 * missing_chol + 0.004 * (chol - 243.0) * (~missing_chol)
    label = (rng.random(n) < 1.0 / (1.0 + np.exp(-2.2 * logit))).astype(int)

    rows = [
        (float(age[i]), "M" if male[i] else "F", pain[i], float(bp[i]), float(chol[i]),
         "1" if fbs[i] else "0", ecg[i], float(maxhr[i]), float(oldpeak[i]))
        for i in range(n)
    ]
    return make_dataset(schema, rows, label.tolist())
