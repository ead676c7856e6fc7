import io

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import oracle
from llmcf import errors
from conftest import FnModel
from llmcf.baselines import SearchBudget, generate_baseline_batch, nearest_unlike_neighbor, nice_cf
from llmcf.cfmetrics import CfBatch, CfPair, Prediction, distance, plausibility, sparsity, validity
from llmcf.llm import GenConfig, MockTransport, PromptSpec, build_prompt, generate_llm_batch
from llmcf.models import auc
from llmcf.schema import FeatureSchema, FeatureSpec, dumps_csv, feature_bounds, make_dataset, read_csv, split

SETTINGS = settings(max_examples=40, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
CATS = ("a", "b", "c")


@st.composite
def schemas(draw, max_d=6):
    d = draw(st.integers(1, max_d))
    kinds = draw(st.lists(st.sampled_from(["continuous", "categorical"]), min_size=d, max_size=d))
    mut = draw(st.lists(st.booleans(), min_size=d, max_size=d))
    feats = tuple(FeatureSpec(f"x{j}", k, m, categories=CATS if k == "categorical" else ())
                  for j, (k, m) in enumerate(zip(kinds, mut)))
    return FeatureSchema(feats + (FeatureSpec("y", "categorical", role="target",
                                              categories=("0", "1")),))


def rows_for(schema, n, rng, grid=None):
    out = []
    for _ in range(n):
        r = []
        for s in schema.predictors:
            if s.kind == "continuous":
                v = float(rng.choice(grid)) if grid is not None else float(rng.normal(0, 10))
                r.append(v)
            else:
                r.append(str(rng.choice(CATS)))
        out.append(tuple(r))
    return out


@st.composite
def datasets(draw, min_rows=2, max_rows=30, max_d=6):
    schema = draw(schemas(max_d))
    n = draw(st.integers(min_rows, max_rows))
    rng = np.random.default_rng(draw(st.integers(0, 2 ** 32 - 1)))
    rows = rows_for(schema, n, rng)
    labels = [int(v) for v in rng.integers(0, 2, n)]
    if n >= 2:
        labels[0], labels[1] = 0, 1
    return make_dataset(schema, rows, labels)


def _oracle_inputs(schema, bounds):
    kinds = ["c" if s.kind == "continuous" else "k" for s in schema.predictors]
    spans = [bounds.span(s.name) if s.kind == "continuous" else 0 for s in schema.predictors]
    return kinds, spans


@SETTINGS
@given(datasets(min_rows=1))
def test_csv_round_trip(ds):
    assert read_csv(io.StringIO(dumps_csv(ds)), ds.schema) == ds


@SETTINGS
@given(datasets(min_rows=4), st.integers(0, 1000), st.floats(0.1, 0.9))
def test_split_deterministic_partition(ds, seed, frac):
    if min(ds.class_counts().values()) < 2:
        return
    a, b = split(ds, frac, seed), split(ds, frac, seed)
    assert dumps_csv(a[0]) == dumps_csv(b[0]) and dumps_csv(a[1]) == dumps_csv(b[1])
    assert len(a[0]) + len(a[1]) == len(ds)


@SETTINGS
@given(datasets(min_rows=1))
def test_bounds_contain_own_rows(ds):
    b = feature_bounds(ds)
    pairs = [CfPair(r, r, Prediction(0, 0.0), Prediction(1, 1.0), "t") for r in ds.rows]
    assert plausibility(CfBatch.of(ds.schema, pairs), b) == 1.0


@SETTINGS
@given(datasets(min_rows=2), st.integers(0, 2 ** 32 - 1))
def test_distance_properties(ds, seed):
    rng = np.random.default_rng(seed)
    b = feature_bounds(ds)
    kinds, spans = _oracle_inputs(ds.schema, b)
    rows = list(ds.rows)
    for _ in range(10):
        x, y = rows[rng.integers(len(rows))], rows[rng.integers(len(rows))]
        dxy = distance(x, y, ds.schema, b)
        assert distance(x, x, ds.schema, b) == 0.0
        assert dxy == distance(y, x, ds.schema, b)
        assert abs(dxy - oracle.distance(x, y, kinds, spans)) < 1e-12
        # rows are drawn from the data, so any continuous change exceeds epsilon
        assert (dxy > 0) == (oracle.n_changed(x, y, kinds, spans) > 0)


@SETTINGS
@given(datasets(min_rows=2), st.integers(0, 2 ** 32 - 1))
def test_metric_ranges(ds, seed):
    rng = np.random.default_rng(seed)
    rows = list(ds.rows)
    pairs = [CfPair(rows[rng.integers(len(rows))], rows[rng.integers(len(rows))],
                    Prediction(int(rng.integers(2)), 0.5), Prediction(int(rng.integers(2)), 0.5), "t")
             for _ in range(8)]
    batch = CfBatch.of(ds.schema, pairs)
    b = feature_bounds(ds)
    assert 0 <= validity(batch) <= 1
    assert plausibility(batch, b) == 1.0
    assert 0 <= sparsity(batch, bounds=b) <= ds.schema.d


@SETTINGS
@given(st.lists(st.integers(0, 5), min_size=2, max_size=30), st.integers(0, 2 ** 32 - 1))
def test_auc_monotone_invariance(raw, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, len(raw))
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    s = np.asarray(raw, dtype=float)
    base = auc(s, labels)
    assert abs(base - oracle.auc_pairs(s.tolist(), labels.tolist())) < 1e-12
    assert auc(np.exp(s) * 3 - 1, labels) == base
    assert auc(s ** 3 + 7, labels) == base


def _model_on(ds, seed):
    # a random linear score over continuous values and category codes
    rng = np.random.default_rng(seed)
    w = rng.normal(size=ds.schema.d)
    codes = {c: i - 1 for i, c in enumerate(CATS)}
    mean = np.mean([[v if isinstance(v, float) else codes[v] for v in r] for r in ds.rows], axis=0)

    def score(r):
        z = sum(wj * ((v if isinstance(v, float) else codes[v]) - m) for wj, v, m in zip(w, r, mean))
        return 1 / (1 + np.exp(-z))
    return FnModel(ds.schema, score)


@SETTINGS
@given(datasets(min_rows=6, max_rows=25, max_d=4), st.integers(0, 1000),
       st.sampled_from(["nice", "cfnow", "dice"]))
def test_baseline_outputs_valid_and_respect_immutables(ds, seed, method):
    m = _model_on(ds, seed)
    batch = generate_baseline_batch(method, ds.rows[:5], m, ds, budget=SearchBudget(300, seed))
    imm = ds.schema.immutable_indices
    for p in batch.pairs:
        assert p.cf_pred.label != p.factual_pred.label
        assert m.predict_many([p.counterfactual])[0][0] == p.cf_pred.label
        assert all(p.factual[j] == p.counterfactual[j] for j in imm)


@SETTINGS
@given(datasets(min_rows=6, max_rows=25, max_d=4), st.integers(0, 1000))
def test_nice_values_come_from_factual_or_donor(ds, seed):
    m = _model_on(ds, seed)
    for x in ds.rows[:5]:
        try:
            p = nice_cf(x, m, ds)
        except errors.CfRuntimeError:
            continue
        donor = nearest_unlike_neighbor(x, m, ds, rank=p.attempts - 1)
        assert all(c == f or c == d for c, f, d in zip(p.counterfactual, x, donor))


@SETTINGS
@given(datasets(min_rows=6, max_rows=25, max_d=4), st.integers(0, 1000), st.integers(0, 3))
def test_llm_pipeline_invariants(ds, seed, pool):
    m = _model_on(ds, seed)
    t = MockTransport(m, ds, seed=seed, pool=pool + 1, revert_immutables=pool % 2 == 0)
    spec = PromptSpec(shots=pool)
    batch = generate_llm_batch(ds.rows[:6], m, t, ds.schema, spec, GenConfig(seed=seed), ds)
    imm = ds.schema.immutable_indices
    for p in batch.pairs:
        assert p.cf_pred.label != p.factual_pred.label
        assert all(p.factual[j] == p.counterfactual[j] for j in imm)
    x = ds.rows[0]
    assert build_prompt(x, 1, ds.schema, spec) == build_prompt(x, 1, ds.schema, spec)
