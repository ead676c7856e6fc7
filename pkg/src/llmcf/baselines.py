"""Black-box counterfactual search baselines over the schema space.

* ``nice_cf``: NICE-style. Start from the factual and copy feature values
  from its nearest unlike neighbour one at a time, greedily, until the
  prediction flips.
* ``cfnow_cf``: CFNOW-style. Greedy single-feature moves on a quantile grid
  until a flip, then undo moves that are not needed for the flip.
* ``dice_cfs``: DiCE-style. Genetic search for ``k`` flipping candidates
  trading off proximity, sparsity and diversity.

All three only query ``model.predict_many``; immutable features are never
touched.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import errors
from .cfmetrics import CfBatch, CfFailure, CfPair, Prediction, distance
from .schema import CONTINUOUS, Bounds, Dataset, FeatureSchema, Instance, feature_bounds

log = logging.getLogger(__name__)

METHODS = ("nice", "cfnow", "dice")


@dataclass(frozen=True)
class SearchBudget:
    max_evals: int = 2000
    seed: int = 0
    grid_size: int = 10

    def __post_init__(self):
        if self.max_evals <= 0:
            raise errors.DataError("search budget must be positive")
        if self.grid_size < 2:
            raise errors.DataError("grid_size must be at least 2")


class SearchContext:
    """Per (model, reference data) caches: predictions, normalized matrix, grids."""

    def __init__(self, model, train: Dataset, bounds: Bounds | None = None, grid_size: int = 10):
        self.model = model
        self.train = train
        self.schema = train.schema
        self.bounds = bounds or feature_bounds(train)
        self.grid_size = grid_size
        labels, scores = model.predict_many(train.rows)
        self.train_labels = labels
        self.train_scores = scores
        schema = self.schema
        self._cont = schema.continuous_indices
        self._cat = schema.categorical_indices
        spans = np.array([self.bounds.span(schema.predictors[j].name) for j in self._cont])
        self._spans = np.where(spans > 0, spans, 1.0)
        self._live = spans > 0
        rows = train.rows
        self._train_cont = (np.array([[r[j] for j in self._cont] for r in rows], dtype=float)
                            if rows else np.zeros((0, len(self._cont))))
        self._train_cat = np.array([[r[j] for j in self._cat] for r in rows], dtype=object) \
            if rows else np.zeros((0, len(self._cat)), dtype=object)
        self._grids = None

    def distances_to_train(self, x: Instance) -> np.ndarray:
        xc = np.array([x[j] for j in self._cont], dtype=float)
        diff = (self._train_cont - xc) / self._spans * self._live
        out = np.sqrt((diff ** 2).sum(axis=1))
        if self._cat:
            xk = np.array([x[j] for j in self._cat], dtype=object)
            out = out + (self._train_cat != xk).sum(axis=1)
        return out

    @property
    def grids(self) -> dict[int, list]:
        """Candidate values per mutable feature: quantiles or observed tokens."""
        if self._grids is None:
            grids = {}
            qs = np.linspace(0.0, 1.0, self.grid_size)
            for j in self.schema.mutable_indices:
                spec = self.schema.predictors[j]
                col = [r[j] for r in self.train.rows]
                if spec.kind == CONTINUOUS:
                    grids[j] = [float(v) for v in np.unique(np.quantile(np.asarray(col, float), qs))]
                else:
                    seen = set(col)
                    grids[j] = [c for c in spec.categories if c in seen]
            self._grids = grids
        return self._grids

    def toward(self, scores: np.ndarray, desired: int) -> np.ndarray:
        return scores if desired == 1 else 1.0 - scores


_CONTEXTS: dict = {}


def context_for(model, train: Dataset, bounds: Bounds | None = None, grid_size: int = 10):
    key = (id(model), id(train), id(bounds), grid_size)
    ctx = _CONTEXTS.get(key)
    if ctx is None or ctx.model is not model or ctx.train is not train:
        if len(_CONTEXTS) > 16:
            _CONTEXTS.clear()
        ctx = SearchContext(model, train, bounds, grid_size)
        _CONTEXTS[key] = ctx
    return ctx


def _predict(model, x):
    labels, scores = model.predict_many([x])
    return Prediction(int(labels[0]), float(scores[0]))


def _desired_for(fpred: Prediction, desired: int | None) -> int:
    target = 1 - fpred.label if desired is None else int(desired)
    if target == fpred.label:
        raise errors.InvalidTarget(
            f"factual is already predicted as the desired class {target}")
    return target


def _unlike_order(x, label, ctx) -> np.ndarray:
    """Training row indices predicted != label, by distance to x then index."""
    candidates = np.flatnonzero(ctx.train_labels != label)
    if len(candidates) == 0:
        raise errors.NoOppositeClass("no training row is predicted as the opposite class")
    d = ctx.distances_to_train(x)[candidates]
    return candidates[np.lexsort((candidates, d))]


def nearest_unlike_neighbor(x: Instance, model, train: Dataset, bounds: Bounds | None = None,
                            *, return_index: bool = False, rank: int = 0):
    """Closest training row whose model prediction differs from x's.

    Ties go to the lowest row index; ``rank`` selects the next-closest ones.
    """
    ctx = context_for(model, train, bounds)
    order = _unlike_order(x, _predict(model, x).label, ctx)
    i = int(order[min(rank, len(order) - 1)])
    return (train.rows[i], i) if return_index else train.rows[i]


def _greedy_copy(x, donor, model, ctx, target):
    """Copy donor values into x one mutable feature at a time; return the flip or None."""
    cur = list(x)
    remaining = [j for j in ctx.schema.mutable_indices if donor[j] != x[j]]
    while remaining:
        cands = []
        for j in remaining:
            c = list(cur)
            c[j] = donor[j]
            cands.append(tuple(c))
        labels, scores = model.predict_many(cands)
        best = int(np.argmax(ctx.toward(scores, target)))
        cur = list(cands[best])
        if labels[best] == target:
            return cands[best], Prediction(int(labels[best]), float(scores[best]))
        remaining.pop(best)
    return None


def nice_cf(x: Instance, model, train: Dataset, bounds: Bounds | None = None,
            desired: int | None = None, max_neighbors: int = 10) -> CfPair:
    """Greedy feature copying from the nearest unlike neighbour.

    Immutable features are never copied, so a neighbour that differs from x
    mainly in immutables may not yield a flip; the next-nearest unlike
    neighbours are then tried, up to ``max_neighbors`` in total.
    """
    fpred = _predict(model, x)
    target = _desired_for(fpred, desired)
    ctx = context_for(model, train, bounds)
    order = _unlike_order(x, fpred.label, ctx)
    for attempt, i in enumerate(order[:max(1, max_neighbors)], 1):
        found = _greedy_copy(x, train.rows[int(i)], model, ctx, target)
        if found is not None:
            return CfPair(tuple(x), found[0], fpred, found[1], "nice", attempt)
    raise errors.NoFlip("copying the mutable features of the nearest unlike neighbour(s) "
                        "did not flip the prediction")


def _changes(x, cur, indices):
    return [j for j in indices if cur[j] != x[j]]


def cfnow_revert(x: Instance, cur: Instance, model, desired: int, order: Sequence[int],
                 schema: FeatureSchema, grids: dict | None = None):
    """Undo changes in ``order`` while the prediction stays ``desired``.

    Remaining continuous changes are then pulled toward the factual along
    the grid. Returns (instance, prediction, evaluations).
    """
    cur = list(cur)
    evals = 0
    for j in order:
        if cur[j] == x[j]:
            continue
        trial = list(cur)
        trial[j] = x[j]
        labels, _ = model.predict_many([tuple(trial)])
        evals += 1
        if labels[0] == desired:
            cur = trial
    if grids:
        for j in _changes(x, cur, schema.continuous_indices):
            if j not in grids:
                continue
            lo, hi = sorted((x[j], cur[j]))
            vals = sorted((v for v in grids[j] if lo < v < hi), key=lambda v: abs(v - x[j]))
            if not vals:
                continue
            trials = []
            for v in vals:
                t = list(cur)
                t[j] = v
                trials.append(tuple(t))
            labels, _ = model.predict_many(trials)
            evals += len(trials)
            ok = np.flatnonzero(labels == desired)
            if len(ok):
                cur = list(trials[int(ok[0])])
    labels, scores = model.predict_many([tuple(cur)])
    evals += 1
    return tuple(cur), Prediction(int(labels[0]), float(scores[0])), evals


def cfnow_cf(x: Instance, model, train: Dataset, bounds: Bounds | None = None,
             budget: SearchBudget | None = None, desired: int | None = None) -> CfPair:
    budget = budget or SearchBudget()
    fpred = _predict(model, x)
    target = _desired_for(fpred, desired)
    ctx = context_for(model, train, bounds, budget.grid_size)
    schema = ctx.schema
    grids = ctx.grids
    cur = tuple(x)
    cur_score = ctx.toward(np.array([fpred.score]), target)[0]
    visited = {cur}
    benefit: dict[int, float] = {}
    evals = 0
    flipped = None
    while evals < budget.max_evals:
        cands, moved = [], []
        for j in schema.mutable_indices:
            for v in grids.get(j, ()):
                if v == cur[j]:
                    continue
                c = list(cur)
                c[j] = v
                c = tuple(c)
                if c not in visited:
                    cands.append(c)
                    moved.append(j)
        if not cands:
            break
        cands = cands[: budget.max_evals - evals]
        labels, scores = model.predict_many(cands)
        evals += len(cands)
        toward = ctx.toward(scores, target)
        best_val = toward.max()
        tied = np.flatnonzero(toward == best_val)
        if len(tied) > 1:
            dists = [distance(x, cands[i], schema, ctx.bounds) for i in tied]
            best = int(tied[int(np.argmin(dists))])
        else:
            best = int(tied[0])
        j = moved[best]
        benefit[j] = benefit.get(j, 0.0) + float(toward[best] - cur_score)
        cur, cur_score = cands[best], toward[best]
        visited.add(cur)
        if labels[best] == target:
            flipped = cur
            break
    if flipped is None:
        raise errors.BudgetExhausted(f"no flip within {budget.max_evals} evaluations")
    changed = _changes(x, flipped, schema.mutable_indices)
    order = sorted(changed, key=lambda j: (benefit.get(j, 0.0), j))
    cf, cpred, _ = cfnow_revert(x, flipped, model, target, order, schema, grids)
    return CfPair(tuple(x), cf, fpred, cpred, "cfnow", 1)


def dice_cfs(x: Instance, model, schema: FeatureSchema, bounds: Bounds, k: int = 3,
             weights: tuple[float, float, float] = (1.0, 0.5, 0.5),
             budget: SearchBudget | None = None, desired: int | None = None,
             population: int = 50, tournament: int = 3) -> list[CfPair]:
    """Genetic search minimising hinge + w1 distance + w2 sparsity - w3 diversity.

    Sparsity enters as the fraction of mutable features changed. Only
    candidates that flip the prediction are returned, at most ``k``.
    """
    if k < 1:
        raise errors.DataError("k must be at least 1")
    budget = budget or SearchBudget()
    w_dist, w_sparse, w_div = weights
    fpred = _predict(model, x)
    target = _desired_for(fpred, desired)
    rng = np.random.default_rng(budget.seed)
    preds = schema.predictors
    mutable = list(schema.mutable_indices)
    if not mutable:
        return []
    tokens = {j: [c for c in preds[j].categories if c in bounds.categorical[preds[j].name]]
              for j in mutable if preds[j].kind != CONTINUOUS}
    lims = {j: bounds.continuous[preds[j].name] for j in mutable if preds[j].kind == CONTINUOUS}

    def random_value(j):
        if j in lims:
            lo, hi = lims[j]
            return float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        opts = tokens[j]
        return opts[int(rng.integers(len(opts)))]

    def mutate(ind):
        ind = list(ind)
        for j in mutable:
            r = rng.random()
            if r < 1.0 / len(mutable):
                ind[j] = random_value(j)
            elif r < 1.0 / len(mutable) + 0.15:
                ind[j] = x[j]
        return tuple(ind)

    archive: dict[tuple, tuple[float, int]] = {}
    evals = 0

    def evaluate(inds):
        nonlocal evals
        labels, scores = model.predict_many(inds)
        evals += len(inds)
        toward = scores if target == 1 else 1.0 - scores
        losses = np.empty(len(inds))
        for i, ind in enumerate(inds):
            hinge = max(0.0, 0.5 - toward[i]) + (0.0 if labels[i] == target else 0.1)
            n_changed = sum(ind[j] != x[j] for j in mutable)
            losses[i] = (2.0 * hinge + w_dist * distance(x, ind, schema, bounds)
                         + w_sparse * n_changed / len(mutable))
            if labels[i] == target and ind not in archive:
                archive[ind] = (float(losses[i]), len(archive))
        return losses

    size = max(2, min(population, budget.max_evals))
    pop = []
    for _ in range(size):
        ind = list(x)
        for j in mutable:
            if rng.random() < 0.5:
                ind[j] = random_value(j)
        pop.append(tuple(ind))
    losses = evaluate(pop)
    while evals + size <= budget.max_evals:
        elite = np.argsort(losses, kind="stable")[:2]
        children = [pop[i] for i in elite]
        while len(children) < size:
            a = min(rng.integers(size, size=tournament), key=lambda i: losses[i])
            b = min(rng.integers(size, size=tournament), key=lambda i: losses[i])
            mask = rng.random(len(mutable)) < 0.5
            child = list(pop[a])
            for m, j in zip(mask, mutable):
                if m:
                    child[j] = pop[b][j]
            children.append(mutate(child))
        pop = children
        losses = evaluate(pop)

    if not archive:
        return []
    ranked = sorted(archive.items(), key=lambda kv: kv[1])
    cands = [c for c, _ in ranked]
    base = np.array([v[0] for _, v in ranked])
    chosen = [0]
    while len(chosen) < min(k, len(cands)):
        best, best_val = None, None
        for i in range(len(cands)):
            if i in chosen:
                continue
            div = np.mean([distance(cands[i], cands[c], schema, bounds) for c in chosen])
            val = base[i] - w_div * div
            if best_val is None or val < best_val:
                best, best_val = i, val
        chosen.append(best)
    out = [cands[i] for i in chosen]
    labels, scores = model.predict_many(out)
    return [CfPair(tuple(x), c, fpred, Prediction(int(l), float(s)), "dice", 1)
            for c, l, s in zip(out, labels, scores)]


def generate_baseline_batch(method: str, instances: Sequence[Instance], model, train: Dataset,
                            bounds: Bounds | None = None, budget: SearchBudget | None = None,
                            k: int = 3, weights=(1.0, 0.5, 0.5), workers: int = 1) -> CfBatch:
    """Run one baseline over many factuals; per-instance failures are recorded."""
    if method not in METHODS:
        raise errors.DataError(f"unknown baseline {method!r}; choose from {METHODS}")
    budget = budget or SearchBudget()
    ctx = context_for(model, train, bounds, budget.grid_size)
    schema = train.schema

    def one(i_x):
        i, x = i_x
        fpred = _predict(model, x)
        try:
            if method == "nice":
                res = [nice_cf(x, model, train, ctx.bounds)]
            elif method == "cfnow":
                res = [cfnow_cf(x, model, train, ctx.bounds, budget)]
            else:
                sub = SearchBudget(budget.max_evals, budget.seed + i, budget.grid_size)
                res = dice_cfs(x, model, schema, ctx.bounds, k, weights, sub)
                if not res:
                    raise errors.NoFlip("no flipping candidate found within budget")
        except errors.LlmcfError as exc:
            log.info("%s: instance %d failed: %s", method, i, exc)
            return [CfFailure(tuple(x), fpred, method, 1, f"{type(exc).__name__}: {exc}")]
        log.debug("%s: instance %d ok", method, i)
        return res

    items = list(enumerate(instances))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    return CfBatch(schema, tuple(r for rs in results for r in rs))
