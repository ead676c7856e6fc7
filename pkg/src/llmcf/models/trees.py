"""CART trees in flat-array form, bagged forests and gradient boosting."""

from __future__ import annotations

import math

import numpy as np


class Tree:
    """A binary tree stored as parallel arrays; ``feature == -1`` marks a leaf."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            go_left = X[rows, np.where(active, feat, 0)] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, nxt, node)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_config(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_config(cls, c: dict) -> "Tree":
        return cls(c["feature"], c["threshold"], c["left"], c["right"], c["value"])


def _best_split(X, t, idx, features, min_leaf):
    """Return (gain, feature, threshold) maximising S_L^2/n_L + S_R^2/n_R.

    With t in {0, 1} this is the Gini criterion; with real t it is squared
    error reduction. Gain is measured against the unsplit node.
    """
    n = len(idx)
    Xn = X[np.ix_(idx, features)]
    tn = t[idx]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ts = tn[order]
    csum = np.cumsum(ts, axis=0)[:-1]
    total = ts.sum(axis=0)
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    score = csum ** 2 / n_left + (total - csum) ** 2 / n_right
    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        valid &= ok
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score))
    i, k = divmod(flat, score.shape[1])
    parent = float(tn.sum()) ** 2 / n
    gain = float(score[i, k]) - parent
    if gain <= 1e-12:
        return None
    thr = 0.5 * (xs[i, k] + xs[i + 1, k])
    # midpoint can round onto the upper value for adjacent floats
    if thr >= xs[i + 1, k]:
        thr = xs[i, k]
    return gain, int(features[k]), float(thr)


def grow_tree(X, t, leaf_value, *, max_depth=None, min_leaf=1, max_features=None,
              rng=None, sample=None) -> Tree:
    """Grow a tree greedily on target ``t``.

    ``leaf_value(idx)`` maps the row indices reaching a leaf to its output.
    ``max_features`` draws that many candidate features per node (without
    replacement); if none of them splits, the remaining features are tried.
    """
    n_features = X.shape[1]
    idx0 = np.arange(len(X)) if sample is None else np.asarray(sample)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    stack = [(new_node(), idx0, 0)]
    while stack:
        node, idx, depth = stack.pop()
        split = None
        tn = t[idx]
        splittable = (len(idx) >= 2 * min_leaf and (max_depth is None or depth < max_depth)
                      and np.ptp(tn) > 0)
        if splittable:
            if max_features is None or max_features >= n_features:
                split = _best_split(X, t, idx, np.arange(n_features), min_leaf)
            else:
                perm = rng.permutation(n_features)
                split = _best_split(X, t, idx, np.sort(perm[:max_features]), min_leaf)
                if split is None:
                    split = _best_split(X, t, idx, np.sort(perm[max_features:]), min_leaf)
        if split is None:
            value[node] = leaf_value(idx)
            continue
        _, f, thr = split
        mask = X[idx, f] <= thr
        li, ri = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, li, ri
        stack.append((ri, idx[~mask], depth + 1))
        stack.append((li, idx[mask], depth + 1))
    return Tree(feature, threshold, left, right, value)


class _Stacked:
    """All trees of an ensemble concatenated so one loop walks every tree."""

    def __init__(self, trees):
        offsets = np.cumsum([0] + [tr.n_nodes for tr in trees])[:-1]
        self.roots = offsets.astype(np.int64)
        self.feature = np.concatenate([tr.feature for tr in trees])
        self.threshold = np.concatenate([tr.threshold for tr in trees])
        self.left = np.concatenate([np.where(tr.left >= 0, tr.left + o, -1)
                                    for tr, o in zip(trees, offsets)])
        self.right = np.concatenate([np.where(tr.right >= 0, tr.right + o, -1)
                                     for tr, o in zip(trees, offsets)])
        self.value = np.concatenate([tr.value for tr in trees])

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        n = len(X)
        node = np.broadcast_to(self.roots, (n, len(self.roots))).copy()
        rows = np.arange(n)[:, None]
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return self.value[node]
            go_left = X[rows, np.where(active, feat, 0)] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, nxt, node)


class RandomForest:
    """Bagged CART classifiers (Gini, sqrt feature subsampling); score = mean leaf P(y=1)."""

    kind = "tree-ensemble"

    def __init__(self, n_trees=100, max_depth=None, min_leaf=1, max_features="sqrt"):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.trees: list[Tree] = []
        self._stacked = None

    def _n_features(self, p):
        mf = self.max_features
        if mf in (None, "all"):
            return p
        if mf == "sqrt":
            return max(1, int(math.sqrt(p)))
        return max(1, min(p, int(mf)))

    def fit(self, X, y, rng):
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        mf = self._n_features(p)
        self.trees = []
        for _ in range(self.n_trees):
            sample = rng.integers(0, n, size=n)
            self.trees.append(grow_tree(
                X, y, lambda idx: float(y[idx].mean()), max_depth=self.max_depth,
                min_leaf=self.min_leaf, max_features=mf, rng=rng, sample=sample))
        self._stacked = _Stacked(self.trees)
        return self

    def scores(self, X):
        if self._stacked is None:
            self._stacked = _Stacked(self.trees)
        return self._stacked.leaf_values(X).mean(axis=1)

    def hyperparams(self):
        return {"n_trees": self.n_trees, "max_depth": self.max_depth,
                "min_leaf": self.min_leaf, "max_features": self.max_features}

    def to_config(self):
        return {"hyperparams": self.hyperparams(), "trees": [t.to_config() for t in self.trees]}

    @classmethod
    def from_config(cls, c):
        m = cls(**c["hyperparams"])
        m.trees = [Tree.from_config(t) for t in c["trees"]]
        return m


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class GradientBoosting:
    """Logistic-loss gradient boosting with depth-limited regression trees.

    Each round fits a tree to the residual y - p by squared error and sets
    every leaf to one Newton step, sum(residual) / sum(p (1 - p)).
    """

    kind = "boosted-trees"

    def __init__(self, n_rounds=100, learning_rate=0.1, max_depth=3, min_leaf=1):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.base = 0.0
        self.trees: list[Tree] = []
        self._stacked = None

    def fit(self, X, y, rng=None):
        y = np.asarray(y, dtype=float)
        prior = np.clip(y.mean(), 1e-6, 1 - 1e-6)
        self.base = float(np.log(prior / (1 - prior)))
        F = np.full(len(y), self.base)
        self.trees = []
        for _ in range(self.n_rounds):
            p = _sigmoid(F)
            resid = y - p
            hess = p * (1 - p)

            def newton(idx, resid=resid, hess=hess):
                return float(resid[idx].sum() / max(hess[idx].sum(), 1e-12))

            tree = grow_tree(X, resid, newton, max_depth=self.max_depth, min_leaf=self.min_leaf)
            self.trees.append(tree)
            F = F + self.learning_rate * tree.predict(X)
        self._stacked = _Stacked(self.trees)
        return self

    def decision_function(self, X):
        if self._stacked is None:
            self._stacked = _Stacked(self.trees)
        return self.base + self.learning_rate * self._stacked.leaf_values(X).sum(axis=1)

    def scores(self, X):
        return _sigmoid(self.decision_function(X))

    def hyperparams(self):
        return {"n_rounds": self.n_rounds, "learning_rate": self.learning_rate,
                "max_depth": self.max_depth, "min_leaf": self.min_leaf}

    def to_config(self):
        return {"hyperparams": self.hyperparams(), "base": self.base,
                "trees": [t.to_config() for t in self.trees]}

    @classmethod
    def from_config(cls, c):
        m = cls(**c["hyperparams"])
        m.base = float(c["base"])
        m.trees = [Tree.from_config(t) for t in c["trees"]]
        return m
