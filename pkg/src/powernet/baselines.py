"""Comparison forecasters: a seasonal persistence baseline and from-scratch
gradient-boosted regression trees over the flattened example features.

Trees are exact CART on small data: split candidates are midpoints between
consecutive sorted unique feature values, chosen by summed-squared-error
reduction with deterministic tie-breaking (lowest feature index, then lowest
threshold).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .dataio import TimeSeries
from .features import ExampleSet, Split
from .metrics import mse

GBT_FORMAT_VERSION = 1

# parameter grids used for the tuned baseline comparison
DEFAULT_N_ESTIMATORS_GRID = (50, 100, 150, 200, 250, 300, 350, 400, 450, 500)
DEFAULT_MAX_DEPTH_GRID = (1, 2, 3, 4, 5)
DEFAULT_LEARNING_RATE_GRID = (0.001, 0.01, 0.1, 1.0)


class BaselineError(ValueError):
    pass


def persistence_forecast(history, horizon: int, period: int = 24) -> np.ndarray:
    """Repeat the value observed one period earlier, recursively for
    horizons beyond one period."""
    values = history.values if isinstance(history, TimeSeries) else np.asarray(history, dtype=np.float64)
    if len(values) < period:
        raise BaselineError(f"need at least {period} history values, have {len(values)}")
    last = list(values[-period:])
    out = []
    for h in range(horizon):
        out.append(last[h % period])
    return np.asarray(out)


@dataclass
class TreeNode:
    feature: int = -1            # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode" = None
    right: "TreeNode" = None
    value: float = 0.0

    @property
    def is_leaf(self):
        return self.feature < 0

    def to_dict(self):
        if self.is_leaf:
            return {"value": self.value}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if "value" in d:
            return cls(value=d["value"])
        return cls(feature=d["feature"], threshold=d["threshold"],
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


def best_split(X: np.ndarray, y: np.ndarray):
    """Best (feature, threshold, gain) by SSE reduction, or None.

    Candidates are midpoints between consecutive sorted unique values;
    ties keep the lowest feature index, then the lowest threshold.
    """
    n, n_features = X.shape
    if n < 2:
        return None
    total_sse = float(np.sum((y - y.mean()) ** 2))
    best = None
    for j in range(n_features):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys ** 2)
        total_sum, total_sq = csum[-1], csq[-1]
        # split after position i (left = 0..i) only where the value changes
        boundary = np.nonzero(xs[:-1] < xs[1:])[0]
        for i in boundary:
            nl = i + 1
            nr = n - nl
            sse_l = csq[i] - csum[i] ** 2 / nl
            sse_r = (total_sq - csq[i]) - (total_sum - csum[i]) ** 2 / nr
            gain = total_sse - (sse_l + sse_r)
            if best is None or gain > best[2]:
                best = (j, (xs[i] + xs[i + 1]) / 2.0, float(gain))
    if best is None or best[2] <= 0.0:
        return None
    return best


def fit_tree(X, y, max_depth: int) -> TreeNode:
    """Greedy CART regression tree on residuals; leaves hold means."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 1:
        raise BaselineError("need at least one row")

    def grow(rows, depth):
        node_y = y[rows]
        if depth >= max_depth or len(rows) < 2:
            return TreeNode(value=float(node_y.mean()))
        split = best_split(X[rows], node_y)
        if split is None:
            return TreeNode(value=float(node_y.mean()))
        j, thr, _ = split
        go_left = X[rows, j] <= thr
        return TreeNode(feature=j, threshold=thr,
                        left=grow(rows[go_left], depth + 1),
                        right=grow(rows[~go_left], depth + 1))

    return grow(np.arange(len(y)), 0)


def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, rows = stack.pop()
        if len(rows) == 0:
            continue
        if nd.is_leaf:
            out[rows] = nd.value
        else:
            go_left = X[rows, nd.feature] <= nd.threshold
            stack.append((nd.left, rows[go_left]))
            stack.append((nd.right, rows[~go_left]))
    return out


def flatten_features(split: Split) -> np.ndarray:
    """The [consumption window; weather; calendar] layout shared with the
    neural model, as one flat row per example."""
    return np.concatenate([split.E, split.FW, split.FC], axis=1)


@dataclass
class GbtModel:
    initial_prediction: float
    trees: list = field(default_factory=list)
    learning_rate: float = 0.1
    max_depth: int = 3

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.full(len(X), self.initial_prediction)
        for tree in self.trees:
            out += self.learning_rate * tree_predict(tree, X)
        return out

    def staged_train_mse(self, X, y) -> list:
        """Training MSE after each boosting stage (stage 0 = mean only)."""
        pred = np.full(len(y), self.initial_prediction)
        curve = [mse(y, pred)]
        for tree in self.trees:
            pred = pred + self.learning_rate * tree_predict(tree, X)
            curve.append(mse(y, pred))
        return curve

    def to_json(self) -> str:
        doc = {
            "format_version": GBT_FORMAT_VERSION,
            "model_type": "gbt",
            "initial_prediction": self.initial_prediction,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GbtModel":
        doc = json.loads(text)
        if doc.get("format_version") != GBT_FORMAT_VERSION:
            raise BaselineError(f"unsupported GBT checkpoint version {doc.get('format_version')}")
        return cls(initial_prediction=doc["initial_prediction"],
                   learning_rate=doc["learning_rate"],
                   max_depth=doc["max_depth"],
                   trees=[TreeNode.from_dict(t) for t in doc["trees"]])


def fit_gbt(X, y, n_estimators: int = 200, max_depth: int = 3,
            learning_rate: float = 0.1) -> GbtModel:
    """Stage-wise boosting on squared loss: each tree fits the residuals
    of the current ensemble, earlier trees stay unchanged."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise BaselineError("empty training set")
    model = GbtModel(initial_prediction=float(y.mean()),
                     learning_rate=learning_rate, max_depth=max_depth)
    pred = np.full(len(y), model.initial_prediction)
    for _ in range(n_estimators):
        tree = fit_tree(X, y - pred, max_depth)
        pred += learning_rate * tree_predict(tree, X)
        model.trees.append(tree)
    return model


def fit_gbt_examples(data: ExampleSet, **kwargs) -> GbtModel:
    return fit_gbt(flatten_features(data.train), data.train.y, **kwargs)


def gbt_grid_search(data: ExampleSet,
                    n_estimators_grid=DEFAULT_N_ESTIMATORS_GRID,
                    max_depth_grid=DEFAULT_MAX_DEPTH_GRID,
                    learning_rate_grid=DEFAULT_LEARNING_RATE_GRID):
    """Exhaustive product search by validation MSE.

    Ties prefer fewer trees, then shallower trees, then a smaller learning
    rate. Returns (best model, per-cell report list).

    Only the largest tree count per (depth, lr) pair is actually fitted;
    smaller counts reuse its prefix, since boosting stages are independent
    of how many follow.
    """
    if not (n_estimators_grid and max_depth_grid and learning_rate_grid):
        raise BaselineError("grids must be non-empty")
    X_tr = flatten_features(data.train)
    X_val = flatten_features(data.validation)
    y_tr, y_val = data.train.y, data.validation.y
    n_grid = sorted(n_estimators_grid)
    cells = []
    for depth, lr in product(sorted(max_depth_grid), sorted(learning_rate_grid)):
        full = fit_gbt(X_tr, y_tr, n_estimators=n_grid[-1],
                       max_depth=depth, learning_rate=lr)
        pred = np.full(len(y_val), full.initial_prediction)
        k = 0
        for n_est in n_grid:
            while k < n_est:
                pred += lr * tree_predict(full.trees[k], X_val)
                k += 1
            cells.append({"n_estimators": n_est, "max_depth": depth,
                          "learning_rate": lr, "val_mse": mse(y_val, pred),
                          "_trees": full.trees[:n_est],
                          "_init": full.initial_prediction})
    best = min(cells, key=lambda c: (c["val_mse"], c["n_estimators"],
                                     c["max_depth"], c["learning_rate"]))
    model = GbtModel(initial_prediction=best["_init"], trees=best["_trees"],
                     learning_rate=best["learning_rate"],
                     max_depth=best["max_depth"])
    report = [{key: c[key] for key in ("n_estimators", "max_depth",
                                       "learning_rate", "val_mse")}
              for c in cells]
    return model, report
