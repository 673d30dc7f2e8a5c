"""Bagged regression trees grown with exhaustive variance-reduction splits.

Each tree is grown on a seeded bootstrap resample; tree ``k`` of a forest
with root seed ``s`` draws from ``SeedSequence((s, k))``, so forests are
reproducible no matter in which order trees are grown. At every split a
random column subset of size ``m_try`` is considered; the winning split
maximizes the reduction in within-node sum of squares, ties broken by
lowest column index, then lowest threshold. Numeric splits send
``x <= threshold`` left; categorical splits send a single level left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _treekernel
from .errors import FitError
from .predictors import Predictor
from .tabular import CATEGORICAL, NUMERIC, ColumnSpec, DataTable

SPLIT_NUMERIC = 0
SPLIT_LEVEL = 1

LEAF = -1


@dataclass
class RegressionTree:
    """Flat-array binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray      # int32 column index, -1 for leaves
    kind: np.ndarray         # uint8 split kind per node
    threshold: np.ndarray    # float64 threshold, or level index for level splits
    left: np.ndarray         # int32 tree-local child ids
    right: np.ndarray
    value: np.ndarray        # float64 leaf means (0.0 on internal nodes)
    height: int = 0

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, rows) -> np.ndarray:
        x = np.ascontiguousarray(np.asarray(rows, dtype=np.float64))
        out = np.zeros(x.shape[0], dtype=np.float64)
        _treekernel.accumulate_forest(x, _treekernel.pack_trees([self]), out)
        return out

    def to_doc(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "kind": self.kind.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "height": self.height,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RegressionTree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int32),
            kind=np.asarray(doc["kind"], dtype=np.uint8),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.int32),
            right=np.asarray(doc["right"], dtype=np.int32),
            value=np.asarray(doc["value"], dtype=np.float64),
            height=int(doc["height"]),
        )


def _best_split(x, y, rows, candidates, col_kind, n_levels, min_leaf):
    """Best (gain, column, kind, threshold) over the candidate columns, or None.

    Gain is the decrease in sum of squared errors. Splits with zero gain are
    still returned when legal, so growth continues while the response varies;
    this lets an unrestricted tree reproduce distinct training rows exactly.
    """
    k = rows.size
    yr = y[rows]
    total = yr.sum()
    base = total * total / k
    best_gain = -np.inf
    best = None
    for j in candidates:
        v = x[rows, j]
        if col_kind[j] == SPLIT_NUMERIC:
            order = np.argsort(v, kind="stable")
            sv = v[order]
            if sv[0] == sv[-1]:
                continue
            cy = np.cumsum(yr[order])
            n_left = np.arange(1, k)
            valid = (sv[:-1] < sv[1:]) & (n_left >= min_leaf) & (k - n_left >= min_leaf)
            if not valid.any():
                continue
            sum_left = cy[:-1]
            gain = np.where(
                valid,
                sum_left ** 2 / n_left + (total - sum_left) ** 2 / (k - n_left) - base,
                -np.inf,
            )
            i = int(np.argmax(gain))  # first max: lowest threshold
            if gain[i] > best_gain:
                best_gain = gain[i]
                best = (j, SPLIT_NUMERIC, 0.5 * (sv[i] + sv[i + 1]))
        else:
            levels = v.astype(np.int64)
            counts = np.bincount(levels, minlength=n_levels[j]).astype(np.float64)
            sums = np.bincount(levels, weights=yr, minlength=n_levels[j])
            valid = (counts >= min_leaf) & (k - counts >= min_leaf)
            if not valid.any():
                continue
            safe_l = np.maximum(counts, 1.0)
            safe_r = np.maximum(k - counts, 1.0)
            gain = np.where(valid, sums ** 2 / safe_l + (total - sums) ** 2 / safe_r - base, -np.inf)
            lev = int(np.argmax(gain))  # first max: lowest level index
            if gain[lev] > best_gain:
                best_gain = gain[lev]
                best = (j, SPLIT_LEVEL, float(lev))
    return best


def _grow_tree(x, y, col_kind, n_levels, rng, m_try, max_depth, min_leaf):
    p = x.shape[1]
    feature: list[int] = []
    kind: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    height = 0

    # explicit stack keeps arbitrarily deep trees off the recursion limit;
    # left child pushed last so nodes appear in preorder
    stack = [(np.arange(x.shape[0]), 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        idx = len(feature)
        if parent >= 0:
            if is_left:
                left[parent] = idx
            else:
                right[parent] = idx
        feature.append(LEAF)
        kind.append(SPLIT_NUMERIC)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        height = max(height, depth)

        yr = y[rows]
        splittable = (
            (max_depth is None or depth < max_depth)
            and rows.size >= 2 * min_leaf
            and yr.min() < yr.max()
        )
        split = None
        if splittable:
            if m_try >= p:
                candidates = range(p)
            else:
                candidates = np.sort(rng.choice(p, size=m_try, replace=False))
            split = _best_split(x, y, rows, candidates, col_kind, n_levels, min_leaf)
        if split is None:
            value[idx] = float(yr.mean())
            continue
        j, split_kind, thr = split
        feature[idx] = j
        kind[idx] = split_kind
        threshold[idx] = thr
        if split_kind == SPLIT_NUMERIC:
            mask = x[rows, j] <= thr
        else:
            mask = x[rows, j] == thr
        stack.append((rows[~mask], depth + 1, idx, False))
        stack.append((rows[mask], depth + 1, idx, True))

    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int32),
        kind=np.asarray(kind, dtype=np.uint8),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
        height=height,
    )


class BaggedForest(Predictor):
    """Mean of regression trees grown on bootstrap resamples."""

    def __init__(self, schema, trees, *, seed: int, m_try: int,
                 max_depth: int | None, min_leaf: int, bootstrap: bool = True):
        if not trees:
            raise ValueError("a forest needs at least one tree")
        self._schema = tuple(schema)
        self.trees = list(trees)
        self.seed = seed
        self.m_try = m_try
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.bootstrap = bootstrap
        self._packed = None

    @property
    def schema(self) -> tuple[ColumnSpec, ...]:
        return self._schema

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _pack(self) -> dict:
        if self._packed is None:
            self._packed = _treekernel.pack_trees(self.trees)
        return self._packed

    def predict(self, rows) -> np.ndarray:
        x = self._check_rows(rows)
        out = np.zeros(x.shape[0], dtype=np.float64)
        _treekernel.accumulate_forest(x, self._pack(), out)
        return out / len(self.trees)

    def parameters_doc(self) -> dict:
        return {
            "seed": self.seed,
            "m_try": self.m_try,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "bootstrap": self.bootstrap,
            "trees": [t.to_doc() for t in self.trees],
        }

    @classmethod
    def from_parameters_doc(cls, schema, params: dict) -> "BaggedForest":
        return cls(
            schema,
            [RegressionTree.from_doc(d) for d in params["trees"]],
            seed=params["seed"],
            m_try=params["m_try"],
            max_depth=params["max_depth"],
            min_leaf=params["min_leaf"],
            bootstrap=params.get("bootstrap", True),
        )


def fit_forest(data: DataTable, target: int | str, b: int = 500,
               m_try: int | None = None, max_depth: int | None = None,
               min_leaf: int = 5, seed: int = 0, bootstrap: bool = True) -> BaggedForest:
    """Grow ``b`` trees on seeded bootstrap resamples of ``data``.

    Defaults mirror common random-forest regression practice: 500 trees,
    ``m_try = max(1, p // 3)`` columns per split, nodes grown until fewer
    than ``2 * min_leaf`` rows remain (``min_leaf = 5``).
    """
    t = data.column_index(target)
    if data.schema[t].role != NUMERIC:
        raise FitError(f"target column {data.schema[t].name!r} is not numeric")
    if data.n < 2:
        raise FitError("need at least 2 rows to fit a forest")
    if b < 1:
        raise FitError("tree count must be at least 1")
    if min_leaf < 1:
        raise FitError("min_leaf must be at least 1")
    if seed < 0:
        raise FitError("seed must be nonnegative")

    feature_idx = [j for j in range(data.n_columns) if j != t]
    p = len(feature_idx)
    if m_try is None:
        m_try = max(1, p // 3)
    if not 1 <= m_try <= p:
        raise FitError(f"m_try must be between 1 and {p}")
    x = np.ascontiguousarray(data.data[:, feature_idx])
    y = data.data[:, t]
    schema = tuple(data.schema[j] for j in feature_idx)
    col_kind = np.array(
        [SPLIT_LEVEL if c.role == CATEGORICAL else SPLIT_NUMERIC for c in schema],
        dtype=np.uint8,
    )
    n_levels = np.array([len(c.levels) for c in schema], dtype=np.int64)

    n = data.n
    trees = []
    for k in range(b):
        rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            xb, yb = x[rows], y[rows]
        else:
            xb, yb = x, y
        trees.append(_grow_tree(xb, yb, col_kind, n_levels, rng, m_try, max_depth, min_leaf))

    return BaggedForest(schema, trees, seed=seed, m_try=m_try,
                        max_depth=max_depth, min_leaf=min_leaf, bootstrap=bootstrap)
