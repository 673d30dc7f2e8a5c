"""Dispatch for batch tree prediction: compiled kernel when numba imports,
pure-numpy node descent otherwise. Both paths add tree predictions to the
output in tree index order, element by element, so they agree bit for bit.
"""

from __future__ import annotations

import numpy as np

_numba_accumulate = None
_numba_checked = False


def _compiled():
    global _numba_accumulate, _numba_checked
    if not _numba_checked:
        _numba_checked = True
        try:
            from ._treekernel_numba import accumulate
            _numba_accumulate = accumulate
        except ImportError:
            _numba_accumulate = None
    return _numba_accumulate


def _numpy_tree_values(x, feature, kind, threshold, left, right, value, base):
    node = np.full(x.shape[0], base, dtype=np.int64)
    while True:
        f = feature[node]
        active = np.nonzero(f >= 0)[0]
        if active.size == 0:
            break
        sub = node[active]
        v = x[active, f[active]]
        numeric = kind[sub] == 0
        go_left = np.where(numeric, v <= threshold[sub], v == threshold[sub])
        node[active] = base + np.where(go_left, left[sub], right[sub])
    return value[node]


def accumulate_forest(x: np.ndarray, packed: dict, out: np.ndarray,
                      t0: int = 0, t1: int | None = None) -> None:
    """Accumulate predictions of trees ``t0 .. t1`` of a packed forest into ``out``."""
    if t1 is None:
        t1 = packed["offsets"].size - 1
    kernel = _compiled()
    if kernel is not None:
        kernel(x, packed["feature"], packed["kind"], packed["threshold"],
               packed["left"], packed["right"], packed["value"],
               packed["offsets"], t0, t1, out)
        return
    for t in range(t0, t1):
        out += _numpy_tree_values(
            x, packed["feature"], packed["kind"], packed["threshold"],
            packed["left"], packed["right"], packed["value"],
            int(packed["offsets"][t]),
        )


def pack_trees(trees) -> dict:
    """Concatenate per-tree node arrays into flat arrays plus start offsets."""
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    for i, t in enumerate(trees):
        offsets[i + 1] = offsets[i] + t.feature.size
    return {
        "offsets": offsets,
        "feature": np.concatenate([t.feature for t in trees]),
        "kind": np.concatenate([t.kind for t in trees]),
        "threshold": np.concatenate([t.threshold for t in trees]),
        "left": np.concatenate([t.left for t in trees]),
        "right": np.concatenate([t.right for t in trees]),
        "value": np.concatenate([t.value for t in trees]),
    }
