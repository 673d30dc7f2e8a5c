"""Compiled tree-walk kernel; imported lazily so numba stays off cold paths."""

from numba import njit


@njit(nogil=True, cache=True)
def accumulate(x, feature, kind, threshold, left, right, value, offsets, t0, t1, out):
    """Add each tree's prediction to ``out``, trees in index order.

    Trees live concatenated in the flat node arrays; tree ``t`` starts at
    ``offsets[t]``. ``kind`` 0 compares ``x <= threshold``, kind 1 tests
    level equality. Per-row accumulation order is fixed (tree 0, 1, ...),
    so results are identical no matter how rows are chunked across calls.
    """
    n = x.shape[0]
    for t in range(t0, t1):
        base = offsets[t]
        for i in range(n):
            node = base
            while feature[node] >= 0:
                v = x[i, feature[node]]
                if kind[node] == 0:
                    go_left = v <= threshold[node]
                else:
                    go_left = v == threshold[node]
                if go_left:
                    node = base + left[node]
                else:
                    node = base + right[node]
            out[i] += value[node]
