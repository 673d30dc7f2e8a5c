import math

import numpy as np
import pytest

from pdexplain import BackgroundSet, ColumnSpec, DataTable, LinearModel


class FuncPredictor:
    """Minimal duck-typed predictor wrapping a row-matrix function."""

    def __init__(self, fn, concurrency_safe=True):
        self.fn = fn
        self.concurrency_safe = concurrency_safe

    def predict(self, rows):
        return np.asarray(self.fn(np.asarray(rows, dtype=np.float64)), dtype=np.float64)


def linear_comb(rows, coef):
    """Row-wise linear combination with a fixed, batch-shape-independent order."""
    out = np.zeros(rows.shape[0], dtype=np.float64)
    for j in range(rows.shape[1]):
        out += rows[:, j] * coef[j]
    return out


def naive_pd(model, background_matrix, cols, points):
    """Brute-force reference: double loop over points and background rows,
    one single-row predict call each, averaged with exact summation."""
    bg = np.asarray(background_matrix, dtype=np.float64)
    values = []
    for pt in np.atleast_2d(np.asarray(points, dtype=np.float64)):
        preds = []
        for row in bg:
            synth = row.copy()
            for c, v in zip(cols, pt):
                synth[c] = v
            preds.append(float(model.predict(synth[None, :])[0]))
        values.append(math.fsum(preds) / bg.shape[0])
    return np.asarray(values)


def naive_pd_at_observations(model, table, cols, background_matrix=None):
    bg = table.data if background_matrix is None else background_matrix
    if len(cols) == 0:
        return naive_pd(model, bg, (), np.zeros((1, 0)))[0] * np.ones(table.n)
    return naive_pd(model, bg, cols, table.data[:, list(cols)])


def rel_err(actual, expected):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = np.maximum(np.abs(expected), 1e-300)
    return float(np.max(np.abs(actual - expected) / scale))


@pytest.fixture
def linear3():
    """Three-row fixture with an exactly known linear model: f = x1 + 2*x2."""
    table = DataTable(
        [ColumnSpec("x1", "numeric"), ColumnSpec("x2", "numeric")],
        [[0.0, 0.0], [1.0, 1.0], [2.0, 4.0]],
    )
    model = LinearModel(table.schema, 0.0, [1.0, 2.0])
    return table, model


@pytest.fixture
def linear3_background(linear3):
    table, model = linear3
    return table, model, BackgroundSet(table)
