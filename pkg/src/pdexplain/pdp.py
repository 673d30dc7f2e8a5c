"""Partial dependence engine.

Estimates the average model prediction with a column subset pinned to given
coordinates, the complement columns swept over a background sample. Values
are computed at arbitrary points, at the observed rows (the form the
explainability metrics consume), or for the empty subset as the constant
mean prediction. Per-point averaging is compensated and runs in a fixed
background order, so results are bit-identical across batch sizes and
thread schedules.
"""

from __future__ import annotations

import csv
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EngineError, PredictError
from .tabular import CATEGORICAL, DataTable, FeatureSubset

AT_POINTS = "at_points"
AT_OBSERVATIONS = "at_observations"
NULL = "null"

DEFAULT_BATCH_ROWS = 65536


class BackgroundSet:
    """The rows whose complement columns get averaged over.

    Defaults to the whole table; a cap ``m`` draws a seeded subsample
    without replacement (indices kept sorted, i.e. in row order).
    """

    def __init__(self, table: DataTable, m: int | None = None, seed: int = 0):
        if m is None or m >= table.n:
            indices = np.arange(table.n)
        elif m < 1:
            raise EngineError("background must keep at least one row")
        else:
            rng = np.random.default_rng(seed)
            indices = np.sort(rng.choice(table.n, size=m, replace=False))
        matrix = np.ascontiguousarray(table.data[indices])
        matrix.setflags(write=False)
        self.table = table
        self.seed = seed
        self.indices = indices
        self.matrix = matrix

    @property
    def size(self) -> int:
        return self.indices.size


@dataclass
class PdResult:
    """Partial dependence values plus the metadata to reproduce them."""

    subset: tuple[int, ...]
    columns: tuple[str, ...]
    kind: str
    points: np.ndarray | None
    values: np.ndarray | float
    background_size: int
    seed: int

    def to_doc(self) -> dict:
        doc = {
            "subset": list(self.columns),
            "kind": self.kind,
            "background_size": self.background_size,
            "seed": self.seed,
        }
        if self.kind == NULL:
            doc["value"] = float(self.values)
        else:
            doc["points"] = [[float(v) for v in p] for p in self.points]
            doc["values"] = [float(v) for v in self.values]
        return doc

    def write_csv(self, path, comment: str | None = None) -> None:
        """One row per point: subset coordinates, then the pd value."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            if self.kind == NULL:
                writer.writerow(["pd"])
                writer.writerow([repr(float(self.values))])
                return
            writer.writerow([*self.columns, "pd"])
            for pt, v in zip(self.points, self.values):
                writer.writerow([*(repr(float(c)) for c in pt), repr(float(v))])


def _as_indices(subset, table: DataTable) -> tuple[int, ...]:
    if isinstance(subset, FeatureSubset):
        idx = subset.indices
    else:
        try:
            idx = tuple(table.column_index(c) for c in subset)
        except KeyError as exc:
            raise EngineError(str(exc)) from exc
    if len(set(idx)) != len(idx):
        raise EngineError(f"duplicate columns in subset {idx}")
    for i in idx:
        if not 0 <= i < table.n_columns:
            raise EngineError(f"subset column {i} out of range")
    return idx


def _column_names(table: DataTable, cols) -> tuple[str, ...]:
    return tuple(table.schema[i].name for i in cols)


def _compensated_mean_rows(block: np.ndarray) -> np.ndarray:
    """Neumaier-compensated row means of a (k, m) block, summed left to right."""
    m = block.shape[1]
    total = block[:, 0].copy()
    comp = np.zeros_like(total)
    for j in range(1, m):
        x = block[:, j]
        t = total + x
        comp += np.where(np.abs(total) >= np.abs(x), (total - t) + x, (x - t) + total)
        total = t
    return (total + comp) / m


def _checked_predict(model, rows: np.ndarray, context: str) -> np.ndarray:
    try:
        preds = model.predict(rows)
    except PredictError as exc:
        raise PredictError(f"{exc} [{context}]") from exc
    except EngineError:
        raise
    except Exception as exc:
        raise EngineError(f"predictor failed on {context}: {exc}") from exc
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    if preds.size != rows.shape[0]:
        raise EngineError(
            f"predictor returned {preds.size} values for {rows.shape[0]} rows on {context}"
        )
    if not np.all(np.isfinite(preds)):
        raise EngineError(f"predictor returned non-finite values on {context}")
    return preds


def _validate_points(points, cols, table: DataTable) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if len(cols) == 1 else pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != len(cols):
        raise EngineError(
            f"points must supply one value per subset column ({len(cols)}), got shape {pts.shape}"
        )
    for k, j in enumerate(cols):
        spec = table.schema[j]
        v = pts[:, k]
        if spec.role == CATEGORICAL:
            ok = (v == np.floor(v)) & (v >= 0) & (v < len(spec.levels))
            if not ok.all():
                raise EngineError(f"point values for column {spec.name!r} are not valid level indices")
        elif not np.all(np.isfinite(v)):
            raise EngineError(f"point values for column {spec.name!r} must be finite")
    return pts


def _evaluate_unique(model, background: BackgroundSet, cols, pts: np.ndarray,
                     threads: int, batch_rows: int) -> np.ndarray:
    """PD value per (already deduplicated) point row of ``pts``."""
    bg = background.matrix
    m = bg.shape[0]
    k = pts.shape[0]
    chunk = max(1, batch_rows // m)
    spans = [(lo, min(lo + chunk, k)) for lo in range(0, k, chunk)]
    out = np.empty(k, dtype=np.float64)
    lock = None if getattr(model, "concurrency_safe", False) else threading.Lock()

    def run(span):
        lo, hi = span
        synth = np.tile(bg, (hi - lo, 1))
        for c, j in enumerate(cols):
            synth[:, j] = np.repeat(pts[lo:hi, c], m)
        context = f"synthetic batch for points [{lo}:{hi}] of subset columns {tuple(cols)}"
        if lock is None:
            preds = _checked_predict(model, synth, context)
        else:
            with lock:
                preds = _checked_predict(model, synth, context)
        return lo, _compensated_mean_rows(preds.reshape(hi - lo, m))

    if threads <= 1 or len(spans) == 1:
        for span in spans:
            lo, vals = run(span)
            out[lo:lo + vals.size] = vals
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for lo, vals in pool.map(run, spans):
                out[lo:lo + vals.size] = vals
    return out


def pd_at_points(model, background: BackgroundSet, subset, points, *,
                 threads: int = 1, batch_rows: int = DEFAULT_BATCH_ROWS) -> PdResult:
    """Average prediction at each point, complement columns swept over the
    background rows. Duplicate points are evaluated once and broadcast back.
    """
    table = background.table
    cols = _as_indices(subset, table)
    if not cols:
        raise EngineError("subset must be nonempty; use pd_null for the empty subset")
    if background.size < 1:
        raise EngineError("empty background")
    pts = _validate_points(points, cols, table)
    if pts.shape[0] == 0:
        raise EngineError("no evaluation points given")
    unique_pts, inverse = np.unique(pts, axis=0, return_inverse=True)
    unique_vals = _evaluate_unique(model, background, cols, unique_pts, threads, batch_rows)
    return PdResult(
        subset=cols,
        columns=_column_names(table, cols),
        kind=AT_POINTS,
        points=pts,
        values=unique_vals[inverse.reshape(-1)],
        background_size=background.size,
        seed=background.seed,
    )


def pd_at_observations(model, background: BackgroundSet, subset, *,
                       threads: int = 1, batch_rows: int = DEFAULT_BATCH_ROWS) -> PdResult:
    """PD evaluated at the subset coordinates of every row of the parent table.

    The averaging still runs over the (possibly subsampled) background, but
    evaluation points always come from the full table. When the subset covers
    every column the complement is empty and the values are exactly the model
    predictions; the empty subset degenerates to the null value broadcast to
    every row.
    """
    table = background.table
    cols = _as_indices(subset, table)
    if background.size < 1:
        raise EngineError("empty background")
    pts = table.data[:, cols]
    if len(cols) == table.n_columns:
        values = _checked_predict(model, table.data, "the full observation table")
    else:
        unique_pts, inverse = np.unique(pts, axis=0, return_inverse=True)
        unique_vals = _evaluate_unique(model, background, cols, unique_pts, threads, batch_rows)
        values = unique_vals[inverse.reshape(-1)]
    return PdResult(
        subset=cols,
        columns=_column_names(table, cols),
        kind=AT_OBSERVATIONS,
        points=pts,
        values=values,
        background_size=background.size,
        seed=background.seed,
    )


def pd_null(model, background: BackgroundSet) -> PdResult:
    """Constant mean prediction over the background rows."""
    if background.size < 1:
        raise EngineError("empty background")
    preds = _checked_predict(model, background.matrix, "the background rows")
    value = float(_compensated_mean_rows(preds.reshape(1, -1))[0])
    return PdResult(
        subset=(),
        columns=(),
        kind=NULL,
        points=None,
        values=value,
        background_size=background.size,
        seed=background.seed,
    )


def pd_grid(model, background: BackgroundSet, subset, grid_size: int = 50, *,
            threads: int = 1, batch_rows: int = DEFAULT_BATCH_ROWS) -> PdResult:
    """PD on a plotting grid over one or two columns.

    Numeric columns are gridded with :func:`quantile_grid` over the parent
    table; categorical columns contribute one point per level, in level
    order. A 2-d grid is the Cartesian product, row-major in subset order.
    """
    from .tabular import quantile_grid

    table = background.table
    cols = _as_indices(subset, table)
    if len(cols) not in (1, 2):
        raise EngineError(f"plotting grids support 1 or 2 columns, got {len(cols)}")
    sizes = (grid_size,) * len(cols) if isinstance(grid_size, int) else tuple(grid_size)
    if len(sizes) != len(cols):
        raise EngineError("need one grid size per subset column")
    axes = []
    for j, g in zip(cols, sizes):
        if table.schema[j].role == CATEGORICAL:
            axes.append(np.arange(len(table.schema[j].levels), dtype=np.float64))
        else:
            axes.append(quantile_grid(table, j, g))
    if len(axes) == 1:
        points = axes[0].reshape(-1, 1)
    else:
        a, b = axes
        points = np.column_stack([np.repeat(a, b.size), np.tile(b, a.size)])
    return pd_at_points(model, background, cols, points,
                        threads=threads, batch_rows=batch_rows)
