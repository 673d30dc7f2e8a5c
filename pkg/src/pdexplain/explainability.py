"""Explainability of partial dependence: ASE, the upsilon ratio, ranked
tables, and greedy forward selection of the visualized column subset.

All averages divide by n, matching the plain empirical estimators, and
upsilon is never clamped: negative values are meaningful (the PD function
tracks the model worse than its constant mean does).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ArgError, DegenerateModelError
from .pdp import BackgroundSet, _as_indices, _checked_predict, pd_at_observations


@dataclass
class ExplainabilityReport:
    """ASE of a subset's PD, the null ASE, and the resulting upsilon."""

    subset: tuple[int, ...]
    columns: tuple[str, ...]
    ase_s: float
    ase_null: float
    upsilon: float
    background_size: int
    seed: int

    def to_doc(self) -> dict:
        return {
            "subset": list(self.columns),
            "ase_s": self.ase_s,
            "ase_null": self.ase_null,
            "upsilon": self.upsilon,
            "background_size": self.background_size,
            "seed": self.seed,
        }


@dataclass
class SelectionStep:
    step: int
    column: str
    column_index: int
    upsilon: float


@dataclass
class SelectionTrace:
    """Greedy inclusion order with the upsilon reached after each step."""

    steps: list[SelectionStep]
    background_size: int
    seed: int

    @property
    def subset(self) -> tuple[int, ...]:
        return tuple(s.column_index for s in self.steps)

    def to_doc(self) -> dict:
        return {
            "steps": [
                {"step": s.step, "variable": s.column, "upsilon": s.upsilon}
                for s in self.steps
            ],
            "background_size": self.background_size,
            "seed": self.seed,
        }

    def write_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["step", "variable", "upsilon"])
            for s in self.steps:
                writer.writerow([s.step, s.column, repr(s.upsilon)])


def ase(predictions, pd_values) -> float:
    """Mean squared gap between model predictions and PD values (divisor n)."""
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    q = np.asarray(pd_values, dtype=np.float64).reshape(-1)
    if p.size != q.size:
        raise ArgError(f"length mismatch: {p.size} predictions vs {q.size} pd values")
    if p.size == 0:
        raise ArgError("need at least one value")
    return float(np.mean((p - q) ** 2))


def ase_null(predictions) -> float:
    """Mean squared gap to the constant mean prediction (divisor n)."""
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ArgError("need at least one value")
    return float(np.mean((p - np.mean(p)) ** 2))


def _report(model, background, cols, predictions, null_ase, threads, batch_rows=None):
    kwargs = {} if batch_rows is None else {"batch_rows": batch_rows}
    pd_res = pd_at_observations(model, background, cols, threads=threads, **kwargs)
    gap = ase(predictions, pd_res.values)
    upsilon = 1.0 if gap == 0.0 else 1.0 - gap / null_ase
    return ExplainabilityReport(
        subset=tuple(cols),
        columns=pd_res.columns,
        ase_s=gap,
        ase_null=null_ase,
        upsilon=upsilon,
        background_size=background.size,
        seed=background.seed,
    )


def _predictions_and_null(model, background):
    predictions = _checked_predict(model, background.table.data, "the full observation table")
    null_ase = ase_null(predictions)
    if null_ase == 0.0:
        raise DegenerateModelError(
            "upsilon is undefined: the model makes constant predictions"
        )
    return predictions, null_ase


def upsilon(model, background: BackgroundSet, subset, *, threads: int = 1) -> ExplainabilityReport:
    """How much of the model a subset's PD explains: 1 - ASE(PD_s)/ASE(PD_null).

    1 means the PD function reproduces the predictions exactly (always the
    case for the full column set); values near or below 0 mean it explains
    essentially nothing.
    """
    table = background.table
    cols = _as_indices(subset, table)
    predictions, null_ase = _predictions_and_null(model, background)
    return _report(model, background, cols, predictions, null_ase, threads)


def upsilon_table(model, background: BackgroundSet, subsets=None, *,
                  threads: int = 1) -> list[ExplainabilityReport]:
    """One report per subset (default: every single column), sorted by
    upsilon descending; ties broken by the subset's first column index.
    """
    table = background.table
    if subsets is None:
        subsets = [(j,) for j in range(table.n_columns)]
    col_sets = [_as_indices(s, table) for s in subsets]
    predictions, null_ase = _predictions_and_null(model, background)
    reports = [
        _report(model, background, cols, predictions, null_ase, threads)
        for cols in col_sets
    ]
    reports.sort(key=lambda r: (-r.upsilon, r.subset[0] if r.subset else -1))
    return reports


def forward_select(model, background: BackgroundSet, max_steps: int | None = None,
                   min_gain: float = 0.0, *, threads: int = 1) -> SelectionTrace:
    """Greedy forward selection of the subset that maximizes upsilon.

    Starts from the empty subset (upsilon 0) and at every step re-evaluates
    each remaining column joined to the current subset, adding the argmax
    (ties to the lowest column index). Stops at ``max_steps``, when every
    column is included, or when the best improvement falls below
    ``min_gain``.
    """
    if min_gain < 0:
        raise ArgError("min_gain must be nonnegative")
    table = background.table
    predictions, null_ase = _predictions_and_null(model, background)
    remaining = list(range(table.n_columns))
    selected: list[int] = []
    current = 0.0
    steps: list[SelectionStep] = []
    limit = table.n_columns if max_steps is None else min(max_steps, table.n_columns)
    while remaining and len(steps) < limit:
        best_col = None
        best_ups = -np.inf
        for j in remaining:
            rep = _report(model, background, (*selected, j), predictions, null_ase, threads)
            if rep.upsilon > best_ups:
                best_ups = rep.upsilon
                best_col = j
        if best_ups - current < min_gain:
            break
        selected.append(best_col)
        remaining.remove(best_col)
        current = best_ups
        steps.append(SelectionStep(
            step=len(steps) + 1,
            column=table.schema[best_col].name,
            column_index=best_col,
            upsilon=best_ups,
        ))
    return SelectionTrace(steps=steps, background_size=background.size, seed=background.seed)


def write_reports_csv(reports, path, comment: str | None = None) -> None:
    """Table-1 style CSV: subset, ase_s, ase_null, upsilon."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["subset", "ase_s", "ase_null", "upsilon"])
        for r in reports:
            writer.writerow(["+".join(r.columns), repr(r.ase_s), repr(r.ase_null), repr(r.upsilon)])
