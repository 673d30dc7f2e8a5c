"""Command line entry point: simulate, fit, explain, select, pdp.

Every run is reproducible from one root seed: it drives simulation noise,
bootstrap resampling, and background subsampling, and is recorded in the
header comment of every CSV output plus the run manifest. Options can also
come from a JSON config file (flags override file values).

Exit codes: 0 success, 2 usage error, 3 data/schema error, 4 degenerate
model, 5 external predictor failure.
"""

from __future__ import annotations

import argparse
import json
import platform
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .emit import (
    render_match_plot,
    render_matrix,
    render_pd2d,
    render_pdp_overlay,
)
from .errors import (
    ArgError,
    DegenerateModelError,
    EmitError,
    EngineError,
    FitError,
    IngestError,
    PersistError,
    PredictError,
    SchemaError,
)
from .explainability import forward_select, upsilon_table, write_reports_csv
from .forest import fit_forest
from .pdp import BackgroundSet, pd_at_observations, pd_grid
from .predictors import PipePredictor, fit_linear, load_model, save_model
from .tabular import ColumnSpec, DataTable, FeatureSubset, load_csv

MODEL_KINDS = ("linear", "forest")


class UsageError(Exception):
    pass


def _add_common(parser: argparse.ArgumentParser, *, needs_model: bool) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--data", help="input CSV with a header row")
    parser.add_argument("--target", help="response column name (excluded from features)")
    parser.add_argument("--seed", type=int, help="root seed for every random choice (default 0)")
    parser.add_argument("--out", help="output directory")
    if needs_model:
        parser.add_argument("--model", help="model kind (linear|forest) or path to a saved model")
        parser.add_argument("--pipe-cmd", help="external predictor command (stdin/stdout protocol)")
        parser.add_argument("--trees", type=int, help="forest size (default 500)")
        parser.add_argument("--mtry", type=int, help="columns tried per split (default max(1, p//3))")
        parser.add_argument("--max-depth", type=int, help="depth limit for forest trees")
        parser.add_argument("--min-leaf", type=int, help="minimum rows per leaf (default 5)")
        parser.add_argument("--background", type=int,
                            help="cap on background rows averaged over (default: all)")
        parser.add_argument("--threads", type=int, help="worker threads for PD evaluation (default 1)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdexplain",
        description="Partial dependence and explainability analysis for regression models.",
    )
    parser.add_argument("--version", action="version", version=f"pdexplain {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate", help="write a synthetic linear-response CSV")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--n", type=int, help="number of rows (required)")
    p.add_argument("--a", type=float, help="coefficient on x1 (default 5)")
    p.add_argument("--b", type=float, help="coefficient on x2 (default 3)")
    p.add_argument("--noise-sd", type=float, help="noise standard deviation (default 1)")
    p.add_argument("--seed", type=int, help="root seed (default 0)")
    p.add_argument("--out", help="output CSV path (required)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model and save it as JSON")
    _add_common(p, needs_model=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("explain", help="rank subsets by explainability")
    _add_common(p, needs_model=True)
    p.add_argument("--subset", action="append",
                   help="comma-separated column names; repeatable; default: every single column")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("select", help="greedy forward selection maximizing explainability")
    _add_common(p, needs_model=True)
    p.add_argument("--max-steps", type=int, help="stop after this many inclusions")
    p.add_argument("--min-gain", type=float, help="stop when the best improvement drops below this (default 0)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("pdp", help="render partial dependence plots")
    _add_common(p, needs_model=True)
    p.add_argument("--subset", action="append",
                   help="comma-separated column names; repeatable (one plot per subset)")
    p.add_argument("--plot", choices=("overlay", "match", "pd2d", "pd2d-residual", "matrix"),
                   help="plot kind (default overlay)")
    p.add_argument("--grid", type=int, help="grid size for numeric columns (default 50)")
    p.set_defaults(func=cmd_pdp)
    return parser


def _merge_config(args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config file {args.config} must hold a JSON object")
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise UsageError(f"config key {key!r} is not an option of this command")
        if getattr(args, dest) is None:
            setattr(args, dest, value)


def _get(args, name, default=None, required: bool = False):
    value = getattr(args, name, None)
    if value is None:
        if required:
            raise UsageError(f"missing required option --{name.replace('_', '-')}")
        return default
    return value


def _out_dir(args) -> Path:
    out = Path(_get(args, "out", required=True))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, config: dict) -> None:
    doc = {
        "command": command,
        "config": config,
        "versions": {
            "pdexplain": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    with open(out / "run-manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", name)


def _project(table: DataTable, columns: list[int]) -> DataTable:
    return DataTable([table.schema[j] for j in columns], table.data[:, columns])


def _features_for_model(table: DataTable, model) -> DataTable:
    """Project the loaded table onto the columns a saved model was fit on."""
    idx = []
    for spec in model.schema:
        try:
            j = table.column_index(spec.name)
        except KeyError:
            raise SchemaError(f"data is missing column {spec.name!r} required by the model") from None
        have = table.schema[j]
        if have.role != spec.role or have.levels != spec.levels:
            raise SchemaError(
                f"column {spec.name!r} does not match the model schema "
                f"(role/levels differ)"
            )
        idx.append(j)
    return _project(table, idx)


def _resolve_model(args, table: DataTable, seed: int):
    """Build (model, feature_table, closer) from exactly one model source."""
    kind = _get(args, "model")
    pipe = _get(args, "pipe_cmd")
    if (kind is None) == (pipe is None):
        raise UsageError("choose exactly one model source: --model or --pipe-cmd")

    def drop_target() -> DataTable:
        target = _get(args, "target")
        if target is None:
            return table
        t = table.column_index(target)
        return _project(table, [j for j in range(table.n_columns) if j != t])

    if pipe is not None:
        features = drop_target()
        model = PipePredictor(pipe, features.schema)
        return model, features, model.close

    if kind in MODEL_KINDS:
        target = _get(args, "target", required=True)
        if kind == "linear":
            model = fit_linear(table, target)
        else:
            model = fit_forest(
                table, target,
                b=_get(args, "trees", 500),
                m_try=_get(args, "mtry"),
                max_depth=_get(args, "max_depth"),
                min_leaf=_get(args, "min_leaf", 5),
                seed=seed,
            )
        return model, _features_for_model(table, model), None
    model = load_model(kind)
    return model, _features_for_model(table, model), None


def _subsets(args, table: DataTable) -> list[FeatureSubset] | None:
    raw = _get(args, "subset")
    if not raw:
        return None
    if isinstance(raw, str):
        raw = [raw]
    out = []
    for entry in raw:
        names = [n.strip() for n in str(entry).split(",") if n.strip()]
        if not names:
            raise UsageError(f"empty subset {entry!r}")
        try:
            out.append(FeatureSubset.from_names(table, names))
        except KeyError as exc:
            raise UsageError(str(exc)) from exc
    return out


def _config_doc(args, keys: list[str]) -> dict:
    return {k: getattr(args, k, None) for k in keys}


def cmd_simulate(args) -> None:
    n = int(_get(args, "n", required=True))
    if n < 1:
        raise UsageError("--n must be at least 1")
    a = float(_get(args, "a", 5.0))
    b = float(_get(args, "b", 3.0))
    noise_sd = float(_get(args, "noise_sd", 1.0))
    if noise_sd < 0:
        raise UsageError("--noise-sd must be nonnegative")
    seed = int(_get(args, "seed", 0))
    out = Path(_get(args, "out", required=True))

    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    eps = rng.standard_normal(n) * noise_sd
    y = a * x1 + b * x2 + eps
    table = DataTable(
        [ColumnSpec("x1", "numeric"), ColumnSpec("x2", "numeric"), ColumnSpec("y", "numeric")],
        np.column_stack([x1, x2, y]),
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    table.write_csv(out, comment=f"seed={seed}")
    print(f"wrote {n} rows to {out}")


def cmd_fit(args) -> None:
    kind = _get(args, "model", required=True)
    if kind not in MODEL_KINDS:
        raise UsageError(f"unknown model kind {kind!r}; fit supports {', '.join(MODEL_KINDS)}")
    seed = int(_get(args, "seed", 0))
    table = load_csv(_get(args, "data", required=True))
    model, _, _ = _resolve_model(args, table, seed)
    out = _out_dir(args)
    path = out / "model.json"
    save_model(model, path)
    _write_manifest(out, "fit", _config_doc(
        args, ["data", "target", "model", "trees", "mtry", "max_depth", "min_leaf", "seed"],
    ) | {"seed": seed})
    print(f"saved {kind} model to {path}")


def _prepare(args):
    seed = int(_get(args, "seed", 0))
    threads = int(_get(args, "threads", 1))
    table = load_csv(_get(args, "data", required=True))
    model, features, closer = _resolve_model(args, table, seed)
    background = BackgroundSet(features, m=_get(args, "background"), seed=seed)
    return seed, threads, features, model, background, closer


def cmd_explain(args) -> None:
    seed, threads, features, model, background, closer = _prepare(args)
    try:
        subsets = _subsets(args, features)
        reports = upsilon_table(model, background, subsets, threads=threads)
    finally:
        if closer:
            closer()
    out = _out_dir(args)
    write_reports_csv(reports, out / "upsilon.csv", comment=f"seed={seed}")
    _write_manifest(out, "explain", _config_doc(
        args, ["data", "target", "model", "pipe_cmd", "subset", "background", "threads"],
    ) | {"seed": seed})
    print(f"{'subset':<24} {'ase_s':>14} {'ase_null':>14} {'upsilon':>10}")
    for r in reports:
        print(f"{'+'.join(r.columns):<24} {r.ase_s:>14.6f} {r.ase_null:>14.6f} {r.upsilon:>10.4f}")


def cmd_select(args) -> None:
    seed, threads, features, model, background, closer = _prepare(args)
    try:
        trace = forward_select(
            model, background,
            max_steps=_get(args, "max_steps"),
            min_gain=float(_get(args, "min_gain", 0.0)),
            threads=threads,
        )
    finally:
        if closer:
            closer()
    out = _out_dir(args)
    trace.write_csv(out / "selection.csv", comment=f"seed={seed}")
    _write_manifest(out, "select", _config_doc(
        args, ["data", "target", "model", "pipe_cmd", "max_steps", "min_gain", "background", "threads"],
    ) | {"seed": seed})
    print(f"{'step':>4} {'variable':<24} {'upsilon':>10}")
    for s in trace.steps:
        print(f"{s.step:>4} {s.column:<24} {s.upsilon:>10.4f}")


def cmd_pdp(args) -> None:
    seed, threads, features, model, background, closer = _prepare(args)
    plot_kind = _get(args, "plot", "overlay")
    grid = int(_get(args, "grid", 50))
    subsets = _subsets(args, features)
    if not subsets:
        raise UsageError("pdp needs at least one --subset")
    out = _out_dir(args)
    comment = f"seed={seed}"
    written: list[Path] = []
    try:
        predictions = model.predict(features.data)
        if plot_kind == "matrix":
            columns: list[int] = []
            for s in subsets:
                columns += [j for j in s.indices if j not in columns]
            if len(columns) < 2:
                raise UsageError("matrix needs at least two distinct columns")
            curves = [pd_grid(model, background, (j,), grid, threads=threads) for j in columns]
            surfaces = [
                pd_at_observations(model, background, (a, b), threads=threads)
                for i, a in enumerate(columns) for b in columns[i + 1:]
            ]
            plot = render_matrix(surfaces, curves)
            path = out / "pdp_matrix.svg"
            plot.write(path, comment=comment)
            written.append(path)
        else:
            for subset in subsets:
                names = subset.names(features)
                tag = _slug("_".join(names))
                if plot_kind == "overlay":
                    if len(subset) != 1:
                        raise UsageError("overlay plots take exactly one column per subset")
                    curve = pd_grid(model, background, subset, grid, threads=threads)
                    plot = render_pdp_overlay(curve, predictions, features.column_values(names[0]))
                    path = out / f"pdp_overlay_{tag}.svg"
                elif plot_kind == "match":
                    surface = pd_at_observations(model, background, subset, threads=threads)
                    plot = render_match_plot(predictions, surface.values)
                    path = out / f"match_{tag}.svg"
                else:
                    surface = pd_at_observations(model, background, subset, threads=threads)
                    mode = "pd" if plot_kind == "pd2d" else "residual"
                    plot = render_pd2d(surface, mode=mode, predictions=predictions)
                    path = out / f"{plot_kind.replace('-', '_')}_{tag}.svg"
                plot.write(path, comment=comment)
                written.append(path)
    finally:
        if closer:
            closer()
    _write_manifest(out, "pdp", _config_doc(
        args, ["data", "target", "model", "pipe_cmd", "subset", "plot", "grid", "background", "threads"],
    ) | {"seed": seed})
    for path in written:
        print(f"wrote {path}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return 2
    try:
        _merge_config(args)
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EmitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IngestError, SchemaError, FitError, PersistError, EngineError, ArgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DegenerateModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except PredictError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
