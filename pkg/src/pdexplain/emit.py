"""SVG renderers for the diagnostic plots, with CSV data sidecars.

Every renderer is a pure function of its inputs and returns a :class:`Plot`
holding the SVG document plus the exact data series it was drawn from; the
sidecar is written next to the SVG as ``<name>.data.csv`` and reproduces
engine outputs bit for bit (floats are serialized with ``repr``). Axis
ranges are padded 5% and ticks sit on a 1-2-5 ladder, so documents are
stable enough for golden-file comparison.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmitError
from .pdp import AT_POINTS, PdResult

COLOR_LOW = "#2166AC"    # diverging map: blue end (low / negative)
COLOR_HIGH = "#B2182B"   # red end (high / positive)
COLOR_MID = "#FFFFFF"    # neutral center
POINT_COLOR = "#4477AA"
CURVE_COLOR = "#B2182B"

PDP_OVERLAY = "pdp_overlay"
MATCH_PLOT = "match_plot"
PD2D_SCATTER = "pd2d_scatter"
RESIDUAL_SCATTER = "residual_scatter"
MATRIX = "matrix"


@dataclass(frozen=True)
class PlotSpec:
    """Geometry and styling shared by the renderers."""

    kind: str = ""
    width: int = 640
    height: int = 480
    point_radius: float = 3.0
    x_label: str | None = None
    y_label: str | None = None
    color_low: str = COLOR_LOW
    color_high: str = COLOR_HIGH

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("plot width and height must be positive")


@dataclass
class Plot:
    """A rendered SVG document plus the data it can be rebuilt from."""

    kind: str
    svg: str
    data_header: tuple[str, ...]
    data_rows: list[tuple]

    def write(self, svg_path, comment: str | None = None) -> Path:
        """Write ``<name>.svg`` and its ``<name>.data.csv`` sidecar."""
        svg_path = Path(svg_path)
        svg_path.write_text(self.svg, encoding="utf-8")
        sidecar = svg_path.with_suffix(".data.csv")
        with open(sidecar, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            writer.writerow(self.data_header)
            for row in self.data_rows:
                writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
        return sidecar


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _pad_range(values) -> tuple[float, float]:
    lo = float(min(values))
    hi = float(max(values))
    if hi == lo:
        return lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for f in (1.0, 2.0, 5.0, 10.0):
        if raw <= f * mag:
            step = f * mag
            break
    first = math.ceil(lo / step)
    out = []
    i = first
    while i * step <= hi + 1e-12 * step:
        out.append(i * step)
        i += 1
    return out


def _hex_to_rgb(color: str) -> tuple[int, int, int]:
    c = color.lstrip("#")
    return int(c[0:2], 16), int(c[2:4], 16), int(c[4:6], 16)


def _diverging(t: float, low: str, high: str) -> str:
    """Map t in [-1, 1] onto the diverging color scale, 0 at the white center."""
    t = max(-1.0, min(1.0, t))
    end = _hex_to_rgb(high if t >= 0 else low)
    mid = _hex_to_rgb(COLOR_MID)
    a = abs(t)
    rgb = tuple(round(m + (e - m) * a) for m, e in zip(mid, end))
    return "#{:02X}{:02X}{:02X}".format(*rgb)


def _color_values(values: np.ndarray, symmetric: bool) -> list[float]:
    """Scale raw values into [-1, 1] for the diverging map.

    Symmetric mode centers zero on white (residuals); otherwise the color
    spans the data range with white at the midpoint.
    """
    v = np.asarray(values, dtype=np.float64)
    if symmetric:
        vmax = float(np.max(np.abs(v))) if v.size else 0.0
        return [0.0] * v.size if vmax == 0.0 else list(v / vmax)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return [0.0] * v.size
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return list((v - center) / half)


class _Frame:
    """A plot area with data-to-pixel transforms and standard axes."""

    def __init__(self, x0, y0, w, h, x_range, y_range):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlo, self.xhi = x_range
        self.ylo, self.yhi = y_range

    def px(self, x: float) -> float:
        return self.x0 + (x - self.xlo) / (self.xhi - self.xlo) * self.w

    def py(self, y: float) -> float:
        return self.y0 + self.h - (y - self.ylo) / (self.yhi - self.ylo) * self.h

    def axes(self, x_label: str, y_label: str, tick_font: int = 11) -> list[str]:
        parts = [
            f'<rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.w)}" '
            f'height="{_fmt(self.h)}" fill="none" stroke="#333333" stroke-width="1"/>'
        ]
        for t in _ticks(self.xlo, self.xhi):
            x = self.px(t)
            parts.append(
                f'<line x1="{_fmt(x)}" y1="{_fmt(self.y0 + self.h)}" x2="{_fmt(x)}" '
                f'y2="{_fmt(self.y0 + self.h + 4)}" stroke="#333333" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{_fmt(x)}" y="{_fmt(self.y0 + self.h + 16)}" font-family="sans-serif" '
                f'font-size="{tick_font}" text-anchor="middle">{t:.10g}</text>'
            )
        for t in _ticks(self.ylo, self.yhi):
            y = self.py(t)
            parts.append(
                f'<line x1="{_fmt(self.x0 - 4)}" y1="{_fmt(y)}" x2="{_fmt(self.x0)}" '
                f'y2="{_fmt(y)}" stroke="#333333" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{_fmt(self.x0 - 6)}" y="{_fmt(y + 4)}" font-family="sans-serif" '
                f'font-size="{tick_font}" text-anchor="end">{t:.10g}</text>'
            )
        cx = self.x0 + self.w / 2
        cy = self.y0 + self.h / 2
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(self.y0 + self.h + 34)}" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle">{escape(x_label)}</text>'
        )
        parts.append(
            f'<text x="{_fmt(self.x0 - 40)}" y="{_fmt(cy)}" font-family="sans-serif" font-size="12" '
            f'text-anchor="middle" transform="rotate(-90 {_fmt(self.x0 - 40)} {_fmt(cy)})">'
            f'{escape(y_label)}</text>'
        )
        return parts


def _document(spec: PlotSpec, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _main_frame(spec: PlotSpec, x_range, y_range) -> _Frame:
    margin_l, margin_r, margin_t, margin_b = 56, 16, 16, 44
    return _Frame(margin_l, margin_t, spec.width - margin_l - margin_r,
                  spec.height - margin_t - margin_b, x_range, y_range)


def _circle(x: float, y: float, r: float, fill: str) -> str:
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{fill}" fill-opacity="0.75"/>'


def render_pdp_overlay(curve: PdResult, predictions, feature_values,
                       spec: PlotSpec | None = None) -> Plot:
    """Prediction scatter for one column with the PD curve drawn on top."""
    spec = replace(spec or PlotSpec(), kind=PDP_OVERLAY)
    if curve.kind != AT_POINTS or len(curve.columns) != 1:
        raise EmitError("overlay needs a 1-d PD curve evaluated at grid points")
    grid = np.asarray(curve.points, dtype=np.float64).reshape(-1)
    pd_vals = np.asarray(curve.values, dtype=np.float64).reshape(-1)
    if grid.size == 0:
        raise EmitError("empty PD curve")
    preds = np.asarray(predictions, dtype=np.float64).reshape(-1)
    fv = np.asarray(feature_values, dtype=np.float64).reshape(-1)
    if preds.size != fv.size:
        raise EmitError(f"length mismatch: {preds.size} predictions vs {fv.size} feature values")
    if preds.size == 0:
        raise EmitError("no observations to draw")

    name = curve.columns[0]
    frame = _main_frame(spec, _pad_range(np.concatenate([grid, fv])),
                        _pad_range(np.concatenate([pd_vals, preds])))
    body = frame.axes(spec.x_label or name, spec.y_label or "prediction")
    for x, y in zip(fv, preds):
        body.append(_circle(frame.px(x), frame.py(y), spec.point_radius, POINT_COLOR))
    pts = " ".join(f"{_fmt(frame.px(x))},{_fmt(frame.py(y))}" for x, y in zip(grid, pd_vals))
    body.append(
        f'<polyline points="{pts}" fill="none" stroke="{CURVE_COLOR}" '
        f'stroke-width="2" stroke-dasharray="5 3"/>'
    )
    rows = [("observation", float(x), float(y)) for x, y in zip(fv, preds)]
    rows += [("pd", float(x), float(y)) for x, y in zip(grid, pd_vals)]
    return Plot(PDP_OVERLAY, _document(spec, body), ("series", name, "value"), rows)


def render_match_plot(predictions, pd_values, spec: PlotSpec | None = None) -> Plot:
    """Scatter of (prediction, PD value) against the identity diagonal."""
    spec = replace(spec or PlotSpec(), kind=MATCH_PLOT)
    preds = np.asarray(predictions, dtype=np.float64).reshape(-1)
    pd_vals = np.asarray(pd_values, dtype=np.float64).reshape(-1)
    if preds.size != pd_vals.size:
        raise EmitError(f"length mismatch: {preds.size} predictions vs {pd_vals.size} pd values")
    if preds.size == 0:
        raise EmitError("no points to draw")

    # equal scales on both axes so the diagonal means what it should
    rng = _pad_range(np.concatenate([preds, pd_vals]))
    frame = _main_frame(spec, rng, rng)
    body = frame.axes(spec.x_label or "prediction", spec.y_label or "partial dependence")
    body.append(
        f'<line x1="{_fmt(frame.px(rng[0]))}" y1="{_fmt(frame.py(rng[0]))}" '
        f'x2="{_fmt(frame.px(rng[1]))}" y2="{_fmt(frame.py(rng[1]))}" '
        f'stroke="#888888" stroke-width="1" stroke-dasharray="4 3"/>'
    )
    for x, y in zip(preds, pd_vals):
        body.append(_circle(frame.px(x), frame.py(y), spec.point_radius, POINT_COLOR))
    rows = [(float(x), float(y)) for x, y in zip(preds, pd_vals)]
    return Plot(MATCH_PLOT, _document(spec, body), ("prediction", "pd"), rows)


def render_pd2d(surface: PdResult, mode: str = "pd", predictions=None,
                spec: PlotSpec | None = None) -> Plot:
    """Observations in two subset columns, colored by PD or by PD minus
    prediction on the diverging map (residual colors centered at zero)."""
    if mode not in ("pd", "residual"):
        raise EmitError(f"unknown pd2d mode {mode!r}")
    kind = PD2D_SCATTER if mode == "pd" else RESIDUAL_SCATTER
    spec = replace(spec or PlotSpec(), kind=kind)
    if surface.points is None or len(surface.columns) != 2:
        raise EmitError("pd2d needs a PD result over exactly 2 columns")
    pts = np.asarray(surface.points, dtype=np.float64)
    pd_vals = np.asarray(surface.values, dtype=np.float64).reshape(-1)
    if pts.shape[0] == 0:
        raise EmitError("no points to draw")
    if mode == "residual":
        if predictions is None:
            raise EmitError("residual mode needs the model predictions")
        preds = np.asarray(predictions, dtype=np.float64).reshape(-1)
        if preds.size != pd_vals.size:
            raise EmitError(f"length mismatch: {preds.size} predictions vs {pd_vals.size} pd values")
        color_by = pd_vals - preds
    else:
        color_by = pd_vals

    scaled = _color_values(color_by, symmetric=(mode == "residual"))
    frame = _main_frame(spec, _pad_range(pts[:, 0]), _pad_range(pts[:, 1]))
    body = frame.axes(spec.x_label or surface.columns[0], spec.y_label or surface.columns[1])
    for (x, y), t in zip(pts, scaled):
        body.append(_circle(frame.px(x), frame.py(y), spec.point_radius,
                            _diverging(t, spec.color_low, spec.color_high)))
    header: tuple[str, ...]
    if mode == "residual":
        header = (surface.columns[0], surface.columns[1], "pd", "prediction", "residual")
        rows = [
            (float(p[0]), float(p[1]), float(v), float(f), float(v - f))
            for p, v, f in zip(pts, pd_vals, preds)
        ]
    else:
        header = (surface.columns[0], surface.columns[1], "pd")
        rows = [(float(p[0]), float(p[1]), float(v)) for p, v in zip(pts, pd_vals)]
    return Plot(kind, _document(spec, body), header, rows)


def render_matrix(surfaces, curves, spec: PlotSpec | None = None) -> Plot:
    """Scatterplot matrix of pairwise 2-d PDs, 1-d PD curves on the diagonal.

    ``curves`` fixes the column order (one 1-d grid result per column);
    ``surfaces`` must contain one result per unordered column pair. Cell
    (i, j) plots column j on x and column i on y, colored by PD value on a
    scale shared across all panels.
    """
    spec = replace(spec or PlotSpec(), kind=MATRIX)
    curves = list(curves)
    if len(curves) < 2:
        raise EmitError("a PD matrix needs at least 2 columns")
    names = []
    for c in curves:
        if len(c.columns) != 1 or c.points is None:
            raise EmitError("diagonal curves must be 1-d PD results")
        names.append(c.columns[0])
    if len(set(names)) != len(names):
        raise EmitError("duplicate columns in diagonal curves")

    by_pair = {}
    for s in surfaces:
        if len(s.columns) != 2 or s.points is None:
            raise EmitError("matrix panels must be PD results over exactly 2 columns")
        by_pair[frozenset(s.columns)] = s
    missing = [
        (a, b) for i, a in enumerate(names) for b in names[i + 1:]
        if frozenset((a, b)) not in by_pair
    ]
    if missing:
        raise EmitError(f"missing pairwise surface for columns {missing[0][0]!r} and {missing[0][1]!r}")

    all_vals = np.concatenate([np.asarray(by_pair[frozenset(p)].values, dtype=np.float64).reshape(-1)
                               for p in ({a, b} for i, a in enumerate(names) for b in names[i + 1:])])
    vlo, vhi = float(all_vals.min()), float(all_vals.max())

    def shade(v: float) -> str:
        if vhi == vlo:
            return _diverging(0.0, spec.color_low, spec.color_high)
        t = (v - 0.5 * (vlo + vhi)) / (0.5 * (vhi - vlo))
        return _diverging(t, spec.color_low, spec.color_high)

    k = len(names)
    margin = 24
    gap = 8
    cell = (min(spec.width, spec.height) - 2 * margin - (k - 1) * gap) / k
    if cell < 24:
        raise EmitError(f"{k} columns do not fit a {spec.width}x{spec.height} matrix")
    body: list[str] = []
    rows: list[tuple] = []
    radius = max(1.0, spec.point_radius - 1.0)
    for i, row_name in enumerate(names):
        for j, col_name in enumerate(names):
            cx = margin + j * (cell + gap)
            cy = margin + i * (cell + gap)
            body.append(
                f'<rect x="{_fmt(cx)}" y="{_fmt(cy)}" width="{_fmt(cell)}" height="{_fmt(cell)}" '
                f'fill="none" stroke="#333333" stroke-width="1"/>'
            )
            if i == j:
                curve = curves[i]
                gx = np.asarray(curve.points, dtype=np.float64).reshape(-1)
                gy = np.asarray(curve.values, dtype=np.float64).reshape(-1)
                frame = _Frame(cx, cy, cell, cell, _pad_range(gx), _pad_range(gy))
                pts = " ".join(f"{_fmt(frame.px(x))},{_fmt(frame.py(y))}" for x, y in zip(gx, gy))
                body.append(
                    f'<polyline points="{pts}" fill="none" stroke="{CURVE_COLOR}" stroke-width="1.5"/>'
                )
                body.append(
                    f'<text x="{_fmt(cx + cell / 2)}" y="{_fmt(cy + 13)}" font-family="sans-serif" '
                    f'font-size="11" text-anchor="middle">{escape(row_name)}</text>'
                )
                rows += [(i, j, "pd_curve", float(x), float(y), float(y)) for x, y in zip(gx, gy)]
            else:
                surf = by_pair[frozenset((row_name, col_name))]
                pts2 = np.asarray(surf.points, dtype=np.float64)
                vals = np.asarray(surf.values, dtype=np.float64).reshape(-1)
                xs = pts2[:, surf.columns.index(col_name)]
                ys = pts2[:, surf.columns.index(row_name)]
                frame = _Frame(cx, cy, cell, cell, _pad_range(xs), _pad_range(ys))
                for x, y, v in zip(xs, ys, vals):
                    body.append(_circle(frame.px(x), frame.py(y), radius, shade(v)))
                rows += [(i, j, "pd2d", float(x), float(y), float(v)) for x, y, v in zip(xs, ys, vals)]
    return Plot(MATRIX, _document(spec, body),
                ("panel_row", "panel_col", "series", "x", "y", "pd"), rows)
