"""Deterministic CSV/JSON artifacts and plain SVG plots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable
from xml.sax.saxutils import escape

import numpy as np

from ..growth import GrowthError, GrowthFunction, extend, zygmund_transform
from .experiments import ExperimentReport

WIDTH, HEIGHT = 640, 420
MARGIN = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(data: dict, path: Path) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def write_csv(rows: list[dict[str, Any]], path: Path) -> None:
    columns: list[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k, "")) for k in columns})


def _fmt(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_artifacts(report: ExperimentReport, outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = [outdir / "report.json", outdir / "rows.csv"]
    write_json(report.to_dict(), written[0])
    write_csv(report.rows, written[1])
    for name, table in report.tables.items():
        if table:
            path = outdir / f"{name}.csv"
            write_csv(table, path)
            written.append(path)
    written.extend(write_plots(report, outdir))
    return written


def load_report(path: Path) -> ExperimentReport:
    if path.is_dir():
        path = path / "report.json"
    return ExperimentReport.from_dict(json.loads(path.read_text()))


PLOT_KINDS = ("convergence", "modulus_fit", "field_heatmap")


class PlotError(ValueError):
    pass


def write_plots(report: ExperimentReport, outdir: Path, kinds: Iterable[str] | None = None) -> list[Path]:
    """SVG plots for the requested kinds; all available kinds when None."""
    if not report.rows:
        raise PlotError("report has no rows to plot")
    available = {}
    conv = report.series.get("convergence")
    if conv:
        available["convergence"] = lambda: convergence_svg(report.rows, conv["x"], conv["y"], conv.get("group"), report.experiment)
    mod = report.series.get("modulus")
    if mod and report.tables.get(mod["table"]):
        g = GrowthFunction.from_dict(mod["omega"])
        available["modulus_fit"] = lambda: modulus_svg(report.tables[mod["table"]], g, report.experiment)
    heat = report.series.get("heatmap")
    if heat and report.tables.get(heat["table"]):
        available["field_heatmap"] = lambda: heatmap_svg(report.tables[heat["table"]], heat["value"], heat["band"], report.experiment)
    if kinds is None:
        kinds = [k for k in PLOT_KINDS if k in available]
    written = []
    for kind in kinds:
        if kind not in available:
            raise PlotError(f"{report.experiment} report has no data for a {kind} plot")
        path = outdir / f"{kind}.svg"
        path.write_text(available[kind]())
        written.append(path)
    return written


# SVG primitives


class _Axes:
    def __init__(self, xs: Iterable[float], ys: Iterable[float], logx: bool = True, logy: bool = True):
        self.logx, self.logy = logx, logy
        tx = [self._tx(x, logx) for x in xs]
        ty = [self._tx(y, logy) for y in ys]
        tx = [v for v in tx if math.isfinite(v)] or [0.0, 1.0]
        ty = [v for v in ty if math.isfinite(v)] or [0.0, 1.0]
        self.x0, self.x1 = _pad(min(tx), max(tx))
        self.y0, self.y1 = _pad(min(ty), max(ty))

    @staticmethod
    def _tx(v: float, log: bool) -> float:
        if log:
            return math.log10(v) if v > 0 else -math.inf
        return float(v)

    def px(self, x: float) -> float:
        return MARGIN + (self._tx(x, self.logx) - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * MARGIN)

    def py(self, y: float) -> float:
        return HEIGHT - MARGIN - (self._tx(y, self.logy) - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2 * MARGIN)

    def frame(self, title: str, xlabel: str, ylabel: str) -> list[str]:
        out = [
            f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="#333"/>',
            f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>',
        ]
        for lo, hi, horizontal in ((self.x0, self.x1, True), (self.y0, self.y1, False)):
            for tick in _ticks(lo, hi):
                label = f"1e{tick:g}" if (self.logx if horizontal else self.logy) else f"{tick:.3g}"
                if horizontal:
                    x = MARGIN + (tick - lo) / (hi - lo) * (WIDTH - 2 * MARGIN)
                    out.append(f'<text x="{x:.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" font-size="10">{label}</text>')
                else:
                    y = HEIGHT - MARGIN - (tick - lo) / (hi - lo) * (HEIGHT - 2 * MARGIN)
                    out.append(f'<text x="{MARGIN - 6}" y="{y + 3:.1f}" text-anchor="end" font-size="10">{label}</text>')
        return out


def _pad(lo: float, hi: float) -> tuple[float, float]:
    if hi - lo < 1e-12:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float) -> list[float]:
    step = 10 ** math.floor(math.log10((hi - lo) / 2))
    if (hi - lo) / step > 8:
        step *= 2
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step) + 1)]


def _polyline(ax: _Axes, xs, ys, color: str, dashed: bool = False, markers: bool = True) -> list[str]:
    pts = [(ax.px(x), ax.py(y)) for x, y in zip(xs, ys) if (x > 0 or not ax.logx) and (y > 0 or not ax.logy)]
    if not pts:
        return []
    path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
    dash = ' stroke-dasharray="6 4"' if dashed else ""
    out = [f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>']
    if markers:
        out.extend(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>' for x, y in pts)
    return out


def _legend(entries: list[tuple[str, str]]) -> list[str]:
    out = []
    for k, (label, color) in enumerate(entries):
        y = MARGIN + 14 + 16 * k
        out.append(f'<line x1="{WIDTH - MARGIN - 150}" y1="{y - 4}" x2="{WIDTH - MARGIN - 130}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 125}" y="{y}" font-size="11">{escape(label)}</text>')
    return out


def _svg(body: list[str]) -> str:
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">'
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>', *body, "</svg>"]) + "\n"


# plots


def convergence_svg(rows: list[dict], x: str, ys: list[str], group: str | None, title: str) -> str:
    groups = sorted({r[group] for r in rows}) if group else [None]
    series = []
    for gname in groups:
        sel = [r for r in rows if group is None or r[group] == gname]
        for y in ys:
            label = y if gname is None else f"{gname}: {y}"
            series.append((label, [float(r[x]) for r in sel], [float(r[y]) for r in sel]))
    ax = _Axes([v for s in series for v in s[1]], [v for s in series for v in s[2] if v > 0])
    body = ax.frame(f"{title}: convergence", x, "value")
    legend = []
    for k, (label, xs, yv) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        body.extend(_polyline(ax, xs, yv, color))
        legend.append((label, color))
    return _svg(body + _legend(legend))


def modulus_svg(table: list[dict], g: GrowthFunction, title: str) -> str:
    """Measured modulus per distance bin against best-fit c*omega and c*omega_Z."""
    t = np.array([math.sqrt(r["bin_lo"] * r["bin_hi"]) for r in table])
    m = np.array([r["max_delta"] for r in table])
    ge = extend(g)
    w = np.asarray(ge(t), dtype=float)
    c = float(np.max(m / w))
    curves = [(m, "measured", False), (c * w, f"{c:.3g} omega", True)]
    try:
        wz = np.asarray(zygmund_transform(ge, t), dtype=float)
        cz = float(np.max(m / wz))
        curves.append((cz * wz, f"{cz:.3g} omega_Z", True))
    except GrowthError:
        pass  # omega_Z undefined (non-Dini tail); overlay omitted
    ax = _Axes(t, np.concatenate([y[y > 0] for y, _, _ in curves]))
    body = ax.frame(f"{title}: modulus of continuity", "distance", "max |f(x) - f(y)|")
    legend = []
    for k, (y, label, dashed) in enumerate(curves):
        body += _polyline(ax, t, y, PALETTE[k], dashed=dashed, markers=not dashed)
        legend.append((label, PALETTE[k]))
    return _svg(body + _legend(legend))


def heatmap_svg(table: list[dict], value: str, band: str, title: str) -> str:
    """Probe positions colored by decade bands of ``band``, sized by ``value``."""
    xs = np.array([r["x"] for r in table])
    ys = np.array([r["y"] for r in table])
    v = np.log10(np.maximum([r[value] for r in table], 1e-300))
    b = np.floor(np.log10(np.maximum([r[band] for r in table], 1e-300))).astype(int)
    ax = _Axes(xs, ys, logx=False, logy=False)
    span = float(np.ptp(v)) or 1.0
    bands = sorted(set(b.tolist()))
    body = ax.frame(f"{title}: {value} by {band} decade", "x", "y")
    for x, y, lv, bb in zip(xs, ys, v, b):
        color = PALETTE[bands.index(bb) % len(PALETTE)]
        radius = 2 + 4 * (lv - v.min()) / span
        body.append(f'<circle cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" r="{radius:.2f}" fill="{color}"/>')
    legend = [(f"{band} in [1e{k}, 1e{k + 1})", PALETTE[i % len(PALETTE)]) for i, k in enumerate(bands)]
    return _svg(body + _legend(legend))
