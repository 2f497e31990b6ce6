"""Static SVG line charts for the figure CSVs written by ``analyze``.

Output is a pure function of the CSV text, so the same input always yields
byte-identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50

TITLES = {
    "fig2_max_fitness": "-log10(1 - max fitness)",
    "fig2_mean_fitness": "-log10(1 - mean fitness)",
    "fig3_replicated_individuals": "individual entities in replications",
    "fig4_max_size": "max multiset size",
    "fig4_mean_size": "mean multiset size",
    "fig6_individual_types": "cumulative individual types",
    "fig6_multiset_types": "cumulative multiset types",
}


class CsvFormatError(ValueError):
    pass


@dataclass
class FigureData:
    name: str
    t: list[float]
    runs: dict[str, list[float]]
    mean: list[float]


def _num(text: str, lineno: int) -> float:
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise CsvFormatError(f"line {lineno}: not a number: {text!r}") from None


def read_figure_csv(path: str | Path) -> FigureData:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError("empty file")
    header = rows[0]
    if len(header) < 2 or header[0] != "t" or header[-1] != "mean":
        raise CsvFormatError("header must start with 't' and end with 'mean'")
    run_names = header[1:-1]
    body = rows[1:]
    if not body:
        raise CsvFormatError("no data rows")
    t, mean = [], []
    runs = {name: [] for name in run_names}
    for lineno, row in enumerate(body, 2):
        if len(row) != len(header):
            raise CsvFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        tv = _num(row[0], lineno)
        if math.isnan(tv) or tv <= 0:
            raise CsvFormatError(f"line {lineno}: time must be positive")
        t.append(tv)
        for name, cell in zip(run_names, row[1:-1]):
            runs[name].append(_num(cell, lineno))
        mean.append(_num(row[-1], lineno))
    return FigureData(path.stem, t, runs, mean)


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _fmt_tick(v: float) -> str:
    return f"{v:g}"


def render_svg(data: FigureData, log_x: bool | None = None) -> str:
    """Thin grey per-run curves, a thick mean curve, axes and tick labels."""
    if log_x is None:
        log_x = not data.name.startswith("fig6")
    series = list(data.runs.values()) + [data.mean]
    values = [v for s in series for v in s if not math.isnan(v) and math.isfinite(v)]
    if not values:
        raise CsvFormatError("no finite data values")
    ylo, yhi = min(values), max(values)
    if ylo == yhi:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    tlo, thi = min(data.t), max(data.t)
    fx = math.log10 if log_x else (lambda v: v)
    xlo, xhi = fx(tlo), fx(thi)
    if xlo == xhi:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(tv: float) -> float:
        return LEFT + (fx(tv) - xlo) / (xhi - xlo) * pw

    def py(v: float) -> float:
        return TOP + (yhi - v) / (yhi - ylo) * ph

    def path(ys: list[float]) -> str:
        parts, pen = [], "M"
        for tv, v in zip(data.t, ys):
            if math.isnan(v) or not math.isfinite(v):
                pen = "M"
                continue
            parts.append(f"{pen}{px(tv):.2f},{py(v):.2f}")
            pen = "L"
        return " ".join(parts)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
        f'{TITLES.get(data.name, data.name)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if log_x:
        xticks = [10.0 ** k for k in range(math.ceil(xlo - 1e-12), math.floor(xhi + 1e-12) + 1)]
    else:
        xticks = _nice_ticks(tlo, thi)
    for tv in xticks:
        x = px(tv)
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{_fmt_tick(tv)}</text>')
    for v in _nice_ticks(ylo, yhi):
        y = py(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt_tick(v)}</text>')
    out.append(
        f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">'
        f't{" (log scale)" if log_x else ""}</text>'
    )
    for ys in data.runs.values():
        d = path(ys)
        if d:
            out.append(f'<path d="{d}" fill="none" stroke="#999999" stroke-width="0.6" stroke-opacity="0.6"/>')
    d = path(data.mean)
    if d:
        out.append(f'<path d="{d}" fill="none" stroke="#c0392b" stroke-width="2.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(csv_path: str | Path, out_dir: str | Path) -> Path:
    data = read_figure_csv(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / f"{data.name}.svg"
    target.write_text(render_svg(data), encoding="utf-8")
    return target
