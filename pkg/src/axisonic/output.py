"""Deterministic writers for CSV, JSON, gnuplot .dat and SVG line plots."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

FLOAT_FMT = "{:.17g}"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return FLOAT_FMT.format(float(v))


def write_csv(path, header: list[str], columns: list) -> Path:
    """Columns of equal length, written with round-trip float precision."""
    cols = [np.asarray(c).ravel() for c in columns]
    n = {c.size for c in cols}
    if len(n) > 1:
        raise ValueError("columns differ in length")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def to_jsonable(obj):
    """Plain Python containers with non-finite floats mapped to None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # enums
        return obj.value
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_dat(path, header: list[str], columns: list) -> Path:
    """Whitespace-separated columns with a '#' header line, as gnuplot expects."""
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    path = Path(path)
    lines = ["# " + " ".join(header)]
    for row in zip(*cols):
        lines.append(" ".join(FLOAT_FMT.format(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _range(values: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo <= 1e-12 * max(abs(lo), abs(hi), 1.0):
        pad = max(abs(lo), 1.0) * 0.5
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def svg_line_plot(x, y, title: str, xlabel: str, ylabel: str, width: int = 480, height: int = 320) -> str:
    """A self-contained SVG with one polyline, axes and tick labels at the range ends."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size == 0 or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("need equal-length finite data")
    left, right, top, bottom = 60, 20, 30, 45
    x0, x1 = _range(x)
    y0, y1 = _range(y)
    px = left + (x - x0) / (x1 - x0) * (width - left - right)
    py = height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom)
    points = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py))
    ax_y = height - bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_escape(title)}</text>',
        f'<line x1="{left}" y1="{ax_y}" x2="{width - right}" y2="{ax_y}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{ax_y}" stroke="black"/>',
        f'<text x="{left}" y="{ax_y + 15}" font-size="10">{x0:.4g}</text>',
        f'<text x="{width - right}" y="{ax_y + 15}" text-anchor="end" font-size="10">{x1:.4g}</text>',
        f'<text x="{left - 4}" y="{ax_y}" text-anchor="end" font-size="10">{y0:.4g}</text>',
        f'<text x="{left - 4}" y="{top + 8}" text-anchor="end" font-size="10">{y1:.4g}</text>',
        f'<text x="{(left + width - right) / 2:.1f}" y="{height - 8}" text-anchor="middle" '
        f'font-size="11">{_escape(xlabel)}</text>',
        f'<text x="14" y="{(top + ax_y) / 2:.1f}" font-size="11" '
        f'transform="rotate(-90 14 {(top + ax_y) / 2:.1f})" text-anchor="middle">{_escape(ylabel)}</text>',
        f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{points}"/>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_plot_data(outdir, curves: dict[str, tuple], formats=("dat", "svg")) -> list[Path]:
    """Write each curve name -> (x, y, title, xlabel, ylabel) as .dat and/or .svg."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(curves):
        x, y, title, xlabel, ylabel = curves[name]
        if "dat" in formats:
            written.append(write_dat(outdir / f"{name}.dat", [xlabel, ylabel], [x, y]))
        if "svg" in formats:
            path = outdir / f"{name}.svg"
            path.write_text(svg_line_plot(x, y, title, xlabel, ylabel), encoding="utf-8")
            written.append(path)
    return written
