"""CSV and SVG result files.

Both formats carry the resolved configuration of the sweep: the CSV as a
block of ``#`` comment lines ahead of the header (optional), the SVG as an
XML comment.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

from ..errors import IoError, PreconditionError
from .config import resolved

CSV_HEADER = ["axis", "value", "policy", "eta_mean", "eta_ci95", "local", "unicast",
              "macro", "pushes", "fetches", "wasted", "reps", "seed_base"]
_FLOAT_COLUMNS = ["eta_mean", "eta_ci95", "local", "unicast", "macro", "pushes",
                  "fetches", "wasted"]


def config_echo(result) -> dict:
    spec = result.spec
    return {"name": spec.name, "axis": spec.axis, "values": list(spec.values),
            "policies": list(spec.policies), "replications": spec.replications,
            "seed_base": spec.seed_base, "base": resolved(spec.base)}


def _write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(path, exc) from exc
    return path


def format_csv(result, echo_config: bool = True) -> str:
    if not result.cells:
        raise PreconditionError("empty sweep result")
    buf = io.StringIO()
    if echo_config:
        for line in json.dumps(config_echo(result), indent=1, sort_keys=True).splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    spec = result.spec
    for c in result.cells:
        # repr round-trips floats exactly and never uses locale settings
        writer.writerow([spec.axis, repr(c.value), c.policy]
                        + [repr(float(getattr(c, col))) for col in _FLOAT_COLUMNS]
                        + [c.reps, spec.seed_base])
    return buf.getvalue()


def emit_csv(result, path, echo_config: bool = True) -> Path:
    """Write one row per sweep cell.

    With ``echo_config=False`` the file is exactly the header plus rows.
    """
    return _write(path, format_csv(result, echo_config))


def read_csv(path) -> list[dict]:
    """Rows of an emitted CSV, with numeric columns parsed."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(path, exc) from exc
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    rows = []
    for row in csv.DictReader(lines):
        for col in _FLOAT_COLUMNS + ["value"]:
            row[col] = float(row[col])
        row["reps"] = int(row["reps"])
        row["seed_base"] = int(row["seed_base"])
        rows.append(row)
    return rows


# -- SVG -----------------------------------------------------------------------

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 160, 30, 60
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def format_plot(result) -> str:
    spec = result.spec
    try:
        xs = [float(v) for v in spec.values]
    except (TypeError, ValueError):
        raise PreconditionError("plot needs numeric axis values") from None
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise PreconditionError(f"axis values must be strictly increasing, got {spec.values}")

    etas = [c.eta_mean for c in result.cells if not math.isnan(c.eta_mean)]
    y_hi = max([0.1] + [e for e in etas])
    y_hi = math.ceil(y_hi * 10) / 10
    x_lo, x_hi = xs[0], xs[-1]
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (pw / 2 if x_hi == x_lo else (x - x_lo) / (x_hi - x_lo) * pw)

    def sy(y):
        return TOP + ph - y / y_hi * ph

    comment = json.dumps(config_echo(result), sort_keys=True).replace("--", "- -")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f"<!-- config: {comment} -->",
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>']
    for x in _ticks(x_lo, x_hi):
        out.append(f'<text x="{sx(x):.1f}" y="{TOP + ph + 18}" font-size="11" '
                   f'text-anchor="middle">{x:g}</text>')
    for y in _ticks(0.0, y_hi):
        out.append(f'<text x="{LEFT - 8}" y="{sy(y) + 4:.1f}" font-size="11" '
                   f'text-anchor="end">{y:.2f}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 15}" font-size="13" '
               f'text-anchor="middle">{escape(spec.axis)}</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2})">η (share of requests sent to macro BS)</text>')

    for i, policy in enumerate(spec.policies):
        color = COLORS[i % len(COLORS)]
        pts = [(sx(float(c.value)), sy(c.eta_mean)) for c in result.series(policy)
               if not math.isnan(c.eta_mean)]
        if len(pts) == 1:
            out.append(f'<circle cx="{pts[0][0]:.2f}" cy="{pts[0][1]:.2f}" r="4" fill="{color}"/>')
        elif pts:
            coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = TOP + 20 * i + 10
        out.append(f'<line x1="{LEFT + pw + 15}" y1="{ly}" x2="{LEFT + pw + 40}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw + 45}" y="{ly + 4}" font-size="12">{escape(policy)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(result, path) -> Path:
    """Write an SVG line plot of η against the sweep axis, one line per policy."""
    return _write(path, format_plot(result))
