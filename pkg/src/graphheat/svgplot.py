"""Self-contained deterministic SVG line plots.

The emitter maps data through fixed-precision decimal formatting into a fixed
geometry, so identical input always yields byte-identical output. No external
assets, fonts or stylesheets are referenced; the file is plain shapes and
text, parseable by any conformant XML parser.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH = 720
HEIGHT = 480
MARGIN_LEFT = 78
MARGIN_RIGHT = 18
MARGIN_TOP = 32
MARGIN_BOTTOM = 58

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)


def _px(value: float) -> str:
    return f"{value:.3f}"


def _nice_step(span: float) -> float:
    """Largest step from {1, 2, 2.5, 5} x 10^k giving at least 4 intervals."""
    raw = span / 4.0
    power = math.floor(math.log10(raw))
    base = raw / 10.0**power
    for candidate in (5.0, 2.5, 2.0, 1.0):
        if candidate <= base:
            return candidate * 10.0**power
    return 0.5 * 10.0**power


def _linear_ticks(lo: float, hi: float) -> list[float]:
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(value) < 1e-12 * step else value)
        value += step
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    # lo/hi are log10 values; ticks at whole decades
    return [float(m) for m in range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1)]


def _tick_label(value: float, log: bool) -> str:
    if log:
        return f"{10.0 ** value:g}"
    return f"{value:g}"


def emit_svg_lineplot(
    series,
    xlabel: str,
    ylabel: str,
    path,
    logx: bool = False,
    logy: bool = False,
    title: str = "",
) -> None:
    """Write a line plot of named series to ``path`` as a standalone SVG.

    Parameters
    ----------
    series : sequence of (name, x, y)
        Nonempty; each x and y must be equally long, nonempty and finite.
        With a log flag set, the corresponding values must be positive.
    logx, logy : bool
        Log-scale the axis (decade ticks).
    """
    if not series:
        raise ValueError("at least one series is required")
    cleaned = []
    for entry in series:
        name, xs, ys = entry
        xs = [float(v) for v in xs]
        ys = [float(v) for v in ys]
        if not xs or len(xs) != len(ys):
            raise ValueError(f"series {name!r} needs equal-length nonempty x and y")
        if not all(math.isfinite(v) for v in xs + ys):
            raise ValueError(f"series {name!r} contains non-finite values")
        if logx and min(xs) <= 0.0:
            raise ValueError(f"series {name!r} has nonpositive x values on a log axis")
        if logy and min(ys) <= 0.0:
            raise ValueError(f"series {name!r} has nonpositive y values on a log axis")
        if logx:
            xs = [math.log10(v) for v in xs]
        if logy:
            ys = [math.log10(v) for v in ys]
        cleaned.append((str(name), xs, ys))

    def boundaries(values):
        lo, hi = min(values), max(values)
        if lo == hi:
            pad = 0.5 if lo == 0.0 else abs(lo) * 0.05
            return lo - pad, hi + pad
        pad = (hi - lo) * 0.04
        return lo - pad, hi + pad

    x_lo, x_hi = boundaries([v for _, xs, _ in cleaned for v in xs])
    y_lo, y_hi = boundaries([v for _, _, ys in cleaned for v in ys])
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def to_px(x, y):
        px = MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w
        py = HEIGHT - MARGIN_BOTTOM - (y - y_lo) / (y_hi - y_lo) * plot_h
        return px, py

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>',
    ]
    text = (
        '<text x="{x}" y="{y}" font-family="sans-serif" font-size="{size}" '
        'fill="#222222"{extra}>{body}</text>'
    )

    x_ticks = _log_ticks(x_lo, x_hi) if logx else _linear_ticks(x_lo, x_hi)
    for value in x_ticks:
        px, _ = to_px(value, y_lo)
        parts.append(
            f'<line x1="{_px(px)}" y1="{HEIGHT - MARGIN_BOTTOM}" x2="{_px(px)}" '
            f'y2="{HEIGHT - MARGIN_BOTTOM + 5}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            text.format(
                x=_px(px),
                y=HEIGHT - MARGIN_BOTTOM + 18,
                size=11,
                extra=' text-anchor="middle"',
                body=escape(_tick_label(value, logx)),
            )
        )
    y_ticks = _log_ticks(y_lo, y_hi) if logy else _linear_ticks(y_lo, y_hi)
    for value in y_ticks:
        _, py = to_px(x_lo, value)
        parts.append(
            f'<line x1="{MARGIN_LEFT - 5}" y1="{_px(py)}" x2="{MARGIN_LEFT}" '
            f'y2="{_px(py)}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            text.format(
                x=MARGIN_LEFT - 8,
                y=_px(py + 4),
                size=11,
                extra=' text-anchor="end"',
                body=escape(_tick_label(value, logy)),
            )
        )

    for idx, (name, xs, ys) in enumerate(cleaned):
        color = PALETTE[idx % len(PALETTE)]
        pts = [to_px(x, y) for x, y in zip(xs, ys)]
        if len(pts) == 1:
            parts.append(
                f'<circle cx="{_px(pts[0][0])}" cy="{_px(pts[0][1])}" r="3" fill="{color}"/>'
            )
        else:
            coords = " ".join(f"{_px(px)},{_px(py)}" for px, py in pts)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>'
            )
        legend_y = MARGIN_TOP + 16 + 16 * idx
        swatch_x = WIDTH - MARGIN_RIGHT - 150
        parts.append(
            f'<line x1="{swatch_x}" y1="{legend_y - 4}" x2="{swatch_x + 22}" '
            f'y2="{legend_y - 4}" stroke="{color}" stroke-width="2.5"/>'
        )
        parts.append(
            text.format(
                x=swatch_x + 28, y=legend_y, size=11, extra="", body=escape(name)
            )
        )

    parts.append(
        text.format(
            x=MARGIN_LEFT + plot_w // 2,
            y=HEIGHT - 14,
            size=13,
            extra=' text-anchor="middle"',
            body=escape(xlabel),
        )
    )
    parts.append(
        f'<text x="20" y="{MARGIN_TOP + plot_h // 2}" font-family="sans-serif" '
        f'font-size="13" fill="#222222" text-anchor="middle" '
        f'transform="rotate(-90 20 {MARGIN_TOP + plot_h // 2})">{escape(ylabel)}</text>'
    )
    if title:
        parts.append(
            text.format(
                x=WIDTH // 2,
                y=20,
                size=14,
                extra=' text-anchor="middle"',
                body=escape(title),
            )
        )
    parts.append("</svg>")
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(parts) + "\n")
