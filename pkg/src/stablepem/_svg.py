"""Minimal standalone SVG boxplots for benchmark figures.

Hand rolled so report figures stay dependency free and byte stable:
identical inputs always render identical files.
"""

from __future__ import annotations

import numpy as np

_WIDTH = 640
_HEIGHT = 420
_MARGIN_L = 70
_MARGIN_R = 20
_MARGIN_T = 50
_MARGIN_B = 60


def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def _nice_ticks(lo: float, hi: float, target: int = 5) -> np.ndarray:
    span = hi - lo
    if span <= 0:
        return np.array([lo])
    raw = span / target
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = np.ceil(lo / step) * step
    ticks = np.arange(first, hi + 0.5 * step, step)
    return ticks[(ticks >= lo - 1e-12 * span) & (ticks <= hi + 1e-12 * span)]


def _box_stats(values) -> dict:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("boxplot group must not be empty")
    q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    lo = float(inside.min()) if inside.size else float(q1)
    hi = float(inside.max()) if inside.size else float(q3)
    outliers = v[(v < lo) | (v > hi)]
    return {
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "lo": lo,
        "hi": hi,
        "outliers": [float(o) for o in outliers],
    }


def render_boxplot(
    groups: dict,
    *,
    title: str,
    ylabel: str,
    reference: tuple[float, str] | None = None,
) -> str:
    """Render labeled boxplots side by side into an SVG document string.

    Parameters
    ----------
    groups : dict
        Ordered mapping of group label to a sequence of values.
    title, ylabel : str
        Figure title and vertical axis label.
    reference : (value, label), optional
        Horizontal dashed reference line.
    """
    if not groups:
        raise ValueError("at least one group is required")
    stats = {k: _box_stats(v) for k, v in groups.items()}
    all_vals = [x for v in groups.values() for x in np.asarray(v, dtype=float).ravel()]
    lo = min(all_vals)
    hi = max(all_vals)
    if reference is not None:
        lo = min(lo, reference[0])
        hi = max(hi, reference[0])
    pad = 0.08 * (hi - lo) if hi > lo else max(0.1 * abs(hi), 0.1)
    lo -= pad
    hi += pad

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(i: int, frac: float) -> float:
        slot = plot_w / len(groups)
        return _MARGIN_L + slot * (i + frac)

    def sy(v: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - (v - lo) / (hi - lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2}" y="28" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<text x="18" y="{_MARGIN_T + plot_h / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2})">{ylabel}</text>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black" stroke-width="1"/>',
    ]
    for tick in _nice_ticks(lo, hi):
        y = sy(tick)
        parts.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{_fmt(y)}" x2="{_MARGIN_L}" y2="{_fmt(y)}" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{_fmt(y)}" x2="{_MARGIN_L + plot_w}" y2="{_fmt(y)}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 9}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(tick)}</text>'
        )
    if reference is not None:
        y = sy(reference[0])
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{_fmt(y)}" x2="{_MARGIN_L + plot_w}" y2="{_fmt(y)}" '
            f'stroke="#b22222" stroke-width="1" stroke-dasharray="6 4"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L + plot_w - 4}" y="{_fmt(y - 5)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="#b22222">{reference[1]}</text>'
        )
    for i, (label, st) in enumerate(stats.items()):
        cx = sx(i, 0.5)
        half_box = 0.18 * plot_w / len(groups) * 2.0
        x0, x1 = cx - half_box, cx + half_box
        y_q1, y_q3 = sy(st["q1"]), sy(st["q3"])
        y_med = sy(st["median"])
        y_lo, y_hi = sy(st["lo"]), sy(st["hi"])
        parts.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(y_lo)}" x2="{_fmt(cx)}" y2="{_fmt(y_q1)}" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(y_q3)}" x2="{_fmt(cx)}" y2="{_fmt(y_hi)}" '
            f'stroke="black" stroke-width="1"/>'
        )
        for y_cap in (y_lo, y_hi):
            parts.append(
                f'<line x1="{_fmt(cx - half_box / 2)}" y1="{_fmt(y_cap)}" '
                f'x2="{_fmt(cx + half_box / 2)}" y2="{_fmt(y_cap)}" '
                f'stroke="black" stroke-width="1"/>'
            )
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y_q3)}" width="{_fmt(x1 - x0)}" '
            f'height="{_fmt(y_q1 - y_q3)}" fill="#c6dbef" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{_fmt(x0)}" y1="{_fmt(y_med)}" x2="{_fmt(x1)}" y2="{_fmt(y_med)}" '
            f'stroke="black" stroke-width="2"/>'
        )
        for o in st["outliers"]:
            parts.append(
                f'<circle cx="{_fmt(cx)}" cy="{_fmt(sy(o))}" r="2.5" '
                f'fill="none" stroke="black" stroke-width="1"/>'
            )
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_HEIGHT - _MARGIN_B + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_boxplot(path, groups, **kwargs) -> None:
    """Render and write a boxplot SVG to ``path``."""
    svg = render_boxplot(groups, **kwargs)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
