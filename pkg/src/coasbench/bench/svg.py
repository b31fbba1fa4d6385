"""Tiny SVG emitter for the two figure kinds the reports need: per-dataset
metric-vs-size line charts with shaded confidence bands, and mean-rank bar
charts. No plotting dependency; the output is plain standalone SVG text.
"""
from __future__ import annotations

import html

WIDTH, HEIGHT = 720, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 160, 48, 56

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _esc(s) -> str:
    return html.escape(str(s), quote=True)


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = span / (n - 1)
    return [lo + i * step for i in range(n)]


class _Canvas:
    def __init__(self):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]

    def text(self, x, y, s, size=12, anchor="start", rotate=None, color="#222"):
        t = f'transform="rotate({rotate} {x} {y})" ' if rotate else ""
        self.parts.append(
            f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" font-family="sans-serif" '
            f'fill="{color}" text-anchor="{anchor}" {t}>{_esc(s)}</text>'
        )

    def line(self, x1, y1, x2, y2, color="#888", width=1.0):
        self.parts.append(
            f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
            f'stroke="{color}" stroke-width="{width}"/>'
        )

    def polyline(self, pts, color, width=2.0):
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"/>'
        )

    def polygon(self, pts, color, opacity=0.15):
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
        self.parts.append(
            f'<polygon points="{coords}" fill="{color}" fill-opacity="{opacity}" stroke="none"/>'
        )

    def rect(self, x, y, w, h, color):
        self.parts.append(
            f'<rect x="{x:.1f}" y="{y:.1f}" width="{w:.1f}" height="{h:.1f}" fill="{color}"/>'
        )

    def save(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.parts))


def line_chart(path, title, x_labels, series, y_label):
    """series: list of (name, means, half_widths); half_widths may be None."""
    cv = _Canvas()
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    lo = min(min(m - (h or 0.0) for m, h in zip(means, hws or [0.0] * len(means)))
             for _, means, hws in series)
    hi = max(max(m + (h or 0.0) for m, h in zip(means, hws or [0.0] * len(means)))
             for _, means, hws in series)
    pad = 0.05 * (hi - lo if hi > lo else 1.0)
    lo, hi = lo - pad, hi + pad

    def sx(i):
        if len(x_labels) == 1:
            return MARGIN_L + plot_w / 2
        return MARGIN_L + plot_w * i / (len(x_labels) - 1)

    def sy(v):
        return MARGIN_T + plot_h * (1.0 - (v - lo) / (hi - lo))

    cv.text(MARGIN_L, MARGIN_T - 16, title, size=14)
    cv.line(MARGIN_L, MARGIN_T, MARGIN_L, MARGIN_T + plot_h)
    cv.line(MARGIN_L, MARGIN_T + plot_h, MARGIN_L + plot_w, MARGIN_T + plot_h)
    for tick in _ticks(lo, hi):
        y = sy(tick)
        cv.line(MARGIN_L - 4, y, MARGIN_L, y)
        cv.line(MARGIN_L, y, MARGIN_L + plot_w, y, color="#eee")
        cv.text(MARGIN_L - 8, y + 4, f"{tick:.3g}", size=10, anchor="end")
    for i, lab in enumerate(x_labels):
        x = sx(i)
        cv.line(x, MARGIN_T + plot_h, x, MARGIN_T + plot_h + 4)
        cv.text(x, MARGIN_T + plot_h + 18, lab, size=10, anchor="middle")
    cv.text(14, MARGIN_T + plot_h / 2, y_label, size=11, anchor="middle", rotate=-90)

    for idx, (name, means, hws) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        if hws is not None and any(h > 0 for h in hws):
            upper = [(sx(i), sy(m + h)) for i, (m, h) in enumerate(zip(means, hws))]
            lower = [(sx(i), sy(m - h)) for i, (m, h) in enumerate(zip(means, hws))]
            cv.polygon(upper + lower[::-1], color)
        cv.polyline([(sx(i), sy(m)) for i, m in enumerate(means)], color)
        ly = MARGIN_T + 16 * idx
        cv.rect(WIDTH - MARGIN_R + 10, ly - 8, 12, 4, color)
        cv.text(WIDTH - MARGIN_R + 28, ly - 2, name, size=11)
    cv.save(path)


def bar_chart(path, title, labels, values, y_label="mean rank"):
    cv = _Canvas()
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    hi = max(values) * 1.1 if values else 1.0

    cv.text(MARGIN_L, MARGIN_T - 16, title, size=14)
    cv.line(MARGIN_L, MARGIN_T, MARGIN_L, MARGIN_T + plot_h)
    cv.line(MARGIN_L, MARGIN_T + plot_h, MARGIN_L + plot_w, MARGIN_T + plot_h)
    for tick in _ticks(0.0, hi):
        y = MARGIN_T + plot_h * (1.0 - tick / hi)
        cv.line(MARGIN_L - 4, y, MARGIN_L, y)
        cv.text(MARGIN_L - 8, y + 4, f"{tick:.3g}", size=10, anchor="end")
    cv.text(14, MARGIN_T + plot_h / 2, y_label, size=11, anchor="middle", rotate=-90)

    n = len(labels)
    slot = plot_w / max(n, 1)
    for i, (lab, val) in enumerate(zip(labels, values)):
        color = PALETTE[i % len(PALETTE)]
        x = MARGIN_L + slot * i + slot * 0.2
        h = plot_h * val / hi
        cv.rect(x, MARGIN_T + plot_h - h, slot * 0.6, h, color)
        cv.text(x + slot * 0.3, MARGIN_T + plot_h - h - 6, f"{val:.2f}", size=10,
                anchor="middle")
        cv.text(x + slot * 0.3, MARGIN_T + plot_h + 18, lab, size=10, anchor="middle")
    cv.save(path)
