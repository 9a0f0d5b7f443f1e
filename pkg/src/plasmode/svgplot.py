"""Minimal self-contained SVG charts (no plotting backend, byte-stable output)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"]

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _n(x):
    return f"{x:.2f}"


def _label(x):
    return f"{x:.4g}"


class _Canvas:
    def __init__(self, title, xlim, ylim, xlabel="", ylabel=""):
        self.parts = []
        self.xlim = xlim
        self.ylim = ylim if ylim[1] > ylim[0] else (ylim[0] - 0.5, ylim[0] + 0.5)
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">'
        )
        self.parts.append(f'<rect width="{W}" height="{H}" fill="white"/>')
        self.parts.append(f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
        self.parts.append(f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
        self.parts.append(
            f'<text x="16" y="{H / 2}" text-anchor="middle" transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>'
        )

    def x(self, v):
        a, b = self.xlim
        return LEFT + (v - a) / (b - a) * (W - LEFT - RIGHT)

    def y(self, v):
        a, b = self.ylim
        return H - BOTTOM - (v - a) / (b - a) * (H - TOP - BOTTOM)

    def axes(self, xticks=None, yticks=5):
        x0, x1 = LEFT, W - RIGHT
        y0, y1 = H - BOTTOM, TOP
        self.parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
        self.parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
        for v in np.linspace(*self.ylim, yticks):
            yy = self.y(v)
            self.parts.append(f'<line x1="{x0 - 4}" y1="{_n(yy)}" x2="{x0}" y2="{_n(yy)}" stroke="black"/>')
            self.parts.append(f'<text x="{x0 - 6}" y="{_n(yy + 4)}" text-anchor="end">{_label(v)}</text>')
        if xticks is None:
            xticks = [(v, _label(v)) for v in np.linspace(*self.xlim, 6)]
        for v, lab in xticks:
            xx = self.x(v)
            self.parts.append(f'<line x1="{_n(xx)}" y1="{y0}" x2="{_n(xx)}" y2="{y0 + 4}" stroke="black"/>')
            self.parts.append(f'<text x="{_n(xx)}" y="{y0 + 16}" text-anchor="middle">{escape(lab)}</text>')

    def legend(self, names):
        for i, name in enumerate(names):
            yy = TOP + 6 + 14 * i
            col = PALETTE[i % len(PALETTE)]
            self.parts.append(f'<rect x="{W - RIGHT - 150}" y="{yy - 8}" width="10" height="10" fill="{col}"/>')
            self.parts.append(f'<text x="{W - RIGHT - 135}" y="{yy + 1}">{escape(name)}</text>')

    def save(self, path):
        self.parts.append("</svg>")
        Path(path).write_text("\n".join(self.parts) + "\n", encoding="utf-8")


def histogram_overlay(series, edges, path, title="Outcome histograms", xlabel="outcome"):
    """Overlaid density-scaled histograms on shared bin edges.

    ``series`` maps a label to a vector of bin counts.
    """
    edges = np.asarray(edges, dtype=float)
    widths = np.diff(edges)
    dens = {k: np.asarray(c, float) / max(np.sum(c), 1) / widths for k, c in series.items()}
    top = max(float(d.max()) for d in dens.values()) * 1.05
    cv = _Canvas(title, (edges[0], edges[-1]), (0.0, top), xlabel, "density")
    cv.axes()
    for i, (name, d) in enumerate(dens.items()):
        col = PALETTE[i % len(PALETTE)]
        for lo, hi, h in zip(edges[:-1], edges[1:], d):
            x0, x1, y0, y1 = cv.x(lo), cv.x(hi), cv.y(h), cv.y(0)
            cv.parts.append(
                f'<rect x="{_n(x0)}" y="{_n(y0)}" width="{_n(x1 - x0)}" height="{_n(y1 - y0)}" '
                f'fill="{col}" fill-opacity="0.35" stroke="{col}"/>'
            )
    cv.legend(list(dens))
    cv.save(path)


def _five_numbers(v):
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo = float(np.min(v[v >= q1 - 1.5 * iqr]))
    hi = float(np.max(v[v <= q3 + 1.5 * iqr]))
    out = v[(v < lo) | (v > hi)]
    return q1, med, q3, lo, hi, out


def boxplot(groups, path, title="", ylabel=""):
    """Tukey boxplots, one per group (``groups`` maps label to values)."""
    names = list(groups)
    vals = [np.asarray(groups[k], dtype=float) for k in names]
    lo = min(float(v.min()) for v in vals)
    hi = max(float(v.max()) for v in vals)
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    cv = _Canvas(title, (0.0, len(names) + 1.0), (lo - pad, hi + pad), "", ylabel)
    cv.axes(xticks=[(i + 1, n) for i, n in enumerate(names)])
    for i, v in enumerate(vals):
        col = PALETTE[i % len(PALETTE)]
        q1, med, q3, wlo, whi, out = _five_numbers(v)
        xc = cv.x(i + 1)
        half = 0.25 * (cv.x(1) - cv.x(0))
        cv.parts.append(f'<line x1="{_n(xc)}" y1="{_n(cv.y(wlo))}" x2="{_n(xc)}" y2="{_n(cv.y(whi))}" stroke="black"/>')
        for wv in (wlo, whi):
            cv.parts.append(f'<line x1="{_n(xc - half / 2)}" y1="{_n(cv.y(wv))}" x2="{_n(xc + half / 2)}" y2="{_n(cv.y(wv))}" stroke="black"/>')
        cv.parts.append(
            f'<rect x="{_n(xc - half)}" y="{_n(cv.y(q3))}" width="{_n(2 * half)}" '
            f'height="{_n(cv.y(q1) - cv.y(q3))}" fill="{col}" fill-opacity="0.6" stroke="black"/>'
        )
        cv.parts.append(f'<line x1="{_n(xc - half)}" y1="{_n(cv.y(med))}" x2="{_n(xc + half)}" y2="{_n(cv.y(med))}" stroke="black" stroke-width="2"/>')
        for o in out:
            cv.parts.append(f'<circle cx="{_n(xc)}" cy="{_n(cv.y(o))}" r="2" fill="none" stroke="black"/>')
    cv.save(path)


def line_traces(series, path, title="", xlabel="number of plasmode datasets", ylabel="", marks=None):
    """Polylines of y against 1..len(y); ``marks`` maps label to an x to flag."""
    names = list(series)
    vals = [np.asarray(series[k], dtype=float) for k in names]
    n = max(v.size for v in vals)
    lo = min(float(v.min()) for v in vals)
    hi = max(float(v.max()) for v in vals)
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    cv = _Canvas(title, (1.0, float(max(n, 2))), (lo - pad, hi + pad), xlabel, ylabel)
    cv.axes()
    for i, (name, v) in enumerate(zip(names, vals)):
        col = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_n(cv.x(k + 1))},{_n(cv.y(y))}" for k, y in enumerate(v))
        cv.parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        at = (marks or {}).get(name)
        if at is not None:
            xx = cv.x(at)
            cv.parts.append(
                f'<line x1="{_n(xx)}" y1="{TOP}" x2="{_n(xx)}" y2="{H - BOTTOM}" stroke="{col}" stroke-dasharray="4 3"/>'
            )
    cv.legend(names)
    cv.save(path)
