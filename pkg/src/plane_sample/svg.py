"""Minimal deterministic SVG charts (800x500): banded curves and histograms."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
_MARGIN = dict(left=70, right=30, top=40, bottom=60)
COLORS = {"greedy": "#d62728", "lhs": "#1f77b4", "random": "#e6b800", "default": "#d62728"}


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Frame:
    def __init__(self, x_max: float, y_min: float, y_max: float):
        self.x_max = max(float(x_max), 1.0)
        self.y_min = float(y_min)
        self.y_max = float(y_max) if y_max > y_min else float(y_min) + 1.0
        self.w = WIDTH - _MARGIN["left"] - _MARGIN["right"]
        self.h = HEIGHT - _MARGIN["top"] - _MARGIN["bottom"]

    def x(self, v):
        return _MARGIN["left"] + self.w * float(v) / self.x_max

    def y(self, v):
        return _MARGIN["top"] + self.h * (1.0 - (float(v) - self.y_min) / (self.y_max - self.y_min))

    def points(self, xs, ys) -> str:
        return " ".join(f"{_fmt(self.x(a))},{_fmt(self.y(b))}" for a, b in zip(xs, ys))


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [round(float(t), 10) for t in np.arange(start, hi + step * 1e-9, step)]


def _axes(fr: _Frame, title: str, xlabel: str, ylabel: str, xticks) -> list[str]:
    out = [
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{_fmt(fr.x(0))}" y1="{_fmt(fr.y(fr.y_min))}" x2="{_fmt(fr.x(fr.x_max))}" '
        f'y2="{_fmt(fr.y(fr.y_min))}" stroke="black"/>',
        f'<line x1="{_fmt(fr.x(0))}" y1="{_fmt(fr.y(fr.y_min))}" x2="{_fmt(fr.x(0))}" '
        f'y2="{_fmt(fr.y(fr.y_max))}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
        f'<text x="18" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {HEIGHT / 2:.0f})">{escape(ylabel)}</text>',
    ]
    for t in _nice_ticks(fr.y_min, fr.y_max):
        y = _fmt(fr.y(t))
        out.append(f'<line x1="{_fmt(fr.x(0) - 5)}" y1="{y}" x2="{_fmt(fr.x(0))}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{_fmt(fr.x(0) - 8)}" y="{y}" text-anchor="end" font-size="11" '
                   f'dominant-baseline="middle">{t:g}</text>')
    for t, label in xticks:
        x = _fmt(fr.x(t))
        y0 = fr.y(fr.y_min)
        out.append(f'<line x1="{x}" y1="{_fmt(y0)}" x2="{x}" y2="{_fmt(y0 + 5)}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{_fmt(y0 + 18)}" text-anchor="middle" font-size="11">{escape(label)}</text>')
    return out


def _document(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>', *body, "</svg>"]) + "\n"


def _step_ticks(n: int):
    step = max(1, int(np.ceil(n / 10)))
    return [(k, str(k)) for k in range(0, n + 1, step)]


def banded_curves_svg(curves: dict, title: str, markers: dict | None = None, ylabel="information gain (nats)"):
    """Overlay curves with shaded bands.

    ``curves`` maps a name to ``(mean, lo, hi)`` arrays over steps 1..n; each
    curve starts from 0 at step 0. ``markers`` maps names to x positions of
    vertical lines.
    """
    markers = markers or {}
    n = max(len(m) for m, _, _ in curves.values())
    y_hi = max(float(np.max(hi)) for _, _, hi in curves.values())
    y_lo = min(0.0, min(float(np.min(lo)) for _, lo, _ in curves.values()))
    fr = _Frame(n, y_lo, y_hi * 1.05 if y_hi > 0 else 1.0)
    body = _axes(fr, title, "number of scenarios", ylabel, _step_ticks(n))
    for k, (name, (mean, lo, hi)) in enumerate(curves.items()):
        color = COLORS.get(name, COLORS["default"])
        xs = np.arange(len(mean) + 1)
        lo_ = np.concatenate([[0.0], lo])
        hi_ = np.concatenate([[0.0], hi])
        poly = fr.points(xs, hi_) + " " + fr.points(xs[::-1], lo_[::-1])
        body.append(f'<polygon points="{poly}" fill="{color}" fill-opacity="0.25" stroke="none"/>')
        body.append(
            f'<polyline points="{fr.points(xs, np.concatenate([[0.0], mean]))}" fill="none" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        ly = _MARGIN["top"] + 10 + 18 * k
        lx = WIDTH - _MARGIN["right"] - 150
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        body.append(f'<text x="{lx + 32}" y="{ly}" font-size="12" dominant-baseline="middle">{escape(name)}</text>')
    for name, x in markers.items():
        color = COLORS.get(name, COLORS["default"])
        body.append(
            f'<line x1="{_fmt(fr.x(x))}" y1="{_fmt(fr.y(fr.y_min))}" x2="{_fmt(fr.x(x))}" '
            f'y2="{_fmt(fr.y(fr.y_max))}" stroke="{color}" stroke-dasharray="6,4" stroke-width="1.5"/>'
        )
    return _document(body)


def gain_curve_svg(gains, title="Information gain per greedy step") -> str:
    mean = np.array([g.mean for g in gains], dtype=float)
    ci = np.array([g.ci_halfwidth for g in gains], dtype=float)
    if mean.size == 0:
        mean = ci = np.zeros(1)
    return banded_curves_svg({"greedy": (mean, mean - ci, mean + ci)}, title)


def comparison_svg(report) -> str:
    curves = {name: res.band() for name, res in report.methods.items()}
    markers = {name: res.mean_stopping_index for name, res in report.methods.items() if name in ("greedy", "lhs")}
    return banded_curves_svg(curves, "Information gain by selection method", markers)


def ppc_svg(report) -> str:
    """Observed frequencies (dots) against replicated bands (bars) per count bin."""
    n = len(report.bins)
    y_hi = float(max(np.max(report.replicated_hi), np.max(report.observed)))
    fr = _Frame(n, 0.0, y_hi * 1.05 if y_hi > 0 else 1.0)
    ticks = [(k + 0.5, label) for k, label in enumerate(report.bins)]
    if n > 20:
        ticks = ticks[:: int(np.ceil(n / 20))]
    body = _axes(fr, "Posterior predictive check", "count per scenario", "frequency", ticks)
    for k in range(n):
        x0, x1 = fr.x(k + 0.15), fr.x(k + 0.85)
        y0, y1 = fr.y(report.replicated_lo[k]), fr.y(report.replicated_hi[k])
        body.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y1)}" width="{_fmt(x1 - x0)}" height="{_fmt(max(y0 - y1, 0.5))}" '
            f'fill="#1f77b4" fill-opacity="0.35"/>'
        )
        ym = fr.y(report.replicated_mean[k])
        body.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(ym)}" x2="{_fmt(x1)}" y2="{_fmt(ym)}" stroke="#1f77b4"/>')
        color = "black" if report.agree[k] else "#d62728"
        body.append(
            f'<circle cx="{_fmt(fr.x(k + 0.5))}" cy="{_fmt(fr.y(report.observed[k]))}" r="4" fill="{color}"/>'
        )
    return _document(body)
