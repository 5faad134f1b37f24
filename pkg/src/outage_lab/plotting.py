"""Self-contained SVG figures: outage-vs-q1 curves and (R, P) verdict maps.

Output depends only on the inputs; coordinates are printed with a fixed
number of decimals so identical data gives byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 78, 24, 36, 56
VERDICT_STYLE = {
    "counterexample": ("#c62828", 5.0),
    "conjecture_holds": ("#1f5fbf", 2.0),
    "inconclusive": ("#9e9e9e", 2.5),
    "numerically_unstable": ("#ffffff", 0.0),
}


def _num(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    start: float
    stop: float

    def __call__(self, v: float) -> float:
        span = self.hi - self.lo or 1.0
        return self.start + (v - self.lo) / span * (self.stop - self.start)

    def inverse(self, p: float) -> float:
        return self.lo + (p - self.start) / (self.stop - self.start) * (self.hi - self.lo)


def x_axis(lo: float, hi: float) -> Axis:
    return Axis(lo, hi, MARGIN_L, WIDTH - MARGIN_R)


def y_axis(lo: float, hi: float) -> Axis:
    return Axis(lo, hi, HEIGHT - MARGIN_B, MARGIN_T)


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9)
    out = []
    k = first
    while k * step <= hi + 1e-9 * step:
        out.append(round(k * step, 12))
        k += 1
    return out


def _fmt_tick(v: float) -> str:
    return f"{v:.6g}"


def _frame(title: str, xlabel: str, ylabel: str, xa: Axis, ya: Axis) -> list[str]:
    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    x0, x1 = xa.start, xa.stop
    y0, y1 = ya.start, ya.stop
    parts.append(f'<rect x="{_num(x0)}" y="{_num(y1)}" width="{_num(x1 - x0)}" height="{_num(y0 - y1)}" '
                 'fill="none" stroke="#000000" stroke-width="1"/>')
    for v in _ticks(xa.lo, xa.hi):
        px = xa(v)
        parts.append(f'<line x1="{_num(px)}" y1="{_num(y0)}" x2="{_num(px)}" y2="{_num(y0 + 5)}" stroke="#000000"/>')
        parts.append(f'<text x="{_num(px)}" y="{_num(y0 + 18)}" text-anchor="middle">{_fmt_tick(v)}</text>')
    for v in _ticks(ya.lo, ya.hi):
        py = ya(v)
        parts.append(f'<line x1="{_num(x0 - 5)}" y1="{_num(py)}" x2="{_num(x0)}" y2="{_num(py)}" stroke="#000000"/>')
        parts.append(f'<text x="{_num(x0 - 8)}" y="{_num(py + 4)}" text-anchor="end">{_fmt_tick(v)}</text>')
    parts.append(f'<text x="{_num((x0 + x1) / 2)}" y="{HEIGHT - 14}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{_num((y0 + y1) / 2)}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {_num((y0 + y1) / 2)})">{escape(ylabel)}</text>')
    return parts


def _padded(lo: float, hi: float, frac: float = 0.05) -> tuple[float, float]:
    if hi == lo:
        d = abs(lo) * 0.01 or 1.0
        return lo - d, hi + d
    d = (hi - lo) * frac
    return lo - d, hi + d


def render_curve(q, f, mc=None, *, title: str = "Outage probability vs q1") -> str:
    """Quadrature curve ``(q, f)`` plus optional Monte Carlo points
    ``mc = [(q, p_hat, stderr), ...]`` drawn with 3-sigma error bars."""
    q = [float(v) for v in q]
    f = [float(v) for v in f]
    if len(q) != len(f) or len(q) < 2:
        raise ValueError("curve needs at least two (q, f) points")
    mc = [(float(a), float(b), float(c)) for a, b, c in (mc or [])]
    ys = f + [p - 3 * s for _, p, s in mc] + [p + 3 * s for _, p, s in mc]
    xa = x_axis(min(q), max(q))
    ya = y_axis(*_padded(min(ys), max(ys)))
    parts = _frame(title, "q1", "outage probability", xa, ya)
    pts = " ".join(f"{_num(xa(a))},{_num(ya(b))}" for a, b in zip(q, f))
    parts.append(f'<polyline class="quadrature" points="{pts}" fill="none" stroke="#1f5fbf" stroke-width="1.5"/>')
    for a, p, s in mc:
        px = _num(xa(a))
        parts.append(f'<line class="errorbar" x1="{px}" y1="{_num(ya(p - 3 * s))}" x2="{px}" '
                     f'y2="{_num(ya(p + 3 * s))}" stroke="#c62828"/>')
        parts.append(f'<circle class="mc" cx="{px}" cy="{_num(ya(p))}" r="2.5" fill="#c62828"/>')
    parts.append('<text x="{0}" y="{1}" fill="#1f5fbf">quadrature</text>'.format(_num(xa.stop - 110), _num(ya.stop + 16)))
    if mc:
        parts.append('<text x="{0}" y="{1}" fill="#c62828">Monte Carlo</text>'.format(_num(xa.stop - 110), _num(ya.stop + 32)))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def curve_points_from_svg(svg: str) -> list[tuple[float, float]]:
    """Pixel coordinates of the quadrature polyline (for inspection and tests)."""
    key = 'class="quadrature" points="'
    i = svg.index(key) + len(key)
    j = svg.index('"', i)
    return [tuple(float(c) for c in p.split(",")) for p in svg[i:j].split()]


def render_map(records, *, title: str = "Verdict by (R, P)") -> str:
    """Scatter of sweep verdicts over (R, P); counterexamples are large red dots."""
    records = [r for r in records]
    if not records:
        raise ValueError("no records to draw")
    Rs = [r.rate_R for r in records]
    Ps = [r.power_P for r in records]
    xa = x_axis(*_padded(min(Rs), max(Rs)))
    ya = y_axis(*_padded(min(Ps), max(Ps)))
    parts = _frame(title, "R (nats)", "P", xa, ya)
    for rec in sorted(records, key=lambda r: (r.rate_R, r.power_P)):
        color, radius = VERDICT_STYLE[rec.verdict]
        if radius == 0:
            continue
        parts.append(f'<circle class="{rec.verdict}" cx="{_num(xa(rec.rate_R))}" cy="{_num(ya(rec.power_P))}" '
                     f'r="{radius:.1f}" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
