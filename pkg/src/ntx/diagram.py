"""Transition diagrams and subgroup bar charts as deterministic SVG.

Hole charges sit as bars along the bottom, particle charges along the top,
and ribbons between them carry the transfer matrix entries. Coordinates are
computed in floats and written with two decimals so output is stable
byte-for-byte.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

# matplotlib "tab10"
DEFAULT_COLORS = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class DiagramOptions:
    width: float = 640.0
    height: float = 420.0
    gap: float = 12.0
    margin: float = 40.0
    bar_height: float = 22.0
    epsilon: float = 0.1  # percentage points; thinner ribbons are not drawn
    ribbon_opacity: float = 0.55
    title: Optional[str] = None


@dataclass(frozen=True)
class Connector:
    source: int
    target: int
    value: float
    bottom: tuple[float, float]
    top: tuple[float, float]
    drawn: bool

    @property
    def local(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True, eq=False)
class DiagramSpec:
    names: tuple[str, ...]
    colors: tuple[str, ...]
    hole: np.ndarray
    particle: np.ndarray
    bottom_bars: tuple[tuple[float, float], ...]
    top_bars: tuple[tuple[float, float], ...]
    connectors: tuple[Connector, ...]
    options: DiagramOptions
    bottom_y: float  # top edge of the hole bars
    top_y: float  # bottom edge of the particle bars

    @property
    def drawable_width(self) -> float:
        o = self.options
        return o.width - 2 * o.margin - (len(self.names) - 1) * o.gap


def resolve_colors(names: Sequence[str], colors: Optional[Sequence[Optional[str]]] = None, overrides=None) -> tuple[str, ...]:
    out = []
    for j, name in enumerate(names):
        c = None
        if overrides and name in overrides:
            c = overrides[name]
        elif colors is not None and j < len(colors):
            c = colors[j]
        out.append(c or DEFAULT_COLORS[j % len(DEFAULT_COLORS)])
    return tuple(out)


def layout_transition_diagram(
    matrix,
    names: Sequence[str],
    colors: Optional[Sequence[Optional[str]]] = None,
    options: DiagramOptions = DiagramOptions(),
) -> DiagramSpec:
    Q = np.asarray(matrix, dtype=float)
    M = len(names)
    if Q.shape != (M, M):
        raise ValueError(f"matrix shape {Q.shape} does not match {M} subgroup names")
    if np.any(Q < 0):
        raise ValueError("transition matrix has negative entries")
    hole = Q.sum(axis=1)
    particle = Q.sum(axis=0)
    total_h, total_p = hole.sum(), particle.sum()
    if total_h <= 0 or total_p <= 0:
        raise ValueError("transition matrix is all zero")

    o = options
    drawable = o.width - 2 * o.margin - (M - 1) * o.gap
    if drawable <= 0:
        raise ValueError("canvas too narrow for the number of subgroups")
    sh = drawable / total_h
    sp = drawable / total_p

    def bars(values, scale):
        out, x = [], o.margin
        for v in values:
            out.append((x, x + v * scale))
            x += v * scale + o.gap
        return out

    bottom = bars(hole, sh)
    top = bars(particle, sp)

    bottom_cursor = [b[0] for b in bottom]
    top_cursor = [t[0] for t in top]
    spans = {}
    for i in range(M):
        for j in range(M):
            if Q[i, j] > 0:
                w = Q[i, j] * sh
                spans[i, j] = [(bottom_cursor[i], bottom_cursor[i] + w), None]
                bottom_cursor[i] += w
    for j in range(M):
        for i in range(M):
            if Q[i, j] > 0:
                w = Q[i, j] * sp
                spans[i, j][1] = (top_cursor[j], top_cursor[j] + w)
                top_cursor[j] += w

    connectors = []
    for (i, j), (b, t) in sorted(spans.items()):
        pct = 100.0 * Q[i, j] / total_h
        connectors.append(Connector(i, j, float(Q[i, j]), b, t, drawn=pct >= o.epsilon))

    label_band = 34.0
    top_y = o.margin + (label_band if o.title else 0.0) + label_band + o.bar_height
    bottom_y = o.height - o.margin - label_band - o.bar_height
    return DiagramSpec(
        names=tuple(names),
        colors=resolve_colors(names, colors),
        hole=hole,
        particle=particle,
        bottom_bars=tuple(bottom),
        top_bars=tuple(top),
        connectors=tuple(connectors),
        options=o,
        bottom_y=bottom_y,
        top_y=top_y,
    )


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _pct(v, total) -> str:
    return f"{100.0 * v / total:.1f}%"


def _header(width, height):
    return (
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}" font-family="Helvetica, Arial, sans-serif" font-size="12">\n'
        f'<rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="#ffffff"/>\n'
    )


def ribbon_path(c: Connector, bottom_y: float, top_y: float) -> str:
    (b0, b1), (t0, t1) = c.bottom, c.top
    ym = 0.5 * (bottom_y + top_y)
    return (
        f"M{_f(b0)},{_f(bottom_y)} C{_f(b0)},{_f(ym)} {_f(t0)},{_f(ym)} {_f(t0)},{_f(top_y)} "
        f"L{_f(t1)},{_f(top_y)} C{_f(t1)},{_f(ym)} {_f(b1)},{_f(ym)} {_f(b1)},{_f(bottom_y)} Z"
    )


def render_svg(d: DiagramSpec) -> bytes:
    o = d.options
    th, tp = d.hole.sum(), d.particle.sum()
    parts = [_header(o.width, o.height)]
    if o.title:
        parts.append(f'<text x="{_f(o.width / 2)}" y="{_f(o.margin)}" text-anchor="middle" font-size="14">{escape(o.title)}</text>\n')

    parts.append('<g id="ribbons">\n')
    for c in d.connectors:
        if not c.drawn:
            continue
        kind = "le" if c.local else "ct"
        parts.append(
            f'<path class="{kind}" d="{ribbon_path(c, d.bottom_y, d.top_y)}" fill="{d.colors[c.source]}" '
            f'fill-opacity="{o.ribbon_opacity:.2f}" stroke="none"><title>{escape(d.names[c.source])} &#8594; '
            f'{escape(d.names[c.target])}: {_pct(c.value, th)}</title></path>\n'
        )
    parts.append("</g>\n")

    parts.append('<g id="particle">\n')
    y0 = d.top_y - o.bar_height
    for j, (x0, x1) in enumerate(d.top_bars):
        parts.append(
            f'<rect x="{_f(x0)}" y="{_f(y0)}" width="{_f(x1 - x0)}" height="{_f(o.bar_height)}" fill="{d.colors[j]}"/>\n'
        )
        parts.append(
            f'<text x="{_f((x0 + x1) / 2)}" y="{_f(y0 - 6)}" text-anchor="middle">{escape(d.names[j])} {_pct(d.particle[j], tp)}</text>\n'
        )
    parts.append("</g>\n")

    parts.append('<g id="hole">\n')
    for i, (x0, x1) in enumerate(d.bottom_bars):
        parts.append(
            f'<rect x="{_f(x0)}" y="{_f(d.bottom_y)}" width="{_f(x1 - x0)}" height="{_f(o.bar_height)}" fill="{d.colors[i]}"/>\n'
        )
        parts.append(
            f'<text x="{_f((x0 + x1) / 2)}" y="{_f(d.bottom_y + o.bar_height + 16)}" text-anchor="middle">{escape(d.names[i])} {_pct(d.hole[i], th)}</text>\n'
        )
    parts.append("</g>\n")
    parts.append(f'<text x="{_f(4)}" y="{_f(d.top_y - o.bar_height / 2 + 4)}" font-size="10">particle</text>\n')
    parts.append(f'<text x="{_f(4)}" y="{_f(d.bottom_y + o.bar_height / 2 + 4)}" font-size="10">hole</text>\n')
    parts.append("</svg>\n")
    return "".join(parts).encode("utf-8")


def render_bar_chart(
    hole: Sequence[float],
    particle: Sequence[float],
    names: Sequence[str],
    colors: Optional[Sequence[Optional[str]]] = None,
    width: float = 480.0,
    height: float = 300.0,
) -> bytes:
    """Grouped hole/particle bars per subgroup, heights in percent of each total."""
    h = np.asarray(hole, dtype=float)
    p = np.asarray(particle, dtype=float)
    if h.sum() <= 0 or p.sum() <= 0:
        raise ValueError("bar chart needs positive totals")
    hp = 100.0 * h / h.sum()
    pp = 100.0 * p / p.sum()
    cols = resolve_colors(names, colors)
    M = len(names)
    margin, base = 40.0, height - 50.0
    plot_h = base - margin
    slot = (width - 2 * margin) / M
    bw = slot * 0.35
    parts = [_header(width, height)]
    parts.append(f'<line x1="{_f(margin)}" y1="{_f(base)}" x2="{_f(width - margin)}" y2="{_f(base)}" stroke="#000000"/>\n')
    for j in range(M):
        x = margin + j * slot + slot * 0.15
        for k, (vals, opacity, kind) in enumerate(((hp, "0.45", "hole"), (pp, "1.00", "particle"))):
            bh = plot_h * vals[j] / 100.0
            xx = x + k * bw
            parts.append(
                f'<rect class="{kind}" x="{_f(xx)}" y="{_f(base - bh)}" width="{_f(bw)}" height="{_f(bh)}" '
                f'fill="{cols[j]}" fill-opacity="{opacity}"/>\n'
            )
            parts.append(
                f'<text x="{_f(xx + bw / 2)}" y="{_f(base - bh - 4)}" text-anchor="middle" font-size="10">{vals[j]:.1f}%</text>\n'
            )
        parts.append(f'<text x="{_f(x + bw)}" y="{_f(base + 16)}" text-anchor="middle">{escape(names[j])}</text>\n')
    parts.append(f'<text x="{_f(margin)}" y="{_f(height - 12)}" font-size="10">light: hole, solid: particle</text>\n')
    parts.append("</svg>\n")
    return "".join(parts).encode("utf-8")
