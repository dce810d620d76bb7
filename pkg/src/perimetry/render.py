"""SVG overlays: E filled green, Ω outlined black, F hatched, viewBox = Universe."""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from .geometry import PolygonalSet, Universe

_HATCH = (
    '<pattern id="hatch" patternUnits="userSpaceOnUse" width="{w}" height="{w}" '
    'patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="{w}" stroke="#c03" '
    'stroke-width="{sw}"/></pattern>'
)


def _num(v: float) -> str:
    return repr(float(v))


def _path(E: PolygonalSet) -> str:
    parts = []
    for ring in E.rings:
        pts = " L ".join(f"{_num(x)} {_num(y)}" for x, y in ring)
        parts.append(f"M {pts} Z")
    return " ".join(parts)


def _poly(ring: np.ndarray) -> str:
    return " ".join(f"{_num(x)},{_num(y)}" for x, y in ring)


def svg_document(universe: Universe, E: Optional[PolygonalSet] = None, omega: Optional[PolygonalSet] = None,
                 F: Optional[PolygonalSet] = None, bumps: Iterable[tuple[str, np.ndarray]] = (),
                 lines: Iterable[tuple[float, float, float, float]] = ()) -> str:
    """Render the sets in world coordinates with the y axis pointing up."""
    x0, y0, x1, y1 = universe.xmin, universe.ymin, universe.xmax, universe.ymax
    w, h = x1 - x0, y1 - y0
    sw = 1e-3 * max(w, h)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_num(x0)} {_num(-y1)} {_num(w)} {_num(h)}" '
        'width="800" height="800" preserveAspectRatio="xMidYMid meet">',
        "<defs>" + _HATCH.format(w=_num(8 * sw), sw=_num(sw)) + "</defs>",
        '<g transform="scale(1,-1)">',
    ]
    if E is not None and not E.is_empty:
        out.append(f'<path d="{_path(E)}" fill="#2a2" fill-opacity="0.5" fill-rule="evenodd" stroke="none"/>')
    for direction, rect in bumps:
        colour = "#06c" if direction == "+" else "#e80"
        out.append(f'<polygon points="{_poly(rect)}" fill="{colour}" fill-opacity="0.6" stroke="none"/>')
    if F is not None and not F.is_empty:
        out.append(f'<path d="{_path(F)}" fill="url(#hatch)" fill-rule="evenodd" stroke="#c03" '
                   f'stroke-width="{_num(sw)}"/>')
    if omega is not None and not omega.is_empty:
        out.append(f'<path d="{_path(omega)}" fill="none" stroke="#000" stroke-width="{_num(sw)}"/>')
    for a, b, c, d in lines:
        out.append(f'<line x1="{_num(a)}" y1="{_num(b)}" x2="{_num(c)}" y2="{_num(d)}" stroke="#00c" '
                   f'stroke-width="{_num(sw)}"/>')
    out += ["</g>", "</svg>", ""]
    return "\n".join(out)


def trace_svg(universe: Universe, E: PolygonalSet, omega: PolygonalSet, F: PolygonalSet, trace) -> str:
    """Pushout overlay: every bump coloured by pass direction."""
    bumps = [(p.direction, np.asarray(r)) for p in trace.passes for r in p.rects]
    return svg_document(universe, E=E, omega=omega, F=F, bumps=bumps)
