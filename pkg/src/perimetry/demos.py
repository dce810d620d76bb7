"""Two counterexample curves for weighted approximation.

``example51``: a disk whose perimeter density drops on the unit circle;
outward homotheties converge in volume but their weighted perimeter stays
about ``2π`` above that of the disk.

``example52``: a cusp with an exponential perimeter density near its axis;
truncations converge in volume while the weighted length of the cut blows up.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    PolygonalSet,
    Universe,
    area,
    difference,
    intersection,
    make_polygon_set,
    rectangle,
    regular_polygon,
    scale,
)
from .weighted import directional, parse_density, segments_integral, weighted_area, weighted_perimeter

EX51_G = "radial-step:1,1,2"
EX51_VERTICES = 64
EX51_TAUS = tuple(0.32 / 2**k for k in range(8))

EX52_XMAX = 100.0
EX52_TS = (2, 3, 4, 5, 6)
EX52_G = "cusp-g"
EX52_F = "const:1"


@dataclass
class DemoResult:
    name: str
    header: list[str]
    rows: list[list[float]]
    E: PolygonalSet
    shapes: list[PolygonalSet]
    lines: list[tuple[float, float, float, float]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def column(self, name: str) -> np.ndarray:
        k = self.header.index(name)
        return np.array([r[k] for r in self.rows])


def example51() -> DemoResult:
    """Sweep ``F_τ = (1 + τ) E`` for the 64-gon disk ``E``."""
    g = directional(EX51_G)
    E = regular_polygon(EX51_VERTICES, 1.0)
    pE = weighted_perimeter(E, g)
    rows, shapes = [], []
    for tau in EX51_TAUS:
        F = scale(E, 1.0 + tau)
        shapes.append(F)
        rows.append([tau, area(difference(F, E)) + area(difference(E, F)), abs(weighted_perimeter(F, g) - pE)])
    return DemoResult("example51", ["tau", "sym_diff_area", "g_perimeter_gap"], rows, E, shapes, [])


def cusp_samples(x_max: float = EX52_XMAX) -> np.ndarray:
    """Abscissae for the polygonal cusp, dense near ``x = 1`` and containing every integer cut."""
    xs = np.concatenate([np.linspace(1.0, 8.0, 281), np.geomspace(8.0, x_max, 161)])
    return np.unique(np.round(xs, 12))


def cusp(x_max: float = EX52_XMAX) -> PolygonalSet:
    """``{1 ≤ x ≤ x_max, |y| ≤ x⁻²}`` with the curves sampled by :func:`cusp_samples`."""
    xs = cusp_samples(x_max)
    upper = np.column_stack([xs, xs**-2.0])
    lower = np.column_stack([xs[::-1], -xs[::-1] ** -2.0])
    return make_polygon_set([np.vstack([lower, upper])])


def cut_length(T: float, g) -> float:
    """``∫ g((T, y), (1, 0)) dy`` over ``|y| ≤ T⁻²``, split where the density changes form."""
    g = directional(g)
    knots = np.array([-1.0, -0.5, 0.5, 1.0]) / T**2
    segs = np.array([[[T, a], [T, b]] for a, b in zip(knots[:-1], knots[1:])])
    # segments run upward, so their outward normal is (1, 0)
    return segments_integral(segs, g)


def cut_bound(T: float) -> float:
    return math.exp(T - 1) / (2 * T**2)


def example52() -> DemoResult:
    """Truncations ``E_T = E ∩ {x ≤ T}`` of the cusp for ``T = 2, ..., 6``."""
    f = parse_density(EX52_F)
    g = directional(EX52_G)
    E = cusp()
    rows, shapes, lines = [], [], []
    for T in EX52_TS:
        ET = intersection(E, rectangle(0.0, -2.0, T, 2.0))
        shapes.append(ET)
        rows.append([T, weighted_area(difference(E, ET), f), cut_length(T, g), cut_bound(T)])
        lines.append((T, -T**-2.0, T, T**-2.0))
    return DemoResult("example52", ["T", "tail_f_volume", "cut_g_length", "bound"], rows, E, shapes, lines)


DEMOS = {"example51": example51, "example52": example52}


def demo_universe(result: DemoResult) -> Universe:
    if result.name == "example52":
        return Universe(0.5, -1.25, 6.5, 1.25)
    return Universe.around(result.E, *result.shapes, margin_factor=0.05)
