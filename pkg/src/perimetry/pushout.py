"""Removing the common boundary of E and Ω by modifying E only outside Ω.

Agreeing-normal overlaps (``PLUS``) are pushed out by gluing thin rectangles
("bumps") onto them on the far side of Ω; opposing-normal overlaps
(``MINUS``) are pulled in by the same construction applied to the complement
of E.  :func:`remove_common_boundary` alternates the two with a halving budget
until nothing is shared.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
import shapely

from .boundary import common_boundary, outward_normals, seg_lengths
from .errors import BudgetExhausted, BumpEscapesUniverse, HeightSelectionFailed
from .geometry import (
    TAU_SNAP,
    PolygonalSet,
    Universe,
    area,
    complement,
    difference,
    from_geometry,
    intersection,
    make_polygon_set,
    perimeter,
    symmetric_difference,
    union,
    union_all,
)

N_HEIGHT_CANDIDATES = 16
N_SLICE_SAMPLES = 33
MIN_HEIGHT = 100 * TAU_SNAP
MIN_SEGMENT = 10 * TAU_SNAP
SLIVER = 10 * TAU_SNAP
MIN_CLEARANCE = 10 * TAU_SNAP
TAPER = 0.5
MAX_RETRIES = 4
MAX_INNER = 8
DEFAULT_MAX_PASSES = 64
DELTA_MAX = 0.25

HeightScale = Callable[[np.ndarray, np.ndarray], float]


@dataclass
class PassRecord:
    j: int
    direction: str  # "+" enlarges E, "-" shrinks it
    delta: float
    bumps: int
    d_perimeter: float
    d_area: float
    gamma_plus_after: float
    gamma_minus_after: float
    C_P: float
    budget: float = float("nan")
    rects: list = field(default_factory=list, repr=False)


@dataclass
class PushoutTrace:
    passes: list[PassRecord] = field(default_factory=list)

    def to_rows(self) -> list[dict]:
        rows = []
        for p in self.passes:
            d = asdict(p)
            d.pop("rects")
            rows.append(d)
        return rows

    def to_csv(self) -> str:
        cols = ["j", "direction", "delta", "budget", "bumps", "d_perimeter", "d_area",
                "gamma_plus_after", "gamma_minus_after", "C_P"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.to_rows():
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
        return buf.getvalue()

    @property
    def total_bumps(self) -> int:
        return sum(p.bumps for p in self.passes)


def bump_height(rect: np.ndarray) -> float:
    a, b, _, top = rect
    d = b - a
    return float(abs(d[0] * (top[1] - a[1]) - d[1] * (top[0] - a[0])) / np.hypot(*d))


def max_passes() -> int:
    raw = os.environ.get("PERIMETRY_MAX_PASSES")
    if raw is None or raw == "":
        return DEFAULT_MAX_PASSES
    value = int(raw)
    if value < 1:
        raise ValueError("PERIMETRY_MAX_PASSES must be a positive integer")
    return value


def _local_frame(seg: np.ndarray):
    a, b = seg
    d = b - a
    L = float(np.hypot(*d))
    t = d / L
    nu = np.array([t[1], -t[0]])
    return a, t, nu, L


def _rect(a, t, nu, L, h) -> np.ndarray:
    # Sides lean inward so they leave ∂Ω transversally at the base endpoints.
    b = a + L * t
    k = TAPER * h
    return np.array([a, b, b - k * t + h * nu, a + k * t + h * nu])


def select_height(E: PolygonalSet, omega: PolygonalSet, seg: np.ndarray, delta: float, scale: float = 1.0) -> float:
    """Pick a bump height in ``(δL, 2δL)`` for the segment ``seg``.

    Candidates are filtered to those whose slice at height ``h`` above the
    base and at depth ``h`` below it is mostly clean (measure of points on
    the wrong side at most ``3δL``), then the candidate farthest from every
    vertex of E and Ω in the lateral band wins.

    Raises:
        HeightSelectionFailed: every candidate grazes a vertex.
    """
    a, t, nu, L = _local_frame(seg)
    base = max(delta * L * scale, min(MIN_HEIGHT, 0.25 * L))
    hs = base * (1.0 + (np.arange(N_HEIGHT_CANDIDATES) + 0.5) / N_HEIGHT_CANDIDATES)

    s = (np.arange(N_SLICE_SAMPLES) + 0.5) / N_SLICE_SAMPLES * L
    up = a + s[None, :, None] * t + hs[:, None, None] * nu
    down = a + s[None, :, None] * t - hs[:, None, None] * nu
    hit_up = shapely.contains_xy(omega.geom, up[..., 0], up[..., 1])
    miss_down = ~shapely.contains_xy(E.geom, down[..., 0], down[..., 1])
    slice_measure = (hit_up.sum(axis=1) + miss_down.sum(axis=1)) * (L / N_SLICE_SAMPLES)
    ok = slice_measure <= 3 * delta * L * scale
    pool = np.flatnonzero(ok) if np.any(ok) else np.arange(len(hs))

    verts = np.concatenate([E.vertices, omega.vertices], axis=0)
    rel = verts - a
    u = rel @ t
    w = rel @ nu
    # only vertices over the top edge can graze it; the slanted sides are shared with neighbours
    inset = TAPER * w + MIN_CLEARANCE
    band = (u > inset) & (u < L - inset) & (w > 0) & (w < 2.2 * hs.max())
    if not np.any(band):
        return float(hs[pool[0]])
    clearance = np.abs(hs[pool, None] - w[band][None, :]).min(axis=1)
    best = int(np.argmax(clearance))
    if clearance[best] < MIN_CLEARANCE:
        raise HeightSelectionFailed(f"every bump height grazes a vertex (clearance {clearance[best]:.3g})")
    return float(hs[pool[best]])


def bump_rect(E, omega, seg, delta, scale: float = 1.0, universe: Optional[Universe] = None) -> np.ndarray:
    a, t, nu, L = _local_frame(np.asarray(seg, dtype=float))
    h = select_height(E, omega, np.asarray(seg, dtype=float), delta, scale)
    rect = _rect(a, t, nu, L, h)
    if universe is not None:
        if (rect[:, 0].min() <= universe.xmin or rect[:, 0].max() >= universe.xmax
                or rect[:, 1].min() <= universe.ymin or rect[:, 1].max() >= universe.ymax):
            raise BumpEscapesUniverse("bump rectangle leaves the universe box")
    return rect


def bump_segment(E: PolygonalSet, omega: PolygonalSet, seg, delta: float,
                 universe: Optional[Universe] = None) -> PolygonalSet:
    """Return ``E ∪ (rect \\ Ω)`` for the bump over one segment.

    The bump is a trapezoid with the segment as its base, height ``h`` and
    sides leaning inward by ``TAPER * h``.
    """
    rect = make_polygon_set([bump_rect(E, omega, seg, delta, universe=universe)])
    return union(E, difference(rect, omega))


def _scales(segs: np.ndarray, height_scale: Optional[HeightScale]) -> np.ndarray:
    if height_scale is None:
        return np.ones(len(segs))
    mids = 0.5 * (segs[:, 0] + segs[:, 1])
    normals = outward_normals(segs)
    return np.array([min(1.0, max(1e-3, float(height_scale(m, n)))) for m, n in zip(mids, normals)])


def _push_once(E, omega, delta, universe, height_scale):
    gp = common_boundary(E, omega).plus
    gp = gp[seg_lengths(gp) >= MIN_SEGMENT]
    if len(gp) == 0:
        return E, []
    scales = _scales(gp, height_scale)
    rects = [bump_rect(E, omega, seg, delta, sc, universe) for seg, sc in zip(gp, scales)]
    bumps = from_geometry(shapely.union_all(shapely.polygons(np.array(rects))))
    # E and Ω edges agree only to the snap tolerance; keep the sliver between them so the base merges
    inside = difference(intersection(bumps, omega), E)
    if not inside.is_empty:
        opened = inside.geom.buffer(-SLIVER, join_style="mitre").buffer(SLIVER, join_style="mitre")
        inside = from_geometry(intersection(inside, from_geometry(opened)).geom)
    return union(E, difference(bumps, inside)), rects


def push_out_gamma_plus(E: PolygonalSet, omega: PolygonalSet, delta: float,
                        universe: Optional[Universe] = None,
                        height_scale: Optional[HeightScale] = None) -> tuple[PolygonalSet, PushoutTrace]:
    """Bump every agreeing-normal overlap outward until none is left.

    ``E`` only grows and only outside ``Ω``.  ``height_scale(mid, normal)``
    optionally shrinks each bump (values are clamped to ``[1e-3, 1]``).
    """
    universe = universe or Universe.around(E, omega)
    tau = universe.tau_meas
    cb0 = common_boundary(E, omega)
    L0 = cb0.length_plus
    if L0 < tau:
        rec = PassRecord(1, "+", delta, 0, 0.0, 0.0, L0, cb0.length_minus, 0.0)
        return E, PushoutTrace([rec])

    d = delta
    for attempt in range(MAX_RETRIES + 1):
        try:
            F, rects = E, []
            for _ in range(MAX_INNER):
                F, new = _push_once(F, omega, d, universe, height_scale)
                rects.extend(new)
                if not new or common_boundary(F, omega).length_plus < tau:
                    break
            break
        except HeightSelectionFailed:
            if attempt == MAX_RETRIES:
                raise
            d /= 2
    cb = common_boundary(F, omega)
    dP = perimeter(F) - perimeter(E)
    rec = PassRecord(1, "+", d, len(rects), dP, area(F) - area(E), cb.length_plus, cb.length_minus,
                     abs(dP) / (d * L0), rects=rects)
    return F, PushoutTrace([rec])


def pull_in_gamma_minus(E: PolygonalSet, omega: PolygonalSet, delta: float,
                        universe: Optional[Universe] = None,
                        height_scale: Optional[HeightScale] = None) -> tuple[PolygonalSet, PushoutTrace]:
    """Dual of :func:`push_out_gamma_plus`: carve opposing overlaps out of ``E``."""
    universe = universe or Universe.around(E, omega)
    Ec = complement(E, universe)
    Fc, trace = push_out_gamma_plus(Ec, omega, delta, universe, height_scale)
    if Fc is Ec:
        F = E
    else:
        F = complement(Fc, universe)
    cb = common_boundary(F, omega)
    for rec in trace.passes:
        rec.direction = "-"
        rec.d_area = area(F) - area(E)
        rec.d_perimeter = perimeter(F) - perimeter(E)
        rec.gamma_plus_after = cb.length_plus
        rec.gamma_minus_after = cb.length_minus
    return F, trace


def remove_common_boundary(E: PolygonalSet, omega: PolygonalSet, eps: float,
                           universe: Optional[Universe] = None,
                           height_scale: Optional[HeightScale] = None,
                           passes: Optional[int] = None) -> tuple[PolygonalSet, PushoutTrace]:
    """Alternate push-out and pull-in passes with budget ``eps / 2**j``.

    Returns ``F`` with ``F ∩ Ω = E ∩ Ω``, ``|F Δ E| < eps``,
    ``|P(F) - P(E)| < eps`` and no common boundary with ``Ω``.

    Raises:
        BudgetExhausted: the pass cap was reached with common boundary left.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    universe = universe or Universe.around(E, omega)
    tau = universe.tau_meas
    limit = passes if passes is not None else max_passes()
    trace = PushoutTrace()
    F = E
    prev_delta = 2 * DELTA_MAX
    cb = common_boundary(F, omega)
    for j in range(1, limit + 1):
        if cb.length < tau:
            return F, trace
        direction = "+" if j % 2 == 1 else "-"
        Lj = cb.length_plus if direction == "+" else cb.length_minus
        budget = eps / 2**j
        if Lj < tau:
            trace.passes.append(PassRecord(j, direction, 0.0, 0, 0.0, 0.0, cb.length_plus,
                                           cb.length_minus, 0.0, budget))
            continue
        delta = min(prev_delta / 2, DELTA_MAX, budget / (4 * Lj))
        step = push_out_gamma_plus if direction == "+" else pull_in_gamma_minus
        for _ in range(40):
            G, sub = step(F, omega, delta, universe, height_scale)
            d_area = area(symmetric_difference(G, F))
            d_per = perimeter(G) - perimeter(F)
            if d_area < budget and abs(d_per) < budget:
                break
            delta /= 2
        else:
            raise BudgetExhausted("could not fit a pass inside its budget", residual=cb.length, result=F)
        rec = sub.passes[0]
        rec.j, rec.direction, rec.budget = j, direction, budget
        rec.d_area = area(G) - area(F)
        rec.d_perimeter = d_per
        F = G
        cb = common_boundary(F, omega)
        rec.gamma_plus_after, rec.gamma_minus_after = cb.length_plus, cb.length_minus
        trace.passes.append(rec)
        prev_delta = rec.delta
    if cb.length < tau:
        return F, trace
    raise BudgetExhausted(f"common boundary {cb.length:.3g} left after {limit} passes",
                          residual=cb.length, result=F)
