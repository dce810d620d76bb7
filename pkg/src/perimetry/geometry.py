"""Planar multi-polygon sets with snap-rounded Boolean overlay.

A :class:`PolygonalSet` is a finite union of simple polygons with holes.  All
coordinates are doubles snapped to a uniform grid of pitch ``TAU_SNAP``; the
overlay itself is delegated to GEOS (through shapely), which performs snap
rounding on the same grid, so repeated overlays never drift.

Area and perimeter are computed here directly from the ring coordinates.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.errors import GEOSException
from shapely.geometry import LinearRing, MultiPolygon, Point, Polygon
from shapely.geometry.polygon import orient

from .errors import (
    DegenerateRing,
    GeometryError,
    NestingViolation,
    OverlayFailure,
    SelfIntersection,
)

TAU_SNAP = 1e-9
TAU_AREA = 1e-12
MARGIN_FACTOR = 10.0
TAU_MEAS_FACTOR = 1e-9

BOOLEAN_KINDS = ("union", "intersection", "difference", "symmetric_difference")


def _shoelace(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _open_ring(coords) -> np.ndarray:
    """Coordinates of a ring without the repeated closing vertex."""
    arr = np.asarray(coords, dtype=float)
    if len(arr) > 1 and np.array_equal(arr[0], arr[-1]):
        arr = arr[:-1]
    return arr


@dataclass(frozen=True, eq=False)
class PolygonalSet:
    """Immutable finite union of polygons with holes.

    Outer rings are stored counter-clockwise and holes clockwise, so the
    interior always lies to the left of every boundary edge.  Use
    :func:`make_polygon_set` or the Boolean operations to build instances.
    """

    geom: MultiPolygon

    @cached_property
    def components(self) -> list[tuple[np.ndarray, list[np.ndarray]]]:
        out = []
        for poly in self.geom.geoms:
            outer = _open_ring(poly.exterior.coords)
            holes = [_open_ring(r.coords) for r in poly.interiors]
            out.append((outer, holes))
        return out

    @cached_property
    def rings(self) -> list[np.ndarray]:
        rings = []
        for outer, holes in self.components:
            rings.append(outer)
            rings.extend(holes)
        return rings

    @cached_property
    def edges(self) -> np.ndarray:
        """All oriented boundary edges as an ``(n, 2, 2)`` array."""
        if not self.rings:
            return np.zeros((0, 2, 2))
        parts = [np.stack([r, np.roll(r, -1, axis=0)], axis=1) for r in self.rings]
        return np.concatenate(parts, axis=0)

    @cached_property
    def vertices(self) -> np.ndarray:
        if not self.rings:
            return np.zeros((0, 2))
        return np.concatenate(self.rings, axis=0)

    @property
    def is_empty(self) -> bool:
        return len(self.geom.geoms) == 0

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return tuple(self.geom.bounds)  # type: ignore[return-value]

    def __len__(self) -> int:
        return len(self.geom.geoms)

    def __repr__(self) -> str:
        n_holes = sum(len(h) for _, h in self.components)
        return (
            f"PolygonalSet(components={len(self)}, holes={n_holes}, "
            f"area={area(self):.6g}, perimeter={perimeter(self):.6g})"
        )


def from_geometry(geom, snap: bool = True) -> PolygonalSet:
    """Wrap an arbitrary shapely geometry, keeping only its areal part.

    Components and holes with area below ``TAU_AREA`` are dropped (holes are
    filled), and ring orientation is normalized.
    """
    if geom is None or geom.is_empty:
        return PolygonalSet(MultiPolygon())
    if snap:
        geom = shapely.set_precision(geom, TAU_SNAP)
    polys = []
    for part in shapely.get_parts(geom):
        if isinstance(part, Polygon):
            polys.append(part)
        elif isinstance(part, MultiPolygon):
            polys.extend(part.geoms)
        elif part.geom_type == "GeometryCollection":
            polys.extend(p for p in shapely.get_parts(part) if isinstance(p, Polygon))
    kept = []
    for poly in polys:
        if poly.is_empty:
            continue
        holes = [r for r in poly.interiors if abs(Polygon(r).area) >= TAU_AREA]
        poly = Polygon(poly.exterior, holes)
        if poly.area < TAU_AREA:
            continue
        poly = orient(poly, sign=1.0)
        kept.append(Polygon(_canonical(poly.exterior.coords), [_canonical(r.coords) for r in poly.interiors]))
    return PolygonalSet(MultiPolygon(kept))


def _canonical(coords) -> np.ndarray:
    """Rotate a ring to start at its lexicographically smallest vertex."""
    ring = _open_ring(coords)
    start = int(np.lexsort((ring[:, 1], ring[:, 0]))[0])
    return np.roll(ring, -start, axis=0)


def empty_set() -> PolygonalSet:
    return PolygonalSet(MultiPolygon())


def _check_ring(coords) -> np.ndarray:
    arr = np.asarray(coords, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"ring must be a list of (x, y) pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("ring contains non-finite coordinates")
    arr = _open_ring(arr)
    if len(arr) > 1:
        step = np.linalg.norm(np.roll(arr, -1, axis=0) - arr, axis=1)
        arr = arr[step >= TAU_SNAP]
    if len(arr) < 3:
        raise DegenerateRing(f"ring has {len(arr)} distinct vertices, need at least 3")
    if not LinearRing(arr).is_simple:
        rel = arr - arr[0]
        far = rel[np.argmax(np.hypot(rel[:, 0], rel[:, 1]))]
        if np.abs(rel[:, 0] * far[1] - rel[:, 1] * far[0]).max() < TAU_AREA:
            raise DegenerateRing("ring vertices are collinear")
        raise SelfIntersection("ring is not simple")
    if abs(_shoelace(arr)) < TAU_AREA:
        raise DegenerateRing("ring encloses (almost) zero area")
    return arr


def make_polygon_set(rings: Iterable[Sequence[Sequence[float]]]) -> PolygonalSet:
    """Build a set from rings, inferring shells and holes from nesting.

    Ring orientation in the input is irrelevant: a ring nested inside an odd
    number of other rings is a hole, otherwise it bounds a component.

    Raises:
        DegenerateRing: fewer than 3 vertices or area below ``TAU_AREA``.
        SelfIntersection: a ring crosses itself.
        NestingViolation: two rings touch or cross.
    """
    arrs = [_check_ring(r) for r in rings]
    if not arrs:
        return empty_set()
    lrings = [LinearRing(a) for a in arrs]
    tree = shapely.STRtree(lrings)
    left, right = tree.query(lrings, predicate="intersects")
    if np.any(left != right):
        i, j = next((a, b) for a, b in zip(left, right) if a != b)
        raise NestingViolation(f"rings {i} and {j} touch or cross")
    faces = [Polygon(a) for a in arrs]
    probes = [Point(a[0]) for a in arrs]
    ftree = shapely.STRtree(faces)
    pts, owners = ftree.query(probes, predicate="within")
    containers: dict[int, list[int]] = {i: [] for i in range(len(arrs))}
    for p, o in zip(pts, owners):
        if p != o:
            containers[int(p)].append(int(o))
    depth = {i: len(c) for i, c in containers.items()}
    shells = [i for i in range(len(arrs)) if depth[i] % 2 == 0]
    holes: dict[int, list[np.ndarray]] = {i: [] for i in shells}
    for i in range(len(arrs)):
        if depth[i] % 2 == 1:
            parent = next(c for c in containers[i] if depth[c] == depth[i] - 1)
            holes[parent].append(arrs[i])
    polys = [Polygon(arrs[i], holes[i]) for i in shells]
    return from_geometry(MultiPolygon(polys))


def rectangle(x0: float, y0: float, x1: float, y1: float) -> PolygonalSet:
    return make_polygon_set([[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]])


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> PolygonalSet:
    """Regular ``n``-gon with vertices on the circle of the given radius."""
    theta = phase + 2 * np.pi * np.arange(n) / n
    pts = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])
    return make_polygon_set([pts])


def boolean(a: PolygonalSet, b: PolygonalSet, kind: str) -> PolygonalSet:
    """Snap-rounded Boolean combination of two sets."""
    ops = {
        "union": shapely.union,
        "intersection": shapely.intersection,
        "difference": shapely.difference,
        "symmetric_difference": shapely.symmetric_difference,
    }
    if kind not in ops:
        raise ValueError(f"unknown boolean kind {kind!r}; expected one of {BOOLEAN_KINDS}")
    try:
        out = ops[kind](a.geom, b.geom, grid_size=TAU_SNAP)
    except GEOSException as exc:
        raise OverlayFailure(f"{kind} overlay failed: {exc}") from exc
    return from_geometry(out, snap=False)


def union(a, b):
    return boolean(a, b, "union")


def intersection(a, b):
    return boolean(a, b, "intersection")


def difference(a, b):
    return boolean(a, b, "difference")


def symmetric_difference(a, b):
    return boolean(a, b, "symmetric_difference")


def union_all(sets: Iterable[PolygonalSet]) -> PolygonalSet:
    geoms = [s.geom for s in sets if not s.is_empty]
    if not geoms:
        return empty_set()
    try:
        out = shapely.union_all(geoms, grid_size=TAU_SNAP)
    except GEOSException as exc:
        raise OverlayFailure(f"union overlay failed: {exc}") from exc
    return from_geometry(out, snap=False)


def area(E: PolygonalSet) -> float:
    """Lebesgue measure via the shoelace formula (holes subtract)."""
    return max(0.0, sum(_shoelace(r) for r in E.rings))


def perimeter(E: PolygonalSet) -> float:
    e = E.edges
    if len(e) == 0:
        return 0.0
    return float(np.linalg.norm(e[:, 1] - e[:, 0], axis=1).sum())


def sym_diff_area(a: PolygonalSet, b: PolygonalSet) -> float:
    return area(symmetric_difference(a, b))


def translate(E: PolygonalSet, dx: float, dy: float) -> PolygonalSet:
    return from_geometry(shapely.affinity.translate(E.geom, dx, dy))


def rotate(E: PolygonalSet, angle: float, origin=(0.0, 0.0)) -> PolygonalSet:
    """Rotate by ``angle`` radians about ``origin``."""
    return from_geometry(shapely.affinity.rotate(E.geom, angle, origin=origin, use_radians=True))


def scale(E: PolygonalSet, factor: float, origin=(0.0, 0.0)) -> PolygonalSet:
    return from_geometry(shapely.affinity.scale(E.geom, factor, factor, origin=origin))


def disk(radius: float, center=(0.0, 0.0), n: int = 256) -> PolygonalSet:
    return regular_polygon(n, radius, center)


@dataclass(frozen=True)
class Universe:
    """Axis-aligned working box that strictly contains every set in a computation."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @classmethod
    def around(cls, *sets: PolygonalSet, margin_factor: float = MARGIN_FACTOR) -> "Universe":
        boxes = [s.bounds for s in sets if not s.is_empty]
        if not boxes:
            x0, y0, x1, y1 = 0.0, 0.0, 1.0, 1.0
        else:
            b = np.array(boxes)
            x0, y0 = b[:, 0].min(), b[:, 1].min()
            x1, y1 = b[:, 2].max(), b[:, 3].max()
        diam = math.hypot(x1 - x0, y1 - y0) or 1.0
        m = margin_factor * diam
        return cls(float(x0 - m), float(y0 - m), float(x1 + m), float(y1 + m))

    @property
    def diameter(self) -> float:
        return math.hypot(self.xmax - self.xmin, self.ymax - self.ymin)

    @property
    def tau_meas(self) -> float:
        """Measurement tolerance: lengths and areas below this count as zero."""
        return TAU_MEAS_FACTOR * self.diameter

    def box(self) -> PolygonalSet:
        return rectangle(self.xmin, self.ymin, self.xmax, self.ymax)

    def contains(self, E: PolygonalSet) -> bool:
        if E.is_empty:
            return True
        x0, y0, x1, y1 = E.bounds
        return x0 > self.xmin and y0 > self.ymin and x1 < self.xmax and y1 < self.ymax


def complement(E: PolygonalSet, universe: Universe) -> PolygonalSet:
    """``Universe \\ E``; the box edge never meets the sets under study."""
    return difference(universe.box(), E)


def to_dict(E: PolygonalSet) -> dict:
    return {
        "polygons": [
            {"outer": outer.tolist(), "holes": [h.tolist() for h in holes]}
            for outer, holes in E.components
        ]
    }


def from_dict(data: dict) -> PolygonalSet:
    if not isinstance(data, dict) or "polygons" not in data:
        raise GeometryError('geometry JSON must be an object with a "polygons" list')
    rings = []
    for poly in data["polygons"]:
        rings.append(poly["outer"])
        rings.extend(poly.get("holes", []))
    return make_polygon_set(rings)


def dumps(E: PolygonalSet) -> str:
    # json uses repr() for floats: the shortest string that round-trips exactly.
    return json.dumps(to_dict(E))


def loads(text: str) -> PolygonalSet:
    return from_dict(json.loads(text))


def atomic_write(path: str | os.PathLike, data: str | bytes) -> None:
    """Write to a sibling temp file, then rename over the target."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_geometry(path: str | os.PathLike) -> PolygonalSet:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def write_geometry(path: str | os.PathLike, E: PolygonalSet) -> None:
    atomic_write(path, dumps(E))
