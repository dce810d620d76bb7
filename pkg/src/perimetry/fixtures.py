"""Seeded random fixtures shared by the tests and the command line.

Container/set pairs share boundary along a random x-monotone polyline ``P``
from ``x = 0`` to ``x = 1``.  The container ``Ω`` is the region between ``P``
and ``y = 0``; sets are thin strips on either side of ``P`` or slabs of ``Ω``,
so their common boundary with ``Ω`` has positive length and a known sign.
"""

from __future__ import annotations

import numpy as np
import shapely

from .geometry import TAU_AREA, PolygonalSet, make_polygon_set, rectangle, union

FAMILIES = ("strips", "slab", "mixed")
FLANGE_MIN_AREA = 100 * TAU_AREA


def random_polyline(rng: np.random.Generator, n: int = 9) -> np.ndarray:
    x = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, n - 2)), [1.0]])
    keep = np.concatenate([[True], np.diff(x) > 0.02])
    x = x[keep]
    y = 0.5 + 0.15 * rng.uniform(-1.0, 1.0, len(x))
    return np.round(np.column_stack([x, y]), 6)


def _piece(P: np.ndarray, a: float, b: float) -> np.ndarray:
    """Part of the polyline with ``a ≤ x ≤ b``, endpoints interpolated."""
    ya, yb = np.interp([a, b], P[:, 0], P[:, 1])
    mid = P[(P[:, 0] > a) & (P[:, 0] < b)]
    return np.vstack([[a, ya], mid, [b, yb]])


def container(P: np.ndarray) -> PolygonalSet:
    return make_polygon_set([np.vstack([[[0.0, 0.0], [1.0, 0.0]], P[::-1]])])


def strip(P: np.ndarray, a: float, b: float, w: float) -> PolygonalSet:
    """Band of vertical width ``|w|`` along ``P`` on ``[a, b]``; above P when ``w > 0``."""
    top = _piece(P, a, b)
    shifted = top + np.array([0.0, w])
    return make_polygon_set([np.vstack([top, shifted[::-1]])])


def slab(P: np.ndarray, a: float, b: float) -> PolygonalSet:
    """``Ω ∩ {a ≤ x ≤ b}``."""
    top = _piece(P, a, b)
    return make_polygon_set([np.vstack([[[a, 0.0], [b, 0.0]], top[::-1]])])


def random_fixture(seed: int, family: str | None = None) -> tuple[PolygonalSet, PolygonalSet, str]:
    """Return ``(E, Ω, family)`` for a seed; the family cycles with the seed if not given."""
    rng = np.random.default_rng(seed)
    family = family or FAMILIES[seed % len(FAMILIES)]
    P = random_polyline(rng)
    omega = container(P)
    if family == "strips":
        c = round(rng.uniform(0.35, 0.65), 6)
        a1, b1, a2, b2 = 0.05, c - 0.03, c + 0.03, 0.95
        w1, w2 = rng.uniform(0.04, 0.12, 2)
        E = union(strip(P, a1, b1, -w1), strip(P, a2, b2, w2))
    elif family == "slab":
        a = rng.uniform(0.0, 0.3)
        b = rng.uniform(0.7, 1.0)
        E = slab(P, round(a, 6), round(b, 6))
    elif family == "mixed":
        m = round(rng.uniform(0.35, 0.55), 6)
        E = union(slab(P, 0.0, m), strip(P, m + 0.05, 0.95, rng.uniform(0.04, 0.12)))
    else:
        raise ValueError(f"unknown fixture family {family!r}")
    return E, omega, family


def random_convex_polygon(seed: int, n: int = 12) -> PolygonalSet:
    """Convex hull of random points in a randomly placed box of size about one."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.5, 0.5, (n, 2)) * rng.uniform(0.3, 1.5, 2) + rng.uniform(-2, 2, 2)
    return make_polygon_set([np.asarray(shapely.MultiPoint(pts).convex_hull.exterior.coords)[:-1]])


def flange_sequence(n: int = 40) -> list[PolygonalSet]:
    """Unit square with disjoint flanges of side ``2^-(k+1)`` added one per step.

    Flanges whose area falls below the component floor are negligible and
    dropped, so the tail of the sequence is constant at working precision.
    """
    seq = [rectangle(0, 0, 1, 1)]
    x = 0.0
    for k in range(1, n):
        s = 2.0 ** -(k + 1)
        if s * s < FLANGE_MIN_AREA:
            seq.append(seq[-1])
            continue
        seq.append(union(seq[-1], rectangle(x, 1.0, x + s, 1.0 + s)))
        x += 1.5 * s
    return seq


def shift_sequence(n: int = 40, shift: float = 0.1) -> list[PolygonalSet]:
    """Unit square alternately in place and shifted right; never settles."""
    return [rectangle(shift * (k % 2), 0, 1 + shift * (k % 2), 1) for k in range(n)]
