"""Relative perimeter and the oriented common boundary of two polygonal sets.

Every edge of ``E`` is split where it meets ``∂Ω`` and each piece gets one of
four labels: strictly inside ``Ω``, strictly outside, or lying on ``∂Ω`` with
the outer normals of the two sets agreeing (``PLUS``) or opposing (``MINUS``).
Pieces of positive length along ``∂Ω`` are found by a distance-based
collinearity test, so overlaps that differ by snap rounding still register.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import shapely

from .errors import OverlayFailure
from .geometry import TAU_SNAP, PolygonalSet

TAU_OVERLAP = 1e-7

INSIDE, OUTSIDE, PLUS, MINUS = 0, 1, 2, 3
LABEL_NAMES = {INSIDE: "inside", OUTSIDE: "outside", PLUS: "+", MINUS: "-"}


@dataclass(frozen=True)
class OrientedSegment:
    a: tuple[float, float]
    b: tuple[float, float]
    normal: tuple[float, float]

    @property
    def length(self) -> float:
        return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))


def outward_normals(segs: np.ndarray) -> np.ndarray:
    """Unit outward normals of ``(n, 2, 2)`` segments whose set lies on their left."""
    d = segs[:, 1] - segs[:, 0]
    n = np.column_stack([d[:, 1], -d[:, 0]])
    L = np.linalg.norm(n, axis=1, keepdims=True)
    return n / np.where(L > 0, L, 1.0)


def seg_lengths(segs: np.ndarray) -> np.ndarray:
    if len(segs) == 0:
        return np.zeros(0)
    return np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)


@dataclass(frozen=True, eq=False)
class BoundaryPieces:
    """All pieces of ``∂E`` with their position label relative to ``Ω``."""

    segments: np.ndarray  # (n, 2, 2), oriented with E on the left
    labels: np.ndarray  # (n,) ints in {INSIDE, OUTSIDE, PLUS, MINUS}

    def select(self, label: int) -> np.ndarray:
        return self.segments[self.labels == label]

    def length(self, label: int) -> float:
        return float(seg_lengths(self.select(label)).sum())


@dataclass(frozen=True, eq=False)
class CommonBoundary:
    """Overlap of ``∂E`` and ``∂Ω`` split by orientation.

    ``plus`` holds pieces where the outer normals of E and Ω agree (E lies on
    the Ω side), ``minus`` those where they are opposite.  Both are
    ``(n, 2, 2)`` arrays oriented with E on the left.
    """

    plus: np.ndarray
    minus: np.ndarray

    @property
    def length_plus(self) -> float:
        return float(seg_lengths(self.plus).sum())

    @property
    def length_minus(self) -> float:
        return float(seg_lengths(self.minus).sum())

    @property
    def length(self) -> float:
        return self.length_plus + self.length_minus

    @cached_property
    def gamma_plus(self) -> list[OrientedSegment]:
        return _as_segments(self.plus)

    @cached_property
    def gamma_minus(self) -> list[OrientedSegment]:
        return _as_segments(self.minus)


def _as_segments(segs: np.ndarray) -> list[OrientedSegment]:
    normals = outward_normals(segs) if len(segs) else np.zeros((0, 2))
    return [
        OrientedSegment(tuple(s[0]), tuple(s[1]), tuple(n))  # type: ignore[arg-type]
        for s, n in zip(segs.tolist(), normals.tolist())
    ]


def _candidate_pairs(e_edges: np.ndarray, o_edges: np.ndarray, tol: float):
    lines_e = shapely.linestrings(e_edges)
    lines_o = shapely.linestrings(o_edges)
    tree = shapely.STRtree(lines_o)
    ie, io_ = tree.query(lines_e, predicate="dwithin", distance=tol)
    return ie.astype(int), io_.astype(int)


def classify_boundary(E: PolygonalSet, omega: PolygonalSet, tau_overlap: float = TAU_OVERLAP) -> BoundaryPieces:
    """Split ``∂E`` at ``∂Ω`` and label every piece."""
    e = E.edges
    if len(e) == 0:
        return BoundaryPieces(np.zeros((0, 2, 2)), np.zeros(0, dtype=int))
    o = omega.edges
    if len(o) == 0:
        return BoundaryPieces(e.copy(), np.full(len(e), OUTSIDE))

    ie, jo = _candidate_pairs(e, o, tau_overlap)
    p0, p1 = e[ie, 0], e[ie, 1]
    q0, q1 = o[jo, 0], o[jo, 1]
    dp, dq = p1 - p0, q1 - q0
    lp = np.linalg.norm(dp, axis=1)
    lq = np.linalg.norm(dq, axis=1)

    def cross(u, v):
        return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

    # distance of each endpoint to the other edge's supporting line
    dq0 = np.abs(cross(dp, q0 - p0)) / lp
    dq1 = np.abs(cross(dp, q1 - p0)) / lp
    dp0 = np.abs(cross(dq, p0 - q0)) / lq
    dp1 = np.abs(cross(dq, p1 - q0)) / lq
    collinear = ((dq0 <= tau_overlap) & (dq1 <= tau_overlap)) | ((dp0 <= tau_overlap) & (dp1 <= tau_overlap))

    # overlap interval in the E edge parameter
    sa = np.einsum("ij,ij->i", q0 - p0, dp) / lp**2
    sb = np.einsum("ij,ij->i", q1 - p0, dp) / lp**2
    lo = np.clip(np.minimum(sa, sb), 0.0, 1.0)
    hi = np.clip(np.maximum(sa, sb), 0.0, 1.0)
    overlap = collinear & ((hi - lo) * lp > TAU_SNAP)
    cosang = np.einsum("ij,ij->i", dp, dq) / (lp * lq)
    bad = overlap & (np.abs(cosang) < 0.9) & ((hi - lo) * lp > 1e-6)
    if np.any(bad):
        raise OverlayFailure("boundary overlap with normals neither aligned nor opposite")

    # transversal crossings in the E edge parameter
    denom = cross(dp, dq)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = cross(q0 - p0, dq) / denom
        u = cross(q0 - p0, dp) / denom
    crossing = (~collinear) & (np.abs(denom) > 0) & (s > 0) & (s < 1) & (u >= 0) & (u <= 1)

    splits: dict[int, list[float]] = {}
    intervals: dict[int, list[tuple[float, float, int]]] = {}
    for k in np.flatnonzero(overlap):
        i = int(ie[k])
        splits.setdefault(i, []).extend((lo[k], hi[k]))
        intervals.setdefault(i, []).append((lo[k], hi[k], PLUS if cosang[k] > 0 else MINUS))
    for k in np.flatnonzero(crossing):
        splits.setdefault(int(ie[k]), []).append(s[k])

    untouched = np.ones(len(e), dtype=bool)
    untouched[list(splits)] = False
    seg_out = [e[untouched]]
    pending_mid = [0.5 * (e[untouched, 0] + e[untouched, 1])]
    fixed_labels = [np.full(int(untouched.sum()), -1)]

    for i, ss in splits.items():
        a, b = e[i]
        L = np.linalg.norm(b - a)
        params = np.unique(np.clip(np.concatenate([[0.0, 1.0], ss]), 0.0, 1.0))
        # drop split points closer than the snap grid
        keep = np.concatenate([[True], np.diff(params) * L > TAU_SNAP])
        params = params[keep]
        if params[-1] != 1.0:
            params[-1] = 1.0
        if len(params) < 2:
            params = np.array([0.0, 1.0])
        t0, t1 = params[:-1], params[1:]
        tm = 0.5 * (t0 + t1)
        lab = np.full(len(tm), -1)
        for lo_i, hi_i, sign in intervals.get(i, []):
            lab[(tm > lo_i) & (tm < hi_i)] = sign
        pts0 = a + np.outer(t0, b - a)
        pts1 = a + np.outer(t1, b - a)
        seg_out.append(np.stack([pts0, pts1], axis=1))
        pending_mid.append(a + np.outer(tm, b - a))
        fixed_labels.append(lab)

    segs = np.concatenate(seg_out, axis=0)
    mids = np.concatenate(pending_mid, axis=0)
    labels = np.concatenate(fixed_labels)
    need = labels < 0
    if np.any(need):
        inside = shapely.contains_xy(omega.geom, mids[need, 0], mids[need, 1])
        labels[need] = np.where(inside, INSIDE, OUTSIDE)
    return BoundaryPieces(segs, labels.astype(int))


def common_boundary(E: PolygonalSet, omega: PolygonalSet, tau_overlap: float = TAU_OVERLAP) -> CommonBoundary:
    """Overlap of ``∂E`` with ``∂Ω`` split into agreeing and opposing normals."""
    pieces = classify_boundary(E, omega, tau_overlap)
    return CommonBoundary(pieces.select(PLUS), pieces.select(MINUS))


def relative_perimeter(E: PolygonalSet, omega: PolygonalSet) -> float:
    """Length of ``∂E`` inside the open interior of ``Ω``."""
    return classify_boundary(E, omega).length(INSIDE)


def common_boundary_csv(cb: CommonBoundary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x0", "y0", "x1", "y1", "class", "length"])
    for cls, segs in (("+", cb.plus), ("-", cb.minus)):
        for seg, L in zip(segs.tolist(), seg_lengths(segs).tolist()):
            w.writerow([repr(seg[0][0]), repr(seg[0][1]), repr(seg[1][0]), repr(seg[1][1]), cls, repr(L)])
    return buf.getvalue()
