"""Mollified approximation: grid fields, level sets and the container pipeline.

The indicator of a polygonal set is rasterized with exact cell coverage,
convolved with a compactly supported radial kernel and contoured by marching
squares.  :func:`approximate_in_container` chains this with
:func:`perimetry.pushout.remove_common_boundary` so that the result keeps the
perimeter inside the container as well as the total perimeter.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import MultiPolygon, Polygon

from .boundary import common_boundary, relative_perimeter
from .errors import (
    BudgetExhausted,
    DetachFailed,
    EmptyLevelSet,
    GridTooCoarse,
    NoAdmissibleLevel,
)
from .geometry import (
    TAU_AREA,
    PolygonalSet,
    Universe,
    disk,
    empty_set,
    from_geometry,
    intersection,
    perimeter,
)
from .pushout import PushoutTrace, remove_common_boundary

LEVELS = np.round(np.arange(10, 91) / 100.0, 2)
T_LOW, T_HIGH = 0.1, 0.9
N_SIGMA = 33
SIGMA_DIVISIONS = 64
TAU_LEVEL = 1e-12
TAU_PLATEAU = 1e-12
MAX_REFINE = 12
MAX_NODES = 4_000_000
GRID_PER_DELTA = 3


@dataclass(frozen=True, eq=False)
class GridField:
    """Scalar samples on nodes ``(x0 + i*h, y0 + j*h)``; ``values[j, i]``."""

    origin: tuple[float, float]
    spacing: float
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.values.shape
        return (self.origin[0] + self.spacing * np.arange(nx),
                self.origin[1] + self.spacing * np.arange(ny))

    def sample(self, x, y) -> np.ndarray:
        """Bilinear interpolation; zero outside the grid."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fi = (x - self.origin[0]) / self.spacing
        fj = (y - self.origin[1]) / self.spacing
        return ndimage.map_coordinates(self.values, [fj.ravel(), fi.ravel()], order=1,
                                       mode="constant", cval=0.0).reshape(x.shape)

    def to_bytes(self) -> bytes:
        ny, nx = self.values.shape
        header = struct.pack("<dddII", self.origin[0], self.origin[1], self.spacing, nx, ny)
        return header + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridField":
        size = struct.calcsize("<dddII")
        if len(data) < size:
            raise ValueError("grid field data too short for header")
        x0, y0, h, nx, ny = struct.unpack("<dddII", data[:size])
        body = np.frombuffer(data[size:], dtype="<f8")
        if body.size != nx * ny:
            raise ValueError(f"grid field expects {nx * ny} values, found {body.size}")
        return cls((x0, y0), h, body.reshape(ny, nx).astype(float))


def kernel(delta: float, h: float) -> np.ndarray:
    """Discrete weights of ``(1 - r²/δ²)³`` on ``|r| < δ``, summing to one."""
    r = int(math.ceil(delta / h))
    off = np.arange(-r, r + 1) * h
    d2 = off[None, :] ** 2 + off[:, None] ** 2
    w = np.where(d2 < delta**2, (1.0 - d2 / delta**2) ** 3, 0.0)
    return w / w.sum()


def _piece_integral(c, b):
    """``∫₀¹ max(c + b s, 0) ds`` without cancellation."""
    e = c + b
    both_pos = (c >= 0) & (e >= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        down = np.where((c > 0) & (e < 0), c * c / (2 * np.abs(b)), 0.0)
        up = np.where((c < 0) & (e > 0), e * e / (2 * np.abs(b)), 0.0)
    return np.where(both_pos, c + 0.5 * b, down + up)


def coverage(E: PolygonalSet, x0: float, y0: float, h: float, nx: int, ny: int) -> np.ndarray:
    """Exact area fraction of E in every cell centred on a grid node.

    Uses ``|E ∩ cell| = -∮ clamp(y - y_lo, 0, h) dx`` over ``∂E`` split at
    column boundaries; rows entirely below an edge piece get the full ``h``.
    """
    out = np.zeros((ny + 1, nx))
    e = E.edges
    if len(e) == 0:
        return out[:ny]
    gx0 = x0 - 0.5 * h
    gy0 = y0 - 0.5 * h
    xa, ya, xb, yb = e[:, 0, 0], e[:, 0, 1], e[:, 1, 0], e[:, 1, 1]
    keep = xa != xb
    xa, ya, xb, yb = xa[keep], ya[keep], xb[keep], yb[keep]
    ka = np.floor((xa - gx0) / h).astype(np.int64)
    kb = np.floor((xb - gx0) / h).astype(np.int64)
    nb = np.abs(kb - ka)
    # parameters of column crossings along each edge
    owner = np.repeat(np.arange(len(xa)), nb)
    step = np.arange(nb.sum()) - np.repeat(np.cumsum(nb) - nb, nb)
    lo_k = np.minimum(ka, kb)[owner]
    xcross = gx0 + (lo_k + 1 + step) * h
    s_cross = (xcross - xa[owner]) / (xb[owner] - xa[owner])
    owner_all = np.concatenate([np.arange(len(xa)), np.arange(len(xa)), owner])
    s_all = np.concatenate([np.zeros(len(xa)), np.ones(len(xa)), s_cross])
    order = np.lexsort((s_all, owner_all))
    owner_all, s_all = owner_all[order], s_all[order]
    same = owner_all[1:] == owner_all[:-1]
    o = owner_all[:-1][same]
    s0, s1 = s_all[:-1][same], s_all[1:][same]
    px0 = xa[o] + s0 * (xb[o] - xa[o])
    px1 = xa[o] + s1 * (xb[o] - xa[o])
    py0 = ya[o] + s0 * (yb[o] - ya[o])
    py1 = ya[o] + s1 * (yb[o] - ya[o])
    dx = px1 - px0
    col = np.floor((0.5 * (px0 + px1) - gx0) / h).astype(np.int64)
    ylo = np.minimum(py0, py1)
    yhi = np.maximum(py0, py1)
    jlo = np.floor((ylo - gy0) / h).astype(np.int64)
    jhi = np.floor((yhi - gy0) / h).astype(np.int64)
    if np.any(col < 0) or np.any(col >= nx) or np.any(jlo < 0) or np.any(jhi >= ny):
        raise ValueError("set does not fit inside the coverage grid")
    # full rows below the piece
    full = np.zeros((ny + 1, nx))
    np.add.at(full, (np.zeros_like(col), col), -dx * h)
    np.add.at(full, (jlo, col), dx * h)
    out += np.cumsum(full, axis=0)
    # rows spanned by the piece
    nr = jhi - jlo + 1
    rp = np.repeat(np.arange(len(o)), nr)
    rows = jlo[rp] + np.arange(nr.sum()) - np.repeat(np.cumsum(nr) - nr, nr)
    ylow = gy0 + rows * h
    c = py0[rp] - ylow
    b = (py1 - py0)[rp]
    val = -dx[rp] * (_piece_integral(c, b) - _piece_integral(c - h, b))
    np.add.at(out, (rows, col[rp]), val)
    return np.clip(out[:ny] / (h * h), 0.0, 1.0)


def mollify(E: PolygonalSet, delta: float, h_g: Optional[float] = None,
            bounded_cut: Optional[float] = None) -> GridField:
    """Convolve the indicator of E with the radial kernel of radius ``delta``.

    The grid covers the ``delta + 2 h_g`` neighbourhood of E; the field is
    zero beyond it.

    Raises:
        GridTooCoarse: ``delta < 2 * h_g``.
    """
    h = h_g if h_g is not None else delta / GRID_PER_DELTA
    if not (h > 0 and delta > 0):
        raise ValueError("delta and grid spacing must be positive")
    if delta < 2 * h:
        raise GridTooCoarse(f"delta {delta:.3g} is below twice the grid spacing {h:.3g}")
    if bounded_cut is not None:
        E = intersection(E, disk(bounded_cut, n=512))
    if E.is_empty:
        return GridField((0.0, 0.0), h, np.zeros((3, 3)))
    x0, y0, x1, y1 = E.bounds
    pad = delta + 2 * h
    i0 = math.floor((x0 - pad) / h)
    j0 = math.floor((y0 - pad) / h)
    nx = math.ceil((x1 + pad) / h) - i0 + 1
    ny = math.ceil((y1 + pad) / h) - j0 + 1
    if nx * ny > MAX_NODES:
        raise GridTooCoarse(f"grid of {nx}x{ny} nodes exceeds the node budget")
    ox, oy = i0 * h, j0 * h
    cov = coverage(E, ox, oy, h, nx, ny)
    phi = ndimage.convolve(cov, kernel(delta, h), mode="constant", cval=0.0)
    # summation round-off only; keeps the exact 0 and 1 plateaus
    phi[phi < TAU_PLATEAU] = 0.0
    phi[phi > 1.0 - TAU_PLATEAU] = 1.0
    return GridField((ox, oy), h, phi)


# Marching squares.  Cell corners in counter-clockwise order a, b, c, d with
# a at the lower left; cell edge k joins corner k to corner k + 1.

def _case_table():
    table = {}
    for case in range(16):
        inside = [(case >> k) & 1 for k in range(4)]
        out_edges = [k for k in range(4) if inside[k] and not inside[(k + 1) % 4]]
        in_edges = [k for k in range(4) if not inside[k] and inside[(k + 1) % 4]]
        if len(out_edges) == 1:
            table[case] = ([(out_edges[0], in_edges[0])], [(out_edges[0], in_edges[0])])
        elif len(out_edges) == 2:
            # saddle: pair with the next crossing when the centre is inside,
            # with the previous one otherwise
            nxt = [(k, (k + 1) % 4) for k in out_edges]
            prv = [(k, (k - 1) % 4) for k in out_edges]
            table[case] = (nxt, prv)
    return table


_CASES = _case_table()


def _edge_geometry(V: np.ndarray, t: float, jj: np.ndarray, ii: np.ndarray, k: int):
    """Global edge id and crossing point (index units) of local edge ``k``."""
    NY, NX = V.shape
    n_h = NY * (NX - 1)
    if k == 0 or k == 2:
        j = jj + (k == 2)
        v0, v1 = V[j, ii], V[j, ii + 1]
        f = (t - v0) / (v1 - v0)
        return j * (NX - 1) + ii, ii + f, j.astype(float)
    i = ii + (k == 1)
    v0, v1 = V[jj, i], V[jj + 1, i]
    f = (t - v0) / (v1 - v0)
    return n_h + jj * NX + i, i.astype(float), jj + f


def _march(V: np.ndarray, t: float, jj: Optional[np.ndarray] = None, ii: Optional[np.ndarray] = None):
    """Oriented contour segments of ``{V > t}`` (interior on the left)."""
    if jj is None:
        jj, ii = np.mgrid[0 : V.shape[0] - 1, 0 : V.shape[1] - 1]
        jj, ii = jj.ravel(), ii.ravel()
    a = V[jj, ii] > t
    b = V[jj, ii + 1] > t
    c = V[jj + 1, ii + 1] > t
    d = V[jj + 1, ii] > t
    case = a * 1 + b * 2 + c * 4 + d * 8
    centre = 0.25 * (V[jj, ii] + V[jj, ii + 1] + V[jj + 1, ii + 1] + V[jj + 1, ii]) > t
    sid, eid, sx, sy, ex, ey = [], [], [], [], [], []
    for cs, (nxt, prv) in _CASES.items():
        sel = case == cs
        if not np.any(sel):
            continue
        groups = [(sel, nxt)] if nxt == prv else [(sel & centre, nxt), (sel & ~centre, prv)]
        for mask, pairs in groups:
            if not np.any(mask):
                continue
            cj, ci = jj[mask], ii[mask]
            for k_from, k_to in pairs:
                i0, x0, y0 = _edge_geometry(V, t, cj, ci, k_from)
                i1, x1, y1 = _edge_geometry(V, t, cj, ci, k_to)
                sid.append(i0), eid.append(i1)
                sx.append(x0), sy.append(y0), ex.append(x1), ey.append(y1)
    if not sid:
        z = np.zeros(0)
        return z.astype(np.int64), z.astype(np.int64), z, z, z, z
    cat = np.concatenate
    return cat(sid), cat(eid), cat(sx), cat(sy), cat(ex), cat(ey)


def _padded(phi: GridField) -> np.ndarray:
    return np.pad(phi.values, 1, mode="constant", constant_values=0.0)


def _safe_level(V: np.ndarray, t: float) -> float:
    while np.any(V == t):
        t = t + TAU_LEVEL
    return t


def _rings_to_set(rings: list[np.ndarray]) -> PolygonalSet:
    shells, holes = [], []
    for r in rings:
        if len(r) < 3:
            continue
        x, y = r[:, 0], r[:, 1]
        a = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        if abs(a) < TAU_AREA:
            continue
        (shells if a > 0 else holes).append((abs(a), r))
    if not shells:
        return empty_set()
    shell_polys = [Polygon(r) for _, r in shells]
    assigned: list[list[np.ndarray]] = [[] for _ in shells]
    if holes:
        tree = shapely.STRtree(shell_polys)
        probes = shapely.points(np.array([r[0] for _, r in holes]))
        hi, si = tree.query(probes, predicate="within")
        best: dict[int, int] = {}
        for h_idx, s_idx in zip(hi, si):
            cur = best.get(int(h_idx))
            if cur is None or shells[s_idx][0] < shells[cur][0]:
                best[int(h_idx)] = int(s_idx)
        for h_idx, s_idx in best.items():
            assigned[s_idx].append(holes[h_idx][1])
    polys = [Polygon(r, assigned[k]) for k, (_, r) in enumerate(shells)]
    geom = MultiPolygon(polys)
    if not geom.is_valid:
        geom = shapely.make_valid(geom)
    return from_geometry(geom)


def extract_level_set(phi: GridField, t: float) -> PolygonalSet:
    """Marching-squares superlevel set ``{φ > t}`` as a polygonal set.

    Raises:
        EmptyLevelSet: ``t`` is at or above a positive maximum of ``φ``.
    """
    vmax = float(phi.values.max()) if phi.values.size else 0.0
    if vmax <= 0.0:
        return empty_set()
    if t >= vmax:
        raise EmptyLevelSet(f"level {t} is not below max(phi) = {vmax}")
    V = _padded(phi)
    t = _safe_level(V, t)
    sid, eid, sx, sy, _, _ = _march(V, t)
    order = np.argsort(sid, kind="stable")
    succ = order[np.searchsorted(sid[order], eid)]
    h = phi.spacing
    px = phi.origin[0] + (sx - 1.0) * h
    py = phi.origin[1] + (sy - 1.0) * h
    seen = np.zeros(len(sid), dtype=bool)
    rings = []
    for start in range(len(sid)):
        if seen[start]:
            continue
        idx = []
        k = start
        while not seen[k]:
            seen[k] = True
            idx.append(k)
            k = succ[k]
        ring = np.column_stack([px[idx], py[idx]])
        keep = np.linalg.norm(ring - np.roll(ring, 1, axis=0), axis=1) > 1e-12
        rings.append(ring[keep])
    return _rings_to_set(rings)


def _cell_ranges(V: np.ndarray, lo: float, hi: float):
    """Band cells whose value range meets ``(lo, hi)`` with their min and max."""
    corners = (V[:-1, :-1], V[:-1, 1:], V[1:, 1:], V[1:, :-1])
    mn = np.minimum.reduce(corners)
    mx = np.maximum.reduce(corners)
    jj, ii = np.nonzero((mx > lo) & (mn < hi))
    return jj, ii, mn[jj, ii], mx[jj, ii]


def level_perimeter(phi: GridField, t: float) -> float:
    """Total length of the marching-squares contour at level ``t``."""
    V = _padded(phi)
    jj, ii, mn, mx = _cell_ranges(V, t, t)
    return _level_length(V, t, jj, ii, mn, mx) * phi.spacing


def _level_length(V, t, jj, ii, mn, mx, phi: Optional[GridField] = None, omega: Optional[PolygonalSet] = None):
    """Contour length in grid units; with ``omega`` also the part inside ``Ω``."""
    act = (mn < t) & (mx > t)
    _, _, sx, sy, ex, ey = _march(V, t, jj[act], ii[act])
    seg = np.hypot(ex - sx, ey - sy)
    if omega is None:
        return float(seg.sum())
    h = phi.spacing
    mx_ = phi.origin[0] + (0.5 * (sx + ex) - 1.0) * h
    my_ = phi.origin[1] + (0.5 * (sy + ey) - 1.0) * h
    return float(seg.sum()), float(seg[shapely.contains_xy(omega.geom, mx_, my_)].sum())


def _degenerate(V: np.ndarray, t: float, jj, ii, mn, mx) -> bool:
    near = (mn <= t + TAU_LEVEL) & (mx >= t - TAU_LEVEL)
    jj, ii = jj[near], ii[near]
    corners = [V[jj, ii], V[jj, ii + 1], V[jj + 1, ii + 1], V[jj + 1, ii]]
    if any(np.any(np.abs(c - t) < TAU_LEVEL) for c in corners):
        return True
    ins = [c > t for c in corners]
    saddle = (ins[0] == ins[2]) & (ins[1] == ins[3]) & (ins[0] != ins[1])
    centre = 0.25 * sum(corners)
    return bool(np.any(saddle & (np.abs(centre - t) < 1e-9)))


def choose_level(phi: GridField, E: PolygonalSet, omega: Optional[PolygonalSet] = None) -> float:
    """Level in ``{0.10, ..., 0.90}`` whose contour length is closest to ``P(E)``.

    With ``omega`` the mismatch is the larger of the total and the in-``Ω``
    length gaps, so the level set does not cross back over a thin clearance.

    Raises:
        NoAdmissibleLevel: every candidate level is degenerate.
    """
    target = perimeter(E)
    target_in = relative_perimeter(E, omega) if omega is not None else 0.0
    V = _padded(phi)
    jj, ii, mn, mx = _cell_ranges(V, T_LOW - 0.01, T_HIGH + 0.01)
    best_t, best_gap = None, math.inf
    for t in LEVELS:
        t = float(t)
        if _degenerate(V, t, jj, ii, mn, mx):
            continue
        if omega is None:
            gap = abs(_level_length(V, t, jj, ii, mn, mx) * phi.spacing - target)
        else:
            total, inside = _level_length(V, t, jj, ii, mn, mx, phi, omega)
            gap = max(abs(total * phi.spacing - target), abs(inside * phi.spacing - target_in))
        if gap < best_gap:
            best_t, best_gap = t, gap
    if best_t is None:
        raise NoAdmissibleLevel("every level in the admissible band is degenerate")
    return best_t


def _detach(phi: GridField, t: float, omega: PolygonalSet, universe: Universe):
    eta = (T_HIGH - t) / SIGMA_DIVISIONS
    lengths = []
    for k in range(N_SIGMA):
        sigma = k * eta
        G = extract_level_set(phi, t + sigma)
        L = common_boundary(G, omega).length
        if L < universe.tau_meas:
            return G, sigma
        lengths.append(L)
    raise DetachFailed("every level shift leaves common boundary with the container", lengths)


def detach(F: PolygonalSet, phi: GridField, t: float, omega: PolygonalSet,
           universe: Optional[Universe] = None) -> PolygonalSet:
    """Shift the level upward until the contour shares no boundary with Ω.

    Raises:
        DetachFailed: all ``N_SIGMA`` shifts fail; ``lengths`` lists the overlaps.
    """
    universe = universe or Universe.around(F, omega)
    if common_boundary(F, omega).length < universe.tau_meas:
        return F
    return _detach(phi, t, omega, universe)[0]


@dataclass
class SmoothResult:
    F: PolygonalSet
    delta: float
    grid: float
    level: float
    sigma: float
    field_: GridField = field(repr=False)


def smooth_phase(G: PolygonalSet, omega: PolygonalSet, delta: float, h_g: Optional[float] = None,
                 universe: Optional[Universe] = None) -> SmoothResult:
    """Mollify G, pick a level and detach it from Ω (one resolution)."""
    universe = universe or Universe.around(G, omega)
    h = h_g if h_g is not None else delta / GRID_PER_DELTA
    phi = mollify(G, delta, h)
    if G.is_empty:
        return SmoothResult(empty_set(), delta, h, 0.5, 0.0, phi)
    t = choose_level(phi, G, omega)
    F, sigma = _detach(phi, t, omega, universe)
    return SmoothResult(F, delta, h, t, sigma, phi)


def initial_delta(G: PolygonalSet, eps: float) -> float:
    x0, y0, x1, y1 = G.bounds
    size = max(x1 - x0, y1 - y0)
    # smallest radius whose grid fits in half the node budget
    fit = GRID_PER_DELTA * math.sqrt((x1 - x0) * (y1 - y0) / (0.5 * MAX_NODES))
    return min(0.1 * size, max(eps / (2 * max(perimeter(G), 1e-12)), fit))


def refine(E: PolygonalSet, G: PolygonalSet, omega: PolygonalSet, eps: float, check,
           delta: Optional[float] = None, h_g: Optional[float] = None,
           universe: Optional[Universe] = None, max_refine: int = MAX_REFINE, size_eps: Optional[float] = None):
    """Halve the mollification radius until ``check(F, extras)`` passes.

    Raises:
        BudgetExhausted: no radius within ``max_refine`` halvings passes.
    """
    universe = universe or Universe.around(E, omega)
    d = delta if delta is not None else initial_delta(G, eps if size_eps is None else size_eps)
    ratio = (h_g / d) if (h_g is not None and delta is not None) else 1.0 / GRID_PER_DELTA
    best = None
    for _ in range(max_refine + 1):
        try:
            res = smooth_phase(G, omega, d, d * ratio, universe)
        except GridTooCoarse:
            break
        report = check(res.F, {"delta": d, "grid": d * ratio, "level": res.level, "sigma": res.sigma})
        if report.verdict:
            return res.F, report
        if best is None or report.worst_ratio < best[1].worst_ratio:
            best = (res.F, report)
        d /= 2
    raise BudgetExhausted("no mollification radius met every clause",
                          result=best[0] if best else None, report=best[1] if best else None)


def approximate_in_container(E: PolygonalSet, omega: PolygonalSet, eps: float,
                             delta: Optional[float] = None, h_g: Optional[float] = None,
                             universe: Optional[Universe] = None, skip_pushout: bool = False,
                             max_refine: int = MAX_REFINE):
    """Polygonal "smooth" F close to E in area, perimeter and perimeter inside Ω.

    First the common boundary of E and Ω is removed with a third of the
    budget, then the mollification radius is halved until every clause of the
    report holds.  ``skip_pushout`` omits the first phase (control runs).

    Returns:
        ``(F, report)`` with an :class:`perimetry.verify.ApproxReport`.

    Raises:
        BudgetExhausted: no radius within ``max_refine`` halvings passes.
    """
    from .verify import check_clauses

    if not eps > 0:
        raise ValueError("eps must be positive")
    universe = universe or Universe.around(E, omega)
    if skip_pushout:
        G, trace = E, PushoutTrace()
    else:
        G, trace = remove_common_boundary(E, omega, eps / 3, universe)

    def check(F, extras):
        return check_clauses(E, F, omega, eps, mode="approx", universe=universe, trace=trace, extras=extras)

    if E.is_empty:
        return E, check(E, {})
    return refine(E, G, omega, eps, check, delta, h_g, universe, max_refine)
