"""Volume and perimeter with densities, and the weighted approximation pipeline.

A volume density ``f(x)`` weights area; a perimeter density ``g(x, ν)``
weights boundary length and may depend on the outer normal through a convex,
positively 1-homogeneous gauge.  Both come from a small string registry so
the command line can name them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import shapely
from scipy.special import roots_jacobi, roots_legendre

from .boundary import INSIDE, classify_boundary, outward_normals
from .errors import (
    DensitySpecError,
    DiscontinuousDensity,
    GBoundViolated,
    NoAdmissibleRadius,
    NonPositiveDensity,
)
from .geometry import (
    PolygonalSet,
    Universe,
    difference,
    disk,
    intersection,
)

Q_AREA = 7
Q_PERIM = 9
TAU_CONT = 1e-3
RADIUS_GROWTH = 1.1
MAX_RADIUS_STEPS = 400
CIRCLE_VERTICES = 1024


# ---------------------------------------------------------------- densities

@dataclass(frozen=True)
class Density:
    """Positive scalar field from the registry; ``spec`` is its CLI string."""

    spec: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, compare=False)
    continuous: bool = True
    constant: Optional[float] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(self.fn(x, y), np.broadcast(x, y).shape).astype(float)

    def scaled(self, lam: float) -> "Density":
        c = None if self.constant is None else lam * self.constant
        return Density(f"{lam!r}*{self.spec}", lambda x, y: lam * self.fn(x, y), self.continuous, c,
                       dict(self.metadata))


def _floats(text: str, n: int, spec: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")] if text else []
    except ValueError as exc:
        raise DensitySpecError(f"bad numbers in density spec {spec!r}") from exc
    if len(vals) != n:
        raise DensitySpecError(f"density spec {spec!r} needs {n} parameters")
    return vals


def cusp_g_value(x, y):
    """Perimeter density of the cusp counterexample.

    For ``x ≥ 1`` it equals ``e^x`` on ``|y| ≤ 1/(2x²)`` and ``x⁻²`` on
    ``|y| ≥ x⁻²``, joined by a smoothstep in ``|y|``; for ``x < 1`` it
    repeats the profile at ``x = 1``.
    """
    x = np.maximum(np.asarray(x, dtype=float), 1.0)
    ay = np.abs(np.asarray(y, dtype=float))
    inner = 0.5 / x**2
    s = np.clip((ay - inner) / inner, 0.0, 1.0)
    step = s * s * (3.0 - 2.0 * s)
    return np.exp(x) + (x**-2.0 - np.exp(x)) * step


def parse_density(spec: str) -> Density:
    """Build a density from ``const:c``, ``radial-step:r0,inner,outer``,
    ``exp-x``, ``cusp-g`` or ``user-grid:path``."""
    kind, _, rest = spec.strip().partition(":")
    if kind == "const":
        (c,) = _floats(rest, 1, spec)
        if not c > 0:
            raise NonPositiveDensity(f"constant density must be positive, got {c}")
        return Density(spec, lambda x, y: np.full(np.broadcast(x, y).shape, c), True, c)
    if kind == "radial-step":
        r0, inner, outer = _floats(rest, 3, spec)
        if not (inner > 0 and outer > 0):
            raise NonPositiveDensity("radial-step values must be positive")
        return Density(spec, lambda x, y: np.where(np.hypot(x, y) <= r0, inner, outer), False)
    if kind == "exp-x":
        return Density(spec, lambda x, y: np.exp(x) + 0.0 * y, True)
    if kind == "cusp-g":
        return Density(spec, cusp_g_value, True,
                       metadata={"interpolant": "smoothstep 3s^2-2s^3 in |y| between 1/(2x^2) and x^-2"})
    if kind == "user-grid":
        from .smooth import GridField

        if not rest:
            raise DensitySpecError("user-grid needs a file path")
        with open(rest, "rb") as fh:
            grid = GridField.from_bytes(fh.read())
        return Density(spec, grid.sample, True, metadata={"path": rest})
    raise DensitySpecError(f"unknown density kind {kind!r}")


@dataclass(frozen=True)
class Gauge:
    """Positively 1-homogeneous function of the normal."""

    spec: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, compare=False)
    isotropic: bool = False

    def __call__(self, nx, ny) -> np.ndarray:
        return self.fn(np.asarray(nx, dtype=float), np.asarray(ny, dtype=float))


def parse_modulation(spec: str = "isotropic") -> Gauge:
    """``isotropic``, ``ellipse:a,b`` or ``lp:p`` (convex only for ``p ≥ 1``)."""
    kind, _, rest = spec.strip().partition(":")
    if kind == "isotropic":
        return Gauge(spec, lambda nx, ny: np.hypot(nx, ny), True)
    if kind == "ellipse":
        a, b = _floats(rest, 2, spec)
        if not (a > 0 and b > 0):
            raise DensitySpecError("ellipse axes must be positive")
        return Gauge(spec, lambda nx, ny: np.hypot(a * nx, b * ny))
    if kind == "lp":
        (p,) = _floats(rest, 1, spec)
        if not p > 0:
            raise DensitySpecError("lp exponent must be positive")
        return Gauge(spec, lambda nx, ny: (np.abs(nx) ** p + np.abs(ny) ** p) ** (1.0 / p))
    raise DensitySpecError(f"unknown modulation {kind!r}")


def convexity_gate(gauge: Gauge, n_pairs: int = 360) -> bool:
    """Midpoint test on the unit ball ``{v : gauge(v) ≤ 1}``.

    For each direction pair ``(θ, θ + 90°)`` the two boundary points of the
    ball are averaged; a convex ball contains every midpoint.
    """
    theta = 2 * np.pi * np.arange(n_pairs) / n_pairs
    pts = []
    for th in (theta, theta + np.pi / 2):
        u = np.column_stack([np.cos(th), np.sin(th)])
        pts.append(u / gauge(u[:, 0], u[:, 1])[:, None])
    mid = 0.5 * (pts[0] + pts[1])
    return bool(np.all(gauge(mid[:, 0], mid[:, 1]) <= 1.0 + 1e-12))


@dataclass(frozen=True)
class DirectionalDensity:
    base: Density
    modulation: Gauge

    def __call__(self, x, y, nx, ny) -> np.ndarray:
        return self.base(x, y) * self.modulation(nx, ny)

    @property
    def constant(self) -> Optional[float]:
        return self.base.constant if self.modulation.isotropic else None

    def scaled(self, lam: float) -> "DirectionalDensity":
        return DirectionalDensity(self.base.scaled(lam), self.modulation)


def directional(g, modulation: str | Gauge = "isotropic") -> DirectionalDensity:
    if isinstance(g, DirectionalDensity):
        return g
    base = parse_density(g) if isinstance(g, str) else g
    gauge = parse_modulation(modulation) if isinstance(modulation, str) else modulation
    return DirectionalDensity(base, gauge)


def as_density(f) -> Density:
    return parse_density(f) if isinstance(f, str) else f


# ---------------------------------------------------------------- quadrature

def _triangle_rule():
    # conical product: Gauss–Jacobi (weight s) times Gauss–Legendre, exact to degree 7
    xs, ws = roots_jacobi(4, 0.0, 1.0)
    xt, wt = roots_legendre(4)
    s = 0.5 * (1 + xs)
    t = 0.5 * (1 + xt)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws / 4.0, wt / 2.0)
    # integral over the reference triangle of area 1/2 via (s, t) -> (s(1-t), s t)
    return S.ravel(), T.ravel(), W.ravel()


_TRI_S, _TRI_T, _TRI_W = _triangle_rule()
_GL_X, _GL_W = roots_legendre(Q_PERIM)
_GL_X = 0.5 * (1 + _GL_X)
_GL_W = 0.5 * _GL_W


def triangulate(E: PolygonalSet) -> np.ndarray:
    """Constrained Delaunay triangles of E as an ``(n, 3, 2)`` array."""
    if E.is_empty:
        return np.zeros((0, 3, 2))
    tris = shapely.get_parts(shapely.constrained_delaunay_triangles(E.geom))
    if len(tris) == 0:
        return np.zeros((0, 3, 2))
    coords = shapely.get_coordinates(shapely.get_exterior_ring(tris)).reshape(len(tris), 4, 2)
    return coords[:, :3]


def _check_positive(values: np.ndarray, what: str) -> None:
    if values.size and not (np.all(np.isfinite(values)) and np.all(values > 0)):
        raise NonPositiveDensity(f"{what} is not strictly positive at every quadrature point")


def weighted_area(E: PolygonalSet, f) -> float:
    """``∫_E f dx`` by a degree-7 rule on a triangulation of E."""
    f = as_density(f)
    tri = triangulate(E)
    if len(tri) == 0:
        return 0.0
    A, B, C = tri[:, 0], tri[:, 1], tri[:, 2]
    u = _TRI_S * (1 - _TRI_T)
    v = _TRI_S * _TRI_T
    pts = A[:, None, :] + u[None, :, None] * (B - A)[:, None, :] + v[None, :, None] * (C - A)[:, None, :]
    jac = np.abs((B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1]) - (B[:, 1] - A[:, 1]) * (C[:, 0] - A[:, 0]))
    vals = f(pts[..., 0], pts[..., 1])
    _check_positive(vals, "volume density")
    return float(np.sum(jac * (vals @ _TRI_W)))


def segments_integral(segs: np.ndarray, g: DirectionalDensity) -> float:
    """``∫ g(x, ν) dH¹`` over oriented segments (set on their left)."""
    if len(segs) == 0:
        return 0.0
    a, b = segs[:, 0], segs[:, 1]
    L = np.linalg.norm(b - a, axis=1)
    nrm = outward_normals(segs)
    pts = a[:, None, :] + _GL_X[None, :, None] * (b - a)[:, None, :]
    vals = g(pts[..., 0], pts[..., 1], nrm[:, None, 0], nrm[:, None, 1])
    _check_positive(vals, "perimeter density")
    return float(np.sum(L * (vals @ _GL_W)))


def weighted_perimeter(E: PolygonalSet, g, region: Optional[PolygonalSet] = None) -> float:
    """``∫_{∂E} g(x, ν_E) dH¹``, restricted to the open interior of ``region`` if given."""
    g = directional(g)
    segs = E.edges if region is None else classify_boundary(E, region).select(INSIDE)
    return segments_integral(segs, g)


# ---------------------------------------------------------------- continuity

def probe_points(bounds, n: int = 400, seed: int = 0) -> np.ndarray:
    x0, y0, x1, y1 = bounds
    rng = np.random.default_rng(seed)
    return np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])


def max_relative_jump(density: Density, points: np.ndarray, sep: float = 1e-9) -> float:
    """Largest relative change across probe pairs ``sep`` apart (both axes)."""
    base = density(points[:, 0], points[:, 1])
    jump = 0.0
    for dx, dy in ((sep, 0.0), (0.0, sep)):
        other = density(points[:, 0] + dx, points[:, 1] + dy)
        jump = max(jump, float(np.max(np.abs(other - base) / np.maximum(np.abs(base), 1e-300))))
    return jump


def require_continuous(density: Density, sets: list[PolygonalSet]) -> None:
    """Reject densities flagged discontinuous or seen jumping on probe pairs.

    Probes include random points near the sets and points along their edges.

    Raises:
        DiscontinuousDensity: the registry flag or the sampled jump says so.
    """
    if not density.continuous:
        raise DiscontinuousDensity(f"density {density.spec!r} is discontinuous")
    live = [s for s in sets if not s.is_empty]
    if not live:
        return
    b = np.array([s.bounds for s in live])
    x0, y0 = b[:, 0].min(), b[:, 1].min()
    x1, y1 = b[:, 2].max(), b[:, 3].max()
    m = 0.1 * max(x1 - x0, y1 - y0)
    pts = [probe_points((x0 - m, y0 - m, x1 + m, y1 + m))]
    for s in live:
        e = s.edges
        for frac in (0.25, 0.5, 0.75):
            pts.append(e[:, 0] + frac * (e[:, 1] - e[:, 0]))
    if max_relative_jump(density, np.concatenate(pts)) > TAU_CONT:
        raise DiscontinuousDensity(f"density {density.spec!r} jumps between nearby probes")


# ---------------------------------------------------------------- truncation

def _slice_integral(E: PolygonalSet, f: Density, R: float) -> float:
    circle = shapely.LinearRing(disk(R, n=CIRCLE_VERTICES).rings[0])
    cut = shapely.intersection(circle, E.geom)
    coords = [np.asarray(p.coords) for p in shapely.get_parts(shapely.line_merge(cut))
              if p.geom_type == "LineString"] if not cut.is_empty else []
    total = 0.0
    for c in coords:
        a, b = c[:-1], c[1:]
        L = np.linalg.norm(b - a, axis=1)
        pts = a[:, None, :] + _GL_X[None, :, None] * (b - a)[:, None, :]
        total += float(np.sum(L * (f(pts[..., 0], pts[..., 1]) @ _GL_W)))
    return total


def _check_g_bound(E: PolygonalSet, f: Density, g: DirectionalDensity, M: float, radii) -> None:
    pts, nrm = [], []
    e = E.edges
    if len(e):
        n = outward_normals(e)
        for frac in (0.1, 0.5, 0.9):
            pts.append(e[:, 0] + frac * (e[:, 1] - e[:, 0]))
            nrm.append(n)
    theta = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    u = np.column_stack([np.cos(theta), np.sin(theta)])
    for R in radii:
        c = R * u
        inside = shapely.contains_xy(E.geom, c[:, 0], c[:, 1])
        if np.any(inside):
            pts.extend([c[inside]] * 2)
            nrm.extend([u[inside], u[inside][:, ::-1] * np.array([-1.0, 1.0])])
    if not pts:
        return
    P, N = np.concatenate(pts), np.concatenate(nrm)
    gv = g(P[:, 0], P[:, 1], N[:, 0], N[:, 1])
    fv = f(P[:, 0], P[:, 1])
    ratio = gv / fv
    k = int(np.argmax(ratio))
    if ratio[k] > M * (1 + 1e-12):
        raise GBoundViolated(f"g/f reaches {ratio[k]:.4g} > M = {M:g} at ({P[k, 0]:.4g}, {P[k, 1]:.4g})")


@dataclass
class TruncationResult:
    R: float
    R0: float
    slice_integral: float
    tail_area: float
    perimeter_change: float
    scanned: list = field(default_factory=list)


def truncation_radius(E: PolygonalSet, f, g, M: float, eps: float, r_min: Optional[float] = None,
                      max_steps: int = MAX_RADIUS_STEPS, detail: bool = False):
    """Radius ``R`` at which cutting E by the disk ``B_R`` costs less than ``eps``.

    Radii ``r_min · 1.1^k`` are scanned.  ``R0`` is the first with
    ``|E \\ B_R|_f < eps`` and ``P_g(E \\ B_R) < eps/2``; the result is the
    first ``R ≥ R0`` whose slice ``∫_{E ∩ ∂B_R} f`` is at most ``eps/(2M)``
    and for which both cut errors measure below ``eps``.

    Raises:
        GBoundViolated: ``g ≤ M f`` fails at a sampled point.
        NoAdmissibleRadius: the scan ends without an admissible radius.
    """
    f = as_density(f)
    g = directional(g)
    if not (M > 0 and eps > 0):
        raise ValueError("M and eps must be positive")
    if E.is_empty:
        return TruncationResult(0.0, 0.0, 0.0, 0.0, 0.0) if detail else 0.0
    rmax = float(np.max(np.linalg.norm(E.vertices, axis=1)))
    r_min = r_min if r_min is not None else max(1e-3, 0.05 * rmax)
    radii = r_min * RADIUS_GROWTH ** np.arange(max_steps)
    _check_g_bound(E, f, g, M, [r for r in radii if r < rmax])
    PgE = weighted_perimeter(E, g)
    R0 = None
    scanned = []
    for R in radii:
        ball = disk(R, n=CIRCLE_VERTICES)
        inner = intersection(E, ball)
        outer = difference(E, ball)
        tail = weighted_area(outer, f)
        if R0 is None:
            if tail < eps and weighted_perimeter(outer, g) < eps / 2:
                R0 = R
            else:
                scanned.append((float(R), tail, None))
                continue
        sl = _slice_integral(E, f, R)
        dP = abs(weighted_perimeter(inner, g) - PgE)
        scanned.append((float(R), tail, sl))
        if sl <= eps / (2 * M) and tail < eps and dP < eps:
            res = TruncationResult(float(R), float(R0), sl, tail, dP, scanned)
            return res if detail else float(R)
    raise NoAdmissibleRadius(f"no admissible radius up to {radii[-1]:.4g}")


# ---------------------------------------------------------------- pipeline

def _sup_near(E: PolygonalSet, omega: PolygonalSet, f: Density, g: DirectionalDensity) -> float:
    # F stays within a small neighbourhood of E, so only densities there matter
    x0, y0, x1, y1 = (E if not E.is_empty else omega).bounds
    m = 0.1 * max(x1 - x0, y1 - y0)
    P = probe_points((x0 - m, y0 - m, x1 + m, y1 + m), n=2000, seed=1)
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    gmax = max(float(np.max(g(P[:, 0], P[:, 1], np.cos(t), np.sin(t)))) for t in th)
    return max(gmax, float(np.max(f(P[:, 0], P[:, 1]))), 1e-300)


def height_scale_for(g: DirectionalDensity, radius: float) -> Callable:
    """Bump height factor ``g(mid, ν) / M_loc`` with ``M_loc`` sampled near ``mid``."""
    if g.constant is not None:
        return lambda mid, normal: 1.0
    ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    ring = np.column_stack([np.cos(ang), np.sin(ang)])
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)

    def scale(mid, normal):
        P = np.vstack([mid, mid + radius * ring, mid + 0.5 * radius * ring])
        here = float(g(mid[0], mid[1], normal[0], normal[1]))
        m_loc = max(float(np.max(g(P[:, 0], P[:, 1], np.cos(t), np.sin(t)))) for t in th)
        return here / max(m_loc, here)

    return scale


def approximate_weighted(E: PolygonalSet, omega: PolygonalSet, f, g, eps: float,
                         want_bounded: bool = False, M: Optional[float] = None,
                         modulation: str | Gauge = "isotropic",
                         delta: Optional[float] = None, h_g: Optional[float] = None,
                         universe: Optional[Universe] = None):
    """Approximate E with densities: f-volume, g-perimeter and g-perimeter in Ω.

    Returns:
        ``(F, report)`` with an ``ApproxReport`` in weighted mode.

    Raises:
        DiscontinuousDensity: f or g is not continuous in space.
        DensitySpecError: the modulation fails the convexity gate.
        GBoundViolated: ``want_bounded`` and ``g ≤ M f`` fails.
        BudgetExhausted: no resolution meets every clause.
    """
    from .pushout import remove_common_boundary
    from .smooth import refine
    from .verify import check_clauses

    if not eps > 0:
        raise ValueError("eps must be positive")
    f = as_density(f)
    g = directional(g, modulation)
    require_continuous(f, [E, omega])
    require_continuous(g.base, [E, omega])
    if not convexity_gate(g.modulation):
        raise DensitySpecError(f"modulation {g.modulation.spec!r} fails the convexity gate")
    universe = universe or Universe.around(E, omega)
    E0 = E
    budget = eps
    extras: dict = {"f": f.spec, "g": g.base.spec, "modulation": g.modulation.spec}
    if g.base.metadata:
        extras["g_metadata"] = dict(g.base.metadata)
    if want_bounded:
        if M is None:
            raise ValueError("want_bounded needs the bound M with g <= M f")
        R = truncation_radius(E, f, g, M, eps / 4)
        E = intersection(E, disk(R, n=CIRCLE_VERTICES))
        extras["truncation_radius"] = R
        budget = eps / 2
    weight = 1.0
    if f.constant is None or g.constant is None:
        weight = _sup_near(E, omega, f, g)
    elif f.constant != 1.0 or g.constant != 1.0:
        weight = max(f.constant, g.constant)
    geo_eps = budget / weight
    x0, y0, x1, y1 = E.bounds if not E.is_empty else (0, 0, 1, 1)
    hs = height_scale_for(g, 0.05 * max(x1 - x0, y1 - y0))
    G, trace = remove_common_boundary(E, omega, geo_eps / 3, universe,
                                      height_scale=None if g.constant is not None else hs)

    def check(F, more):
        return check_clauses(E0, F, omega, eps, f=f, g=g, mode="weighted", universe=universe,
                             trace=trace, extras={**extras, **more})

    if E.is_empty:
        return E, check(E, {})
    return refine(E0, G, omega, eps, check, delta, h_g, universe, size_eps=geo_eps)
