"""Independent oracles and the clause-by-clause approximation report.

Nothing here trusts the constructing modules: reports are recomputed from
``(E, F, Ω)`` with the measuring primitives, and the two oracles (raster
area, Cauchy–Crofton perimeter) share no code with the overlay engine.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .boundary import INSIDE, classify_boundary, common_boundary
from .errors import SequenceTooShort
from .geometry import (
    PolygonalSet,
    Universe,
    area,
    intersection,
    perimeter,
    symmetric_difference,
)

CLAUSES = {
    "pushout": ("A1_area", "A1_perimeter", "A2", "A3", "A4"),
    "approx": ("B1_in", "B1_total", "B2", "B3"),
    "weighted": ("W1_in", "W1_total", "W2", "W3"),
}


# ---------------------------------------------------------------- oracles

def _clip_halfplane(poly: list[tuple[float, float]], axis: int, bound: float, keep_below: bool):
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        pin = (p[axis] <= bound) if keep_below else (p[axis] >= bound)
        qin = (q[axis] <= bound) if keep_below else (q[axis] >= bound)
        if pin:
            out.append(p)
        if pin != qin:
            s = (bound - p[axis]) / (q[axis] - p[axis])
            out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    return out


def _clipped_signed_area(ring: np.ndarray, x0, y0, x1, y1) -> float:
    poly = [tuple(v) for v in ring.tolist()]
    for axis, bound, below in ((0, x0, False), (0, x1, True), (1, y0, False), (1, y1, True)):
        if not poly:
            return 0.0
        poly = _clip_halfplane(poly, axis, bound, below)
    if len(poly) < 3:
        return 0.0
    a = 0.0
    for k in range(len(poly)):
        (xa, ya), (xb, yb) = poly[k], poly[(k + 1) % len(poly)]
        a += xa * yb - xb * ya
    return 0.5 * a


def _even_odd(rings: list[np.ndarray], px: np.ndarray, py: np.ndarray) -> np.ndarray:
    inside = np.zeros(px.shape, dtype=bool)
    for r in rings:
        xa, ya = r[:, 0], r[:, 1]
        xb, yb = np.roll(xa, -1), np.roll(ya, -1)
        for k in range(len(r)):
            straddle = (ya[k] > py) != (yb[k] > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = xa[k] + (py - ya[k]) * (xb[k] - xa[k]) / (yb[k] - ya[k])
            inside ^= straddle & (px < xc)
    return inside


def raster_area_oracle(E: PolygonalSet, resolution: int = 64) -> float:
    """Area by pixel counting with exact clipping on boundary pixels.

    Pixels have side ``1/resolution``.  Pixels met by an edge are clipped
    against every ring; the rest are counted by an even-odd test at their
    centre.
    """
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    if E.is_empty:
        return 0.0
    h = 1.0 / resolution
    x0, y0, x1, y1 = E.bounds
    i0, j0 = math.floor(x0 / h) - 1, math.floor(y0 / h) - 1
    nx, ny = math.ceil(x1 / h) - i0 + 1, math.ceil(y1 / h) - j0 + 1
    touched = np.zeros((ny, nx), dtype=bool)
    for (ax, ay), (bx, by) in E.edges.tolist():
        ci = np.arange(math.floor(min(ax, bx) / h) - i0, math.floor(max(ax, bx) / h) - i0 + 1)
        cj = np.arange(math.floor(min(ay, by) / h) - j0, math.floor(max(ay, by) / h) - j0 + 1)
        gi, gj = np.meshgrid(ci, cj)
        cx0, cy0 = (gi + i0) * h, (gj + j0) * h
        # the segment meets the pixel iff the pixel corners are not all on one side
        side = [(bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
                for cx, cy in ((cx0, cy0), (cx0 + h, cy0), (cx0 + h, cy0 + h), (cx0, cy0 + h))]
        s = np.stack(side)
        hit = ~((s > 0).all(axis=0) | (s < 0).all(axis=0))
        touched[gj[hit], gi[hit]] = True
    jj, ii = np.nonzero(~touched)
    centres_x = (ii + i0 + 0.5) * h
    centres_y = (jj + j0 + 0.5) * h
    total = float(_even_odd(E.rings, centres_x, centres_y).sum()) * h * h
    for j, i in zip(*np.nonzero(touched)):
        cx, cy = (i + i0) * h, (j + j0) * h
        total += sum(_clipped_signed_area(r, cx, cy, cx + h, cy + h) for r in E.rings)
    return float(total)


def crofton_perimeter_oracle(E: PolygonalSet, n_lines: int = 100_000, seed: int = 0,
                             batch: int = 20_000) -> tuple[float, float]:
    """Cauchy–Crofton perimeter estimate and its Monte Carlo standard error.

    Lines ``{x : x·(cos θ, sin θ) = p}`` are drawn with ``θ`` uniform in
    ``[0, π)`` and ``p`` uniform over the disk enclosing E; the length is
    ``π R`` times the mean number of boundary crossings.
    """
    if n_lines < 1000:
        raise ValueError("n_lines must be at least 1000")
    if E.is_empty:
        return 0.0, 0.0
    x0, y0, x1, y1 = E.bounds
    c = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
    R = 0.5 * math.hypot(x1 - x0, y1 - y0) * 1.01
    e = E.edges - c
    rng = np.random.default_rng(seed)
    counts = np.empty(n_lines)
    for start in range(0, n_lines, batch):
        m = min(batch, n_lines - start)
        theta = rng.uniform(0.0, math.pi, m)
        p = rng.uniform(-R, R, m)
        u = np.column_stack([np.cos(theta), np.sin(theta)])
        s0 = u @ e[:, 0].T - p[:, None]
        s1 = u @ e[:, 1].T - p[:, None]
        counts[start : start + m] = ((s0 > 0) != (s1 > 0)).sum(axis=1)
    scale = math.pi * R
    return float(scale * counts.mean()), float(scale * counts.std(ddof=1) / math.sqrt(n_lines))


# ---------------------------------------------------------------- reports

@dataclass
class ApproxReport:
    """Measured quantities of an approximation against its budget.

    The verdict is always recomputed from the stored measurements.
    """

    mode: str
    eps: float
    tau_meas: float
    d_per_in: float
    d_per_total: float
    d_vol: float
    cb_len: float
    d_in_container: float = 0.0
    passes: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def clauses(self) -> dict[str, tuple[float, float]]:
        """Clause name -> (measured, budget); a clause holds iff measured < budget."""
        tau = self.tau_meas
        if self.mode == "pushout":
            return {
                "A1_area": (self.d_in_container, tau),
                "A1_perimeter": (self.d_per_in, 10 * tau),
                "A2": (self.d_vol, self.eps),
                "A3": (self.d_per_total, self.eps),
                "A4": (self.cb_len, tau),
            }
        names = CLAUSES[self.mode]
        values = (self.d_per_in, self.d_per_total, self.d_vol, self.cb_len)
        budgets = (self.eps, self.eps, self.eps, tau)
        return {n: (v, b) for n, v, b in zip(names, values, budgets)}

    @property
    def clause_verdicts(self) -> dict[str, bool]:
        return {k: v < b for k, (v, b) in self.clauses.items()}

    @property
    def verdict(self) -> bool:
        return all(self.clause_verdicts.values())

    @property
    def failed(self) -> list[str]:
        return [k for k, ok in self.clause_verdicts.items() if not ok]

    @property
    def worst_ratio(self) -> float:
        return max(v / b for v, b in self.clauses.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["clauses"] = {k: {"measured": v, "budget": b, "pass": v < b} for k, (v, b) in self.clauses.items()}
        d["verdict"] = "pass" if self.verdict else "fail"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ApproxReport":
        keys = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in keys})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["clause", "measured", "budget", "pass"])
        for k, (v, b) in self.clauses.items():
            w.writerow([k, repr(float(v)), repr(float(b)), "pass" if v < b else "fail"])
        w.writerow(["verdict", "", "", "pass" if self.verdict else "fail"])
        return buf.getvalue()


def check_clauses(E: PolygonalSet, F: PolygonalSet, omega: PolygonalSet, eps: float,
                  f=None, g=None, mode: Optional[str] = None, universe: Optional[Universe] = None,
                  trace=None, extras: Optional[dict] = None) -> ApproxReport:
    """Measure every clause relating the approximation F to E within Ω.

    ``mode`` is ``"pushout"`` (common-boundary removal: F must agree with E
    inside Ω), ``"approx"`` or ``"weighted"`` (chosen automatically when a
    density is given).
    """
    from .weighted import weighted_area, weighted_perimeter

    universe = universe or Universe.around(E, F, omega)
    if mode is None:
        mode = "weighted" if (f is not None or g is not None) else "approx"
    diff = symmetric_difference(F, E)
    if mode == "weighted":
        d_vol = weighted_area(diff, f) if f is not None else area(diff)
        if g is not None:
            pe, pf = weighted_perimeter(E, g), weighted_perimeter(F, g)
            pe_in, pf_in = weighted_perimeter(E, g, omega), weighted_perimeter(F, g, omega)
        else:
            pe, pf = perimeter(E), perimeter(F)
            pe_in = classify_boundary(E, omega).length(INSIDE)
            pf_in = classify_boundary(F, omega).length(INSIDE)
    else:
        d_vol = area(diff)
        pe, pf = perimeter(E), perimeter(F)
        pe_in = classify_boundary(E, omega).length(INSIDE)
        pf_in = classify_boundary(F, omega).length(INSIDE)
    d_in = 0.0
    if mode == "pushout":
        d_in = area(symmetric_difference(intersection(F, omega), intersection(E, omega)))
    return ApproxReport(
        mode=mode,
        eps=float(eps),
        tau_meas=universe.tau_meas,
        d_per_in=abs(pf_in - pe_in),
        d_per_total=abs(pf - pe),
        d_vol=d_vol,
        cb_len=common_boundary(F, omega).length,
        d_in_container=d_in,
        passes=trace.to_rows() if trace is not None else [],
        extras=dict(extras or {}),
    )


@dataclass
class LimitReport:
    new_boundary: list[float]
    perimeter_gaps: list[float]
    area_gaps: list[float]
    tail_sum: float
    perimeter_tail: float
    tol_sum: float
    tol_per: float

    @property
    def total(self) -> float:
        return float(sum(self.new_boundary))

    @property
    def verdict(self) -> bool:
        return self.tail_sum < self.tol_sum and self.perimeter_tail < self.tol_per


def boundary_limit_check(sequence: Sequence[PolygonalSet], F: PolygonalSet,
                         tol_sum: Optional[float] = None, tol_per: Optional[float] = None,
                         universe: Optional[Universe] = None) -> LimitReport:
    """Check that new boundary is summable along the sequence and perimeters converge.

    The new boundary created at step ``j`` is the part of ``∂F_{j+1}`` not
    shared with ``∂F_j``.  Tails are taken over the last quarter of the
    sequence; both tolerances default to ``10 τ_meas``.

    Raises:
        SequenceTooShort: fewer than 4 sets.
    """
    seq = list(sequence)
    if len(seq) < 4:
        raise SequenceTooShort(f"need at least 4 sets, got {len(seq)}")
    universe = universe or Universe.around(F, *seq)
    tol_sum = 10 * universe.tau_meas if tol_sum is None else tol_sum
    tol_per = 10 * universe.tau_meas if tol_per is None else tol_per
    new = []
    for a, b in zip(seq[:-1], seq[1:]):
        shared = common_boundary(b, a).length
        new.append(max(0.0, perimeter(b) - shared))
    pF = perimeter(F)
    per_gaps = [abs(perimeter(s) - pF) for s in seq]
    area_gaps = [area(symmetric_difference(s, F)) for s in seq]
    start = len(seq) - max(1, len(seq) // 4)
    tail_sum = float(sum(new[start - 1 :]))
    per_tail = float(max(per_gaps[start:]))
    return LimitReport(new, per_gaps, area_gaps, tail_sum, per_tail, tol_sum, tol_per)
