import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perimetry.errors import SequenceTooShort
from perimetry.fixtures import flange_sequence, random_convex_polygon, shift_sequence
from perimetry.geometry import (
    area,
    empty_set,
    make_polygon_set,
    perimeter,
    rectangle,
    regular_polygon,
    translate,
)
from perimetry.pushout import remove_common_boundary
from perimetry.verify import (
    ApproxReport,
    boundary_limit_check,
    check_clauses,
    crofton_perimeter_oracle,
    raster_area_oracle,
)

SQ = rectangle(0, 0, 1, 1)


def test_raster_examples():
    assert raster_area_oracle(SQ, 16) == 1.0
    assert raster_area_oracle(empty_set()) == 0.0
    tri = make_polygon_set([[(0, 0), (1, 0), (0, 1)]])
    assert abs(raster_area_oracle(tri, 32) - 0.5) <= perimeter(tri) / 32
    with pytest.raises(ValueError):
        raster_area_oracle(SQ, 8)


def test_crofton_examples():
    est, err = crofton_perimeter_oracle(SQ, 100_000, seed=0)
    assert abs(est - 4) < 3 * err
    assert crofton_perimeter_oracle(empty_set(), 1000) == (0.0, 0.0)
    gon = regular_polygon(64, 1.0)
    exact = 2 * 64 * math.sin(math.pi / 64)
    assert perimeter(gon) == pytest.approx(exact, rel=1e-9)
    est, err = crofton_perimeter_oracle(gon, 100_000, seed=1)
    assert abs(est - exact) < 3 * err
    with pytest.raises(ValueError):
        crofton_perimeter_oracle(SQ, 10)


def test_crofton_deterministic():
    assert crofton_perimeter_oracle(SQ, 5000, seed=7) == crofton_perimeter_oracle(SQ, 5000, seed=7)


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_oracles_on_convex_polygons(seed):
    E = random_convex_polygon(seed)
    assert abs(raster_area_oracle(E, 64) - area(E)) <= perimeter(E) / 64


def test_identity_report_passes():
    E = rectangle(0, 0, 1, 1)
    r = check_clauses(E, E, rectangle(5, 5, 6, 6), 0.1)
    assert r.verdict and r.d_per_in == r.d_per_total == r.d_vol == r.cb_len == 0


def test_translated_fails_volume():
    eps = 0.05
    F = translate(SQ, 2 * eps * math.sqrt(2), 0)
    r = check_clauses(SQ, F, rectangle(5, 5, 6, 6), eps)
    assert not r.verdict and "B2" in r.failed


def test_pushout_fixture_report():
    from perimetry.geometry import union

    omega = union(SQ, rectangle(0.2, -1, 0.3, -0.002))
    E = rectangle(0, 0, 1, 0.5)
    F, trace = remove_common_boundary(E, omega, 0.2)
    r = check_clauses(E, F, omega, 0.2, mode="pushout", trace=trace)
    assert r.verdict and len(r.passes) == len(trace.passes)


def test_report_serialization_round_trip():
    F, trace = remove_common_boundary(SQ, SQ, 0.1)
    r = check_clauses(SQ, F, SQ, 0.1, mode="pushout", trace=trace)
    d = json.loads(r.to_json())
    assert d["verdict"] == "pass" and set(d["clauses"]) == {"A1_area", "A1_perimeter", "A2", "A3", "A4"}
    back = ApproxReport.from_dict(d)
    assert back.clause_verdicts == r.clause_verdicts and back.to_json() == r.to_json()
    csv_lines = r.to_csv().strip().splitlines()
    assert csv_lines[0] == "clause,measured,budget,pass" and csv_lines[-1].endswith("pass")


def test_verdict_is_recomputed():
    r = check_clauses(SQ, SQ, rectangle(5, 5, 6, 6), 0.1)
    assert r.verdict
    r.d_vol = 1.0
    assert not r.verdict and r.failed == ["B2"]


def test_limit_check_examples():
    assert boundary_limit_check([SQ] * 5, SQ).verdict
    seq = flange_sequence()
    assert boundary_limit_check(seq, seq[-1]).verdict
    alt = shift_sequence()
    assert not boundary_limit_check(alt, alt[-1]).verdict
    with pytest.raises(SequenceTooShort):
        boundary_limit_check([SQ] * 3, SQ)


def test_flange_sums_are_geometric():
    seq = flange_sequence(12)
    r = boundary_limit_check(seq, seq[-1])
    assert all(b < a for a, b in zip(r.new_boundary, r.new_boundary[1:]))
    assert r.total < 2.0
