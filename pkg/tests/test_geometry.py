import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from perimetry.errors import DegenerateRing, GeometryError, NestingViolation, SelfIntersection
from perimetry.geometry import (
    Universe,
    area,
    complement,
    difference,
    dumps,
    empty_set,
    from_dict,
    intersection,
    loads,
    make_polygon_set,
    perimeter,
    read_geometry,
    rectangle,
    regular_polygon,
    rotate,
    sym_diff_area,
    symmetric_difference,
    translate,
    union,
    write_geometry,
)

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def test_unit_square_one_component():
    E = make_polygon_set([SQUARE])
    assert len(E.components) == 1
    outer, holes = E.components[0]
    assert holes == []
    assert area(E) == 1.0 and perimeter(E) == 4.0


def test_reversed_ring_is_normalized():
    assert dumps(make_polygon_set([SQUARE[::-1]])) == dumps(make_polygon_set([SQUARE]))


@pytest.mark.parametrize("s", [0.5, 0.2])
def test_nested_ring_becomes_hole(s):
    a = 0.5 - s / 2
    inner = [(a, a), (a, a + s), (a + s, a + s), (a + s, a)]
    E = make_polygon_set([SQUARE, inner])
    assert len(E.components) == 1 and len(E.components[0][1]) == 1
    assert area(E) == pytest.approx(1 - s * s, abs=1e-12)
    assert perimeter(E) == pytest.approx(4 + 4 * s, abs=1e-12)


def test_empty_set_measures():
    E = empty_set()
    assert E.is_empty and area(E) == 0 and perimeter(E) == 0


def test_boolean_examples():
    sq = rectangle(0, 0, 1, 1)
    u = union(sq, translate(sq, 2, 0))
    assert len(u.components) == 2 and area(u) == 2.0
    i = intersection(sq, translate(sq, 0.5, 0))
    assert area(i) == pytest.approx(0.5) and i.bounds == (0.5, 0.0, 1.0, 1.0)
    assert symmetric_difference(sq, sq).is_empty


@pytest.mark.parametrize(
    "rings, err",
    [
        ([[(0, 0), (1, 0)]], DegenerateRing),
        ([[(0, 0), (1, 0), (2, 0)]], DegenerateRing),
        ([[(0, 0), (1, 1), (1, 0), (0, 1)]], SelfIntersection),
        ([SQUARE, [(0.5, 0), (1.5, 0), (1.5, 1), (0.5, 1)]], NestingViolation),
    ],
)
def test_invalid_rings(rings, err):
    with pytest.raises(err):
        make_polygon_set(rings)
    assert issubclass(err, GeometryError)


def test_json_round_trip_is_bit_exact(tmp_path):
    E = make_polygon_set([[(0.1, 0.2), (1 / 3, 0.2), (0.7, math.pi / 4), (0.1, 0.9)]])
    text = dumps(E)
    assert dumps(loads(text)) == text
    path = tmp_path / "e.json"
    write_geometry(path, E)
    assert dumps(read_geometry(path)) == text
    data = json.loads(text)
    assert set(data) == {"polygons"} and set(data["polygons"][0]) == {"outer", "holes"}


def test_from_dict_rejects_garbage():
    with pytest.raises(GeometryError):
        from_dict({"shapes": []})


def test_universe_contains_and_complement():
    sq = rectangle(0, 0, 1, 1)
    U = Universe.around(sq)
    assert U.contains(sq)
    assert U.tau_meas == pytest.approx(1e-9 * U.diameter)
    c = complement(sq, U)
    assert area(c) == pytest.approx((U.xmax - U.xmin) * (U.ymax - U.ymin) - 1, rel=1e-9)
    assert sym_diff_area(complement(c, U), sq) < U.tau_meas


coords = st.floats(-2, 2, allow_nan=False).map(lambda v: round(v, 6))
sizes = st.floats(0.05, 2).map(lambda v: round(v, 6))
rects = st.builds(lambda x, y, w, h: rectangle(x, y, x + w, y + h), coords, coords, sizes, sizes)
polys = st.builds(
    lambda n, r, x, y, ph: regular_polygon(n, r, (x, y), ph),
    st.integers(3, 12), sizes, coords, coords, st.floats(0, 6.28),
)
shapes = st.one_of(rects, polys)


@given(shapes, shapes)
def test_inclusion_exclusion(a, b):
    tau = Universe.around(a, b).tau_meas
    lhs = area(union(a, b)) + area(intersection(a, b))
    assert abs(lhs - area(a) - area(b)) < tau


@given(shapes)
def test_union_idempotent(a):
    assert sym_diff_area(union(a, a), a) < Universe.around(a).tau_meas


@given(shapes, st.floats(0, 6.28), coords, coords)
def test_perimeter_rigid_invariance(a, angle, dx, dy):
    b = translate(rotate(a, angle), dx, dy)
    assert abs(perimeter(b) - perimeter(a)) < Universe.around(a, b).tau_meas
    assert abs(area(b) - area(a)) < Universe.around(a, b).tau_meas


@given(shapes, shapes)
def test_difference_partition(a, b):
    tau = Universe.around(a, b).tau_meas
    assert abs(area(difference(a, b)) + area(intersection(a, b)) - area(a)) < tau


def test_edges_have_interior_on_left():
    E = make_polygon_set([SQUARE, [(0.25, 0.25), (0.25, 0.75), (0.75, 0.75), (0.75, 0.25)]])
    e = E.edges
    mid = e.mean(axis=1)
    d = e[:, 1] - e[:, 0]
    left = mid + 1e-3 * np.column_stack([-d[:, 1], d[:, 0]]) / np.linalg.norm(d, axis=1)[:, None]
    import shapely

    assert shapely.contains_xy(E.geom, left[:, 0], left[:, 1]).all()
