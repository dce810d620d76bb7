import pytest
from hypothesis import given
from hypothesis import strategies as st

from perimetry.boundary import (
    INSIDE,
    OUTSIDE,
    MINUS,
    PLUS,
    classify_boundary,
    common_boundary,
    common_boundary_csv,
    relative_perimeter,
)
from perimetry.fixtures import random_fixture
from perimetry.geometry import Universe, complement, perimeter, rectangle

SQ = rectangle(0, 0, 1, 1)


@pytest.mark.parametrize(
    "E, expected",
    [(SQ, 0.0), (rectangle(0.25, 0.25, 0.75, 0.75), 2.0), (rectangle(0, 0, 1, 0.5), 1.0)],
)
def test_relative_perimeter_examples(E, expected):
    assert relative_perimeter(E, SQ) == pytest.approx(expected, abs=1e-12)


def test_lower_half_common_boundary():
    cb = common_boundary(rectangle(0, 0, 1, 0.5), SQ)
    assert cb.length_plus == pytest.approx(2.0, abs=1e-12)
    assert cb.length_minus == 0.0


def test_identical_and_complement():
    U = Universe.around(SQ)
    cb = common_boundary(SQ, SQ)
    assert cb.length_plus == pytest.approx(4.0) and cb.length_minus == 0.0
    cc = common_boundary(complement(SQ, U), SQ)
    assert cc.length_minus == pytest.approx(4.0) and cc.length_plus == 0.0


def test_partial_overlap_and_crossing():
    # shares half of the right edge with opposing normals, crosses the top edge transversally
    E = rectangle(1, 0.5, 2, 1.5)
    cb = common_boundary(E, SQ)
    assert cb.length_minus == pytest.approx(0.5, abs=1e-12)
    assert cb.length_plus == 0.0
    pieces = classify_boundary(E, SQ)
    assert pieces.length(OUTSIDE) == pytest.approx(3.5, abs=1e-12)
    assert pieces.length(INSIDE) == 0.0


def test_csv_columns():
    text = common_boundary_csv(common_boundary(rectangle(0, 0, 1, 0.5), SQ))
    lines = text.strip().splitlines()
    assert lines[0] == "x0,y0,x1,y1,class,length"
    assert {l.split(",")[4] for l in lines[1:]} == {"+"}


seeds = st.integers(0, 10_000)
families = st.sampled_from(["strips", "slab", "mixed"])


@given(seeds, families)
def test_complement_duality(seed, family):
    E, omega, _ = random_fixture(seed, family)
    U = Universe.around(E, omega)
    a = common_boundary(E, omega)
    b = common_boundary(complement(E, U), omega)
    assert abs(a.length_plus - b.length_minus) < U.tau_meas
    assert abs(a.length_minus - b.length_plus) < U.tau_meas


@given(seeds, families)
def test_boundary_decomposition(seed, family):
    E, omega, _ = random_fixture(seed, family)
    U = Universe.around(E, omega)
    cb = common_boundary(E, omega)
    total = relative_perimeter(E, omega) + relative_perimeter(E, complement(omega, U)) + cb.length
    assert abs(total - perimeter(E)) < U.tau_meas
    assert cb.length <= min(perimeter(E), perimeter(omega)) + U.tau_meas


@given(seeds, families)
def test_labels_cover_boundary(seed, family):
    E, omega, _ = random_fixture(seed, family)
    p = classify_boundary(E, omega)
    total = sum(p.length(k) for k in (INSIDE, OUTSIDE, PLUS, MINUS))
    assert total == pytest.approx(perimeter(E), abs=Universe.around(E, omega).tau_meas)
