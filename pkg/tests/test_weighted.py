import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perimetry.demos import cusp, cut_length
from perimetry.errors import (
    DensitySpecError,
    DiscontinuousDensity,
    GBoundViolated,
    NonPositiveDensity,
)
from perimetry.fixtures import random_fixture
from perimetry.geometry import area, intersection, perimeter, rectangle, regular_polygon
from perimetry.smooth import GridField, approximate_in_container
from perimetry.weighted import (
    approximate_weighted,
    convexity_gate,
    cusp_g_value,
    directional,
    parse_density,
    parse_modulation,
    triangulate,
    truncation_radius,
    weighted_area,
    weighted_perimeter,
)

SQ = rectangle(0, 0, 1, 1)


def test_const_one_reduces_to_lebesgue():
    E = regular_polygon(11, 0.7, (0.2, -0.1), 0.4)
    assert weighted_area(E, "const:1") == pytest.approx(area(E), rel=1e-9)
    assert weighted_perimeter(E, "const:1") == pytest.approx(perimeter(E), rel=1e-9)


def test_const_three_square():
    assert weighted_area(SQ, "const:3") == pytest.approx(3.0, rel=1e-12)
    assert weighted_perimeter(SQ, "const:2") == pytest.approx(8.0, rel=1e-12)


def test_exp_x_square():
    assert weighted_area(SQ, "exp-x") == pytest.approx(math.e - 1, rel=1e-8)


def test_triangle_rule_degree_seven():
    E = regular_polygon(5, 1.0, (0.3, 0.2))
    f = parse_density("const:1")
    tri = triangulate(E)
    assert tri.shape[1:] == (3, 2)
    mono = type(f)("poly", lambda x, y: 2.0 + x**4 * y**3, True)
    # the monomial's integral via Green: ∮ x^5 y^3 / 5 dy
    ring = E.rings[0]
    a, b = ring, np.roll(ring, -1, axis=0)
    t, w = np.polynomial.legendre.leggauss(10)
    t, w = 0.5 * (t + 1), 0.5 * w
    pts = a[:, None] + t[None, :, None] * (b - a)[:, None]
    exact = 2 * area(E) + np.sum(((pts[..., 0] ** 5 * pts[..., 1] ** 3) / 5 @ w) * (b - a)[:, 1])
    assert weighted_area(E, mono) == pytest.approx(exact, rel=1e-12)


def test_cusp_volume_tends_to_two():
    E50 = intersection(cusp(), rectangle(0, -2, 50, 2))
    assert weighted_area(E50, "const:1") == pytest.approx(2 - 2 / 50, abs=1e-3)


def test_cusp_cut_middle_half():
    assert cut_length(5.0, "cusp-g") >= math.exp(5) / 25
    g = directional("cusp-g")
    E5 = intersection(cusp(), rectangle(0, -2, 5, 2))
    assert weighted_perimeter(E5, g) > math.exp(5) / 25


def test_cusp_g_regions():
    x = np.array([2.0, 3.0, 4.0])
    assert np.allclose(cusp_g_value(x, 0.4 / x**2), np.exp(x))
    assert np.allclose(cusp_g_value(x, 1 / x**2), x**-2.0)
    assert np.allclose(cusp_g_value(x, -1.5 / x**2), x**-2.0)
    assert cusp_g_value(0.5, 0.0) == cusp_g_value(1.0, 0.0)


def test_ellipse_perimeter():
    # unit square: horizontal edges have vertical normals (weight b), vertical edges weight a
    g = directional("const:1", "ellipse:2,1")
    assert weighted_perimeter(SQ, g) == pytest.approx(6.0, rel=1e-12)


def test_region_restriction():
    E = rectangle(0, 0, 1, 0.5)
    assert weighted_perimeter(E, "const:2", SQ) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("spec", ["const:0", "const:-1", "radial-step:1,0,1"])
def test_nonpositive_rejected(spec):
    with pytest.raises(NonPositiveDensity):
        parse_density(spec)


@pytest.mark.parametrize("spec", ["bogus", "const:a", "const:1,2", "user-grid:"])
def test_bad_specs(spec):
    with pytest.raises(DensitySpecError):
        parse_density(spec)


def test_user_grid(tmp_path):
    g = GridField((-1.0, -1.0), 0.5, np.full((9, 9), 2.0))
    p = tmp_path / "g.bin"
    p.write_bytes(g.to_bytes())
    f = parse_density(f"user-grid:{p}")
    assert weighted_area(SQ, f) == pytest.approx(2.0, rel=1e-12)


def test_convexity_gate():
    for spec in ("isotropic", "ellipse:2,1", "ellipse:1,5", "lp:1", "lp:3"):
        assert convexity_gate(parse_modulation(spec)), spec
    assert not convexity_gate(parse_modulation("lp:0.5"))


@settings(max_examples=20)
@given(st.floats(0.1, 10), st.sampled_from(["const:1", "exp-x", "const:2.5"]), st.integers(3, 10))
def test_scaling_homogeneity(lam, spec, n):
    E = regular_polygon(n, 0.8, (0.1, 0.3))
    f = parse_density(spec)
    assert weighted_area(E, f.scaled(lam)) == pytest.approx(lam * weighted_area(E, f), rel=1e-12)
    g = directional(f, "ellipse:2,1")
    assert weighted_perimeter(E, g.scaled(lam)) == pytest.approx(lam * weighted_perimeter(E, g), rel=1e-12)


def test_truncation_bounded_set():
    E = regular_polygon(6, 0.5)
    r = truncation_radius(E, "const:1", "const:1", 1.0, 0.1, detail=True)
    assert r.R > 0.5 and r.slice_integral == 0.0 and r.tail_area == 0.0


def test_truncation_cusp_const():
    E = cusp()
    eps = 0.1
    r = truncation_radius(E, "const:1", "const:1", 1.0, eps, detail=True)
    assert math.isfinite(r.R)
    assert r.slice_integral <= eps / 2
    cut = intersection(E, regular_polygon(1024, r.R))
    assert weighted_area(E, "const:1") - weighted_area(cut, "const:1") < eps
    assert abs(weighted_perimeter(cut, "const:1") - weighted_perimeter(E, "const:1")) < eps


@pytest.mark.parametrize("M", [1.0, 10.0, 1e3, 1e6])
def test_truncation_cusp_g_violates_bound(M):
    with pytest.raises(GBoundViolated):
        truncation_radius(cusp(), "const:1", "cusp-g", M, 0.1)


def test_radial_step_rejected():
    with pytest.raises(DiscontinuousDensity):
        approximate_weighted(SQ, SQ, "const:1", "radial-step:1,1,2", 0.3)


def test_concave_modulation_rejected():
    with pytest.raises(DensitySpecError):
        approximate_weighted(SQ, SQ, "const:1", "const:1", 0.3, modulation="lp:0.5")


def test_anisotropic_square():
    F, r = approximate_weighted(SQ, SQ, "const:1", "const:1", 0.3, modulation="ellipse:2,1")
    assert r.verdict, r.failed
    assert r.extras["modulation"] == "ellipse:2,1"


def test_exp_density_pipeline():
    E, omega, _ = random_fixture(3, "mixed")
    eps = 0.2 * weighted_perimeter(E, "exp-x")
    F, r = approximate_weighted(E, omega, "exp-x", "exp-x", eps)
    assert r.verdict, r.failed


def test_reduction_matches_container_pipeline():
    E, omega, _ = random_fixture(2, "strips")
    eps = 0.1 * perimeter(E)
    _, a = approximate_in_container(E, omega, eps)
    _, b = approximate_weighted(E, omega, "const:1", "const:1", eps)
    for k in ("d_per_in", "d_per_total", "d_vol", "cb_len"):
        assert abs(getattr(a, k) - getattr(b, k)) < 10 * a.tau_meas


def test_bounded_pipeline_long_strip():
    # e^x makes the far left of the strip negligible, so a bounded F suffices
    E = rectangle(-30, 0, 0, 1)
    omega = rectangle(-40, -1, 1, 2)
    F, r = approximate_weighted(E, omega, "exp-x", "exp-x", 0.2, want_bounded=True, M=1.0)
    assert r.verdict, r.failed
    R = r.extras["truncation_radius"]
    assert R < 30 and max(abs(v) for v in F.bounds) <= R + 0.1
