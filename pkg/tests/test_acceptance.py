"""Acceptance suite: one summary line per criterion, printed at the end of the run."""

import csv
import io
import math
import time

import numpy as np
import pytest

from perimetry.boundary import common_boundary
from perimetry.cli import main
from perimetry.errors import BudgetExhausted
from perimetry.fixtures import flange_sequence, random_convex_polygon, random_fixture, shift_sequence
from perimetry.geometry import area, perimeter
from perimetry.pushout import remove_common_boundary
from perimetry.smooth import approximate_in_container
from perimetry.verify import (
    boundary_limit_check,
    check_clauses,
    crofton_perimeter_oracle,
    raster_area_oracle,
)
from perimetry.weighted import approximate_weighted, parse_density

B_SEEDS = range(30)
REPORT_FIELDS = ("eps", "tau_meas", "d_per_in", "d_per_total", "d_vol", "cb_len", "d_in_container")


def b_fixture(seed):
    return random_fixture(seed, ("strips", "mixed")[seed % 2])


@pytest.fixture(scope="module")
def b_runs():
    runs = {}
    for seed in B_SEEDS:
        E, omega, _ = b_fixture(seed)
        eps = 0.1 * perimeter(E)
        runs[seed] = (E, omega, eps, *approximate_in_container(E, omega, eps))
    return runs


def _demo_csv(name, tmp_path):
    path = tmp_path / f"{name}.csv"
    t = time.perf_counter()
    code = main(["demo", name, "--csv", str(path)])
    dt = time.perf_counter() - t
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    return code, {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}, dt


def test_criterion_1_common_boundary_removal(acceptance):
    passed, worst, failures = 0, 0.0, []
    for seed in range(50):
        E, omega, family = random_fixture(seed)
        assert common_boundary(E, omega).length > 0
        eps = 0.05 * perimeter(E)
        t = time.perf_counter()
        try:
            F, trace = remove_common_boundary(E, omega, eps)
            ok = check_clauses(E, F, omega, eps, mode="pushout", trace=trace).verdict
        except BudgetExhausted:
            ok = False
        dt = time.perf_counter() - t
        worst = max(worst, dt)
        passed += ok and dt < 5.0
        if not ok:
            failures.append(seed)
    ok = passed >= 48
    acceptance(1, ok, f"{passed}/50 pass (need 48), slowest run {worst:.2f}s, failed seeds {failures}")
    assert ok


def test_criterion_2_container_approximation(b_runs, acceptance):
    passed = sum(r[4].verdict for r in b_runs.values())
    in_ok = sum(r[4].clause_verdicts["B1_in"] for r in b_runs.values())
    heavy = control_fail = 0
    for seed, (E, omega, eps, _, _) in b_runs.items():
        if common_boundary(E, omega).length <= 0.5 * perimeter(E):
            continue
        heavy += 1
        try:
            _, report = approximate_in_container(E, omega, eps, skip_pushout=True)
        except BudgetExhausted as exc:
            report = exc.report
        control_fail += not report.clause_verdicts["B1_in"]
    ok = passed == len(B_SEEDS) and heavy > 0 and control_fail >= 0.8 * heavy
    acceptance(2, ok, f"{passed}/{len(B_SEEDS)} pass all clauses ({in_ok} pass B1_in); "
                      f"control fails B1_in on {control_fail}/{heavy} fixtures with common boundary > P/2")
    assert ok


def test_criterion_3_weighted_reduction(b_runs, acceptance):
    one = parse_density("const:1")
    worst, mismatched = 0.0, []
    for seed, (E, omega, eps, _, ref) in b_runs.items():
        _, rep = approximate_weighted(E, omega, one, one, eps)
        a, b = ref.to_dict(), rep.to_dict()
        diff = max(abs(a[k] - b[k]) for k in REPORT_FIELDS)
        worst = max(worst, diff / ref.tau_meas)
        if diff >= 10 * ref.tau_meas or ref.verdict != rep.verdict:
            mismatched.append(seed)
    ok = not mismatched
    acceptance(3, ok, f"{len(b_runs) - len(mismatched)}/{len(b_runs)} agree, worst field gap {worst:.3g} tau_meas")
    assert ok


def test_criterion_4_density_jump_floor(tmp_path, acceptance):
    code, cols, dt = _demo_csv("example51", tmp_path)
    gap, vol = cols["g_perimeter_gap"], cols["sym_diff_area"]
    floor = 0.9 * 2 * math.pi
    ok = (code == 0 and gap.min() >= floor and np.all(np.diff(vol) < 0) and vol[-1] < 0.01 * vol[0]
          and dt < 10)
    acceptance(4, ok, f"min gap {gap.min():.4f} >= {floor:.4f}, volume {vol[0]:.3g} -> {vol[-1]:.3g}, {dt:.2f}s")
    assert ok


def test_criterion_5_cusp_blow_up(tmp_path, acceptance):
    code, cols, dt = _demo_csv("example52", tmp_path)
    T, cut, bound, tail = cols["T"], cols["cut_g_length"], cols["bound"], cols["tail_f_volume"]
    ok = (code == 0 and list(T) == [2, 3, 4, 5, 6] and np.all(cut >= bound) and np.all(np.diff(cut) > 0)
          and np.all(tail <= 2 / T) and dt < 10)
    acceptance(5, ok, f"cut {np.round(cut, 3).tolist()} vs bound {np.round(bound, 3).tolist()}, "
                      f"tail within 2/T, {dt:.2f}s")
    assert ok


def test_criterion_6_oracles(acceptance):
    passed = 0
    for seed in range(100):
        E = random_convex_polygon(seed)
        P = perimeter(E)
        ok_area = abs(raster_area_oracle(E, 64) - area(E)) <= P / 64
        est, err = crofton_perimeter_oracle(E, 100_000, seed)
        passed += ok_area and abs(est - P) <= 3 * err
    ok = passed >= 99
    acceptance(6, ok, f"{passed}/100 convex polygons agree with both oracles (need 99)")
    assert ok


def test_criterion_7_boundary_limit(acceptance):
    flange, shift = flange_sequence(), shift_sequence()
    a = boundary_limit_check(flange, flange[-1])
    b = boundary_limit_check(shift, shift[-1])
    again = (boundary_limit_check(flange_sequence(), flange_sequence()[-1]) == a
             and boundary_limit_check(shift_sequence(), shift_sequence()[-1]) == b)
    ok = a.verdict and not b.verdict and again
    acceptance(7, ok, f"flange {'pass' if a.verdict else 'fail'}, shift {'pass' if b.verdict else 'fail'}, "
                      f"repeat identical {again}")
    assert ok


def test_criterion_8_invariants(acceptance):
    import test_boundary
    import test_geometry
    import test_smooth
    import test_weighted

    suites = {
        "inclusion-exclusion": test_geometry.test_inclusion_exclusion,
        "complement duality": test_boundary.test_complement_duality,
        "level-set nesting": test_smooth.test_level_set_nesting,
        "density scaling": test_weighted.test_scaling_homogeneity,
        "convexity gate": test_weighted.test_convexity_gate,
    }
    t = time.perf_counter()
    failed = []
    for name, fn in suites.items():
        try:
            fn()
        except Exception as exc:  # noqa: BLE001
            failed.append(f"{name} ({type(exc).__name__})")
    ok = not failed
    acceptance(8, ok, f"{len(suites) - len(failed)}/{len(suites)} invariant suites green "
                      f"in {time.perf_counter() - t:.2f}s {failed or ''}".rstrip())
    assert ok
