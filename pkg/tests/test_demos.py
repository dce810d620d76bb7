import math

import numpy as np

from perimetry.demos import EX51_TAUS, EX52_TS, cut_bound, example51, example52


def test_example51_floor():
    r = example51()
    gap = r.column("g_perimeter_gap")
    vol = r.column("sym_diff_area")
    assert list(r.column("tau")) == list(EX51_TAUS)
    assert gap.min() >= 0.9 * 2 * math.pi
    assert np.all(np.diff(vol) < 0) and vol[-1] < 0.02


def test_example52_blow_up():
    r = example52()
    assert list(r.column("T")) == list(EX52_TS)
    cut, bound, tail = r.column("cut_g_length"), r.column("bound"), r.column("tail_f_volume")
    assert np.all(cut >= bound)
    assert np.all(np.diff(cut) > 0)
    assert np.all(tail <= 2 / np.array(EX52_TS))
    assert cut_bound(5) >= 1.0918


def test_demo_csv_deterministic():
    assert example51().to_csv() == example51().to_csv()
    assert example52().to_csv() == example52().to_csv()
