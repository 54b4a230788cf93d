import io
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detlb.balancers import make_balancer, simulate, step
from detlb.graphs import augment, make_cycle, make_random_regular
from detlb.metrics import (MetricSeries, PotentialMonitor, WindowMonitor, balancedness,
                           default_levels, deviation_to_average, discrepancy,
                           drop_below_line_check, drop_delta, drop_delta_prime,
                           interval_drop_check, interval_rise_check, dip_threshold,
                           dip_window, potential_phi, potential_phi_prime, potentials,
                           window_return_check)
from detlb.spectral import spectral_summary


def ref_delta(xp, x, c, s, dp):
    if xp > x and xp > c * dp and x < c * dp + s:
        return min(xp, c * dp + s) - max(x, c * dp)
    return 0


def ref_delta_prime(xp, x, c, s, dp):
    if xp < x and xp < c * dp + s and x > c * dp:
        return min(x, c * dp + s) - max(xp, c * dp)
    return 0


def test_discrepancy_examples():
    assert discrepancy([10, 0, 0]) == 10
    assert discrepancy([4, 4, 4]) == 0
    assert discrepancy([3, 2, 1]) == 2


def test_potential_examples():
    x = np.array([9, 3, 0])
    assert potential_phi(x, 2, 4) == 1
    assert potential_phi(x, 0, 4) == 12
    assert potential_phi(x, 3, 4) == 0
    assert potential_phi_prime(x, 0, 2, 4) == 2
    assert potential_phi_prime(np.array([5, 6]), 1, 1, 4) == 0
    assert potential_phi_prime(np.zeros(5, dtype=int), 1, 2, 4) == 5 * 6


def test_drop_delta_examples():
    c, dp = 3, 4
    L = c * dp
    assert drop_delta(L + 3, L + 1, c, 2, dp) == 1
    assert drop_delta(L + 2, L + 2, c, 2, dp) == 0
    assert drop_delta(L + 5, L - 1, c, 3, dp) == 3
    assert drop_delta_prime(L - 1, L + 1, c, 2, dp) == 1
    assert drop_delta_prime(L, L, c, 2, dp) == 0
    s = 2
    assert drop_delta_prime(L, L + s + 3, c, s, dp) == s


@settings(max_examples=300, deadline=None)
@given(xp=st.integers(0, 60), x=st.integers(0, 60), c=st.integers(0, 6), s=st.integers(1, 5),
       dp=st.integers(1, 8))
def test_drop_delta_matches_case_split(xp, x, c, s, dp):
    assert drop_delta(xp, x, c, s, dp) == ref_delta(xp, x, c, s, dp)
    assert drop_delta_prime(xp, x, c, s, dp) == ref_delta_prime(xp, x, c, s, dp)
    assert drop_delta(xp, x, c, s, dp) >= 0


def test_drop_delta_token_count_two_nodes():
    """On two nodes joined by an edge, SendRound with loops drops phi by at least the sum of Delta."""
    d, k = 1, 3
    g = augment(make_random_regular(2, 1, 0), k)
    bal = make_balancer("send-round")
    s = bal.self_preference(g)
    for a, b in itertools.product(range(0, 30), repeat=2):
        x = np.array([a, b])
        _, y, _ = step(bal, g, x, bal.init_state(g))
        for c in range(0, 9):
            drop = int(potential_phi(x, c, g.d_plus) - potential_phi(y, c, g.d_plus))
            assert drop >= sum(ref_delta(int(x[u]), int(y[u]), c, s, g.d_plus) for u in (0, 1))
            dropp = int(potential_phi_prime(x, c, s, g.d_plus)
                        - potential_phi_prime(y, c, s, g.d_plus))
            assert dropp >= sum(ref_delta_prime(int(x[u]), int(y[u]), c, s, g.d_plus)
                                for u in (0, 1))


def test_deviation_to_average():
    assert deviation_to_average([5, 5, 5]) == 0
    assert deviation_to_average([10, 0, 0]) == pytest.approx(10 - 10 / 3)
    x = np.zeros(7, dtype=np.int64)
    x[0] = 49
    assert deviation_to_average(x) == pytest.approx(49 * (1 - 1 / 7))
    assert deviation_to_average(np.array([1.0, 3.0])) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=30), st.randoms())
def test_permutation_invariance(xs, rnd):
    x = np.array(xs)
    y = x.copy()
    rnd.shuffle(y)
    assert discrepancy(x) == discrepancy(y)
    assert 0 <= balancedness(x) <= discrepancy(x)
    for c in range(4):
        assert potential_phi(x, c, 3) == potential_phi(y, c, 3)
        assert potential_phi_prime(x, c, 2, 3) == potential_phi_prime(y, c, 2, 3)


def test_potentials_vectorized():
    x = np.array([17, 4, 9, 0, 12])
    phi, phip = potentials(x, [0, 1, 2, 3, 5], 4, 2)
    assert phi.tolist() == [potential_phi(x, c, 4) for c in (0, 1, 2, 3, 5)]
    assert phip.tolist() == [potential_phi_prime(x, c, 2, 4) for c in (0, 1, 2, 3, 5)]


def test_default_levels():
    assert default_levels([10, 0], 4) == [0, 1, 2, 3]
    lv = default_levels([10_000], 4)
    assert len(lv) <= 64 and lv[0] == 0 and lv[-1] == 2500


# ---------------------------------------------------------------- monitors


@pytest.mark.parametrize("name,k", [("send-round", 3), ("send-round", 6),
                                    ("rotor-router-star", 2)])
def test_potential_monitor_good_balancers(name, k):
    g = augment(make_cycle(24), k)
    bal = make_balancer(name)
    x0 = np.zeros(24, dtype=np.int64)
    x0[0] = 2000
    pm = PotentialMonitor(default_levels(x0, g.d_plus), bal.self_preference(g), g.d_plus)
    simulate(bal, g, x0, 600, callback=lambda t, f, x, y: pm.update(x, y))
    assert pm.ok and pm.steps == 600
    assert pm.min_slack >= 0 and pm.min_slack_prime >= 0


def test_potential_monitor_negative_control():
    pm = PotentialMonitor([1], 1, 4)
    pm.update(np.array([0, 8]), np.array([8, 0]))  # not a balancer step; phi(1) unchanged
    pm.update(np.array([4, 4]), np.array([8, 0]))  # phi(1) grows
    assert pm.increases > 0 and not pm.ok


def test_interval_checks():
    g = augment(make_cycle(16), 3)
    bal = make_balancer("send-round")
    s = bal.self_preference(g)
    x = np.zeros(16, dtype=np.int64)
    x[0] = 400
    hist = [x]
    simulate(bal, g, x, 200, callback=lambda t, f, a, y: hist.append(y))
    series = np.array(hist)
    for t, t2 in ((0, 50), (10, 100), (50, 200)):
        for c in range(0, 10):
            assert interval_drop_check(series, t, t2, c, s, g.d_plus)[0]
            assert interval_rise_check(series, t, t2, c, s, g.d_plus)[0]


def dip_setup(n=32, k=3, K=None):
    g = augment(make_cycle(n), k)
    bal = make_balancer("send-round")
    mu = spectral_summary(g).mu
    K = K if K is not None else n * 8
    T = math.ceil(16 * math.log(n * K) / mu)
    lam = Fraction(g.d_plus, 2) - Fraction(1, 2)
    T_hat = dip_window(n, g.d, mu, float(lam))
    x = np.zeros(n, dtype=np.int64)
    x[0] = K
    return g, bal, x, T, T_hat, lam


def test_drop_below_line_good_run():
    g, bal, x0, T, T_hat, lam = dip_setup()
    hist = [x0]
    simulate(bal, g, x0, T + 3 * T_hat, callback=lambda t, f, a, y: hist.append(y))
    series = np.array(hist)
    for t in (T, T + T_hat, T + 2 * T_hat):
        assert drop_below_line_check(series, t, T_hat, lam, 0, g.d_loops, g.d_plus).all()
    ok, worst = window_return_check(series, T, T_hat, lam, 0, g.d_loops, g.d_plus)
    assert ok
    wm = WindowMonitor.for_dip_line(x0, T, T_hat, lam, 0, g.d_loops, g.d_plus)
    for t, row in enumerate(series):
        wm.update(t, row)
    assert wm.ok and wm.longest <= worst + T_hat


def test_drop_below_line_balanced_and_negative():
    series = np.full((10, 4), 7)
    assert drop_below_line_check(series, 0, 1, Fraction(3, 2), 0, 1, 4).all()
    high = np.zeros((10, 4), dtype=np.int64)
    high[:, 0] = 100
    high[0] = [25, 25, 25, 25]
    assert not drop_below_line_check(high, 2, 5, Fraction(3, 2), 0, 1, 4)[0]
    with pytest.raises(IndexError):
        drop_below_line_check(series, 5, 10, 1, 0, 1, 4)


def test_dip_threshold_exact():
    thr = dip_threshold([1, 2], 1, 2, 5, Fraction(3, 2))
    assert thr == Fraction(3, 2) + 5 + 4 + Fraction(1, 2) + Fraction(3, 2)


def test_window_monitor_counts_runs():
    wm = WindowMonitor(limit=5, start=0, T_hat=3, n=1)
    for t, v in enumerate([9, 9, 9, 1, 9, 9, 9, 9], start=1):
        wm.update(t, [v])
    assert wm.longest == 4 and not wm.ok


# ---------------------------------------------------------------- series


def test_metric_series_round_trip():
    ms = MetricSeries([0, 1, 2], d_plus=4, s=1)
    ms.append(0, np.array([9, 3, 0]))
    ms.append(1, np.array([5, 4, 3]))
    buf = io.StringIO()
    ms.write_csv(buf)
    text = buf.getvalue()
    assert text.split(",")[0] == "t"
    back = MetricSeries.read_csv(io.StringIO(text), 4, 1)
    assert back.columns == ms.columns and back.rows == ms.rows
    assert ms.column("discrepancy").tolist() == [9, 2]
    assert ms.column("phi_c2").tolist() == [1, 0]
