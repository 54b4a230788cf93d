"""Acceptance gate: one test per criterion, each emitting a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from detlb.balancers import BALANCERS, make_balancer, step
from detlb.experiments import (GRAPH_SEED, good_s, mixing_bounds, reproduce, thm1_i, thm1_ii, thm2,
                               thm4, thm5, thm6)
from detlb.fairness import FlowLedger, cumulative_fairness_gap
from detlb.graphs import (augment, make_circulant_clique, make_cycle, make_hypercube,
                          make_random_regular, make_torus)
from detlb.spectral import spectral_summary


def failed(rep, checks=None):
    return [v for v in rep.verdicts
            if not v.passed and (checks is None or v.check in checks)]


@pytest.fixture(scope="module")
def thm2_report():
    return thm2("desk")


# ---------------------------------------------------------------- 1


def conservation_graphs():
    return [("cycle(64)", make_cycle(64)), ("torus(8x2)", make_torus(8, 2)),
            ("hypercube(6)", make_hypercube(6)),
            ("random(128,4)", make_random_regular(128, 4, GRAPH_SEED))]


def initial_loads(n):
    point = np.zeros(n, dtype=np.int64)
    point[0] = n * n
    rnd = np.bincount(np.random.default_rng(0).integers(0, n, 8 * n), minlength=n)
    return [("point:n^2", point), ("random:8n", rnd.astype(np.int64))]


def test_criterion_1_conservation(criterion):
    start = time.perf_counter()
    bad = []
    runs = 0
    for glabel, base in conservation_graphs():
        g = augment(base, base.d)
        for llabel, x0 in initial_loads(g.n):
            for name in BALANCERS:
                bal = make_balancer(name)
                bal.check(g)
                state = bal.init_state(g)
                runs += 1
                if not bal.discrete:
                    x = x0.astype(float)
                    m = x.sum()
                    for _ in range(2000):
                        fl, y, state = step(bal, g, x, state)
                        if abs(y.sum() - m) > 1e-9 * m:
                            bad.append((glabel, llabel, name, "mass"))
                            break
                        x = y
                    continue
                m = int(x0.sum())
                ledger = FlowLedger(g, x0)
                x = x0
                for _ in range(2000):
                    fl, y, state = step(bal, g, x, state)
                    ledger.record(fl)  # raises on a broken in/out identity
                    if not (np.array_equal(fl.ports.sum(axis=1) + fl.remainder, x)
                            and np.array_equal(ledger.load, y) and int(y.sum()) == m):
                        bad.append((glabel, llabel, name, ledger.t))
                        break
                    x = y
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 30
    criterion(1, ok, f"{runs} runs x 2000 steps, {len(bad)} broken, {elapsed:.1f}s (< 30s)")
    assert not bad, bad
    assert elapsed < 30


# ---------------------------------------------------------------- 2


def test_criterion_2_cumulative_fairness(criterion):
    g = augment(make_random_regular(128, 4, GRAPH_SEED), 4)
    x0 = np.zeros(128, dtype=np.int64)
    x0[0] = 128 * 128
    gaps = {}
    for name in ("send-floor", "send-round", "rotor-router"):
        bal = make_balancer(name)
        state = bal.init_state(g)
        ledger = FlowLedger(g, x0)
        x = x0
        for _ in range(10_000):
            fl, x, state = step(bal, g, x, state)
            ledger.record(fl)
        gaps[name] = cumulative_fairness_gap(ledger)
    ok = gaps["send-floor"] == 0 and gaps["send-round"] == 0 and gaps["rotor-router"] <= 1
    criterion(2, ok, f"gaps over 10^4 steps {gaps} (need 0, 0, <= 1)")
    assert ok


# ---------------------------------------------------------------- 3 and 7


@pytest.fixture(scope="module")
def good_s_report():
    return good_s("desk")


def test_criterion_3_good_s(criterion, good_s_report):
    rows = [v for v in good_s_report.verdicts if v.check == "max_s"]
    detail = "; ".join(f"{v.instance} s={v.measured} need>={v.bound}" for v in rows)
    ok = all(v.passed for v in rows)
    criterion(3, ok, detail)
    assert ok, failed(good_s_report, {"max_s"})


@pytest.mark.slow
def test_criterion_7_potential_monotonicity(criterion, good_s_report, thm2_report):
    checks = {"phi_increases", "phi_drop_failures", "phiP_increases", "phiP_drop_failures"}
    rows = [v for rep in (good_s_report, thm2_report) for v in rep.verdicts
            if v.check in checks]
    bad = [v for v in rows if not v.passed]
    criterion(7, not bad, f"{len(rows) // 4} runs, {len(bad)} potential checks failed")
    assert not bad, bad


# ---------------------------------------------------------------- 4, 5


@pytest.mark.slow
def test_criterion_4_cycles_deviation_bound(criterion):
    rep = thm1_ii("desk")
    devs = [v for v in rep.verdicts if v.check == "dev_to_avg"]
    worst = max(v.measured / v.bound for v in devs)
    criterion(4, rep.passed, f"{len(devs)} runs, worst dev/bound {worst:.3f}")
    assert rep.passed, failed(rep)


def test_criterion_5_expanders(criterion):
    start = time.perf_counter()
    rep = thm1_i("desk")
    elapsed = time.perf_counter() - start
    ratios = ", ".join(f"{v.instance.split(':T')[0]}={v.measured:.2e}" for v in rep.verdicts)
    ok = rep.passed and elapsed < 60
    criterion(5, ok, f"discrepancy/bound {ratios}; {elapsed:.1f}s")
    assert rep.passed, failed(rep)
    assert elapsed < 60


# ---------------------------------------------------------------- 6, 8


@pytest.mark.slow
def test_criterion_6_send_round_endpoint(criterion, thm2_report):
    rows = [v for v in thm2_report.verdicts
            if v.check in ("final_discrepancy", "round_fair", "delta_observed")]
    end = rows[0]
    ok = all(v.passed for v in rows)
    criterion(6, ok, f"{end.instance} discrepancy {end.measured} <= {end.bound}")
    assert ok, [v for v in rows if not v.passed]


@pytest.mark.slow
def test_criterion_8_dip_windows(criterion, thm2_report):
    row = next(v for v in thm2_report.verdicts if v.check.startswith("longest_above_line"))
    criterion(8, row.passed, f"longest stretch above the line {row.measured} < "
                             f"window {row.bound} ({row.check})")
    assert row.passed


# ---------------------------------------------------------------- 9


def test_criterion_9_lower_bounds(criterion):
    reps = [thm4("desk"), thm5("desk"), thm6("desk")]
    bad = [v for rep in reps for v in rep.verdicts if not v.passed]
    n = sum(len(rep.verdicts) for rep in reps)
    criterion(9, not bad, f"thm4/thm5/thm6: {n} checks, {len(bad)} failed")
    assert not bad, bad


# ---------------------------------------------------------------- 10


def spectral_graphs():
    out = [(f"cycle({n})", make_cycle(n)) for n in (3, 5, 8, 16, 32, 33, 64, 101, 128, 256)]
    out += [("torus(8x2)", make_torus(8, 2)), ("torus(4x3)", make_torus(4, 3)),
            ("hypercube(6)", make_hypercube(6)), ("hypercube(8)", make_hypercube(8)),
            ("circlique(8,4)", make_circulant_clique(8, 4)),
            ("circlique(12,6)", make_circulant_clique(12, 6))]
    out += [(f"random({n},4)", make_random_regular(n, 4, GRAPH_SEED)) for n in (64, 128, 256)]
    return out


def dense_lambda2(g):
    n = g.n
    A = np.zeros((n, n))
    for u, v in g.base.edges():
        A[u, v] = A[v, u] = 1
    M = (g.d_loops * np.eye(n) + A) / g.d_plus
    return np.sort(np.linalg.eigvals(M).real)[-2]


def test_criterion_10_spectral(criterion):
    start = time.perf_counter()
    worst_dense = worst_closed = 0.0
    count = 0
    for label, base in spectral_graphs():
        for k in sorted({1, base.d, 2 * base.d}):
            g = augment(base, k)
            lam = spectral_summary(g).lambda2
            worst_dense = max(worst_dense, abs(lam - dense_lambda2(g)))
            if label.startswith("cycle"):
                closed = (k + 2 * math.cos(2 * math.pi / g.n)) / g.d_plus
                worst_closed = max(worst_closed, abs(lam - closed))
            count += 1
    a1 = mixing_bounds("desk")
    eq = reproduce("eq5")
    elapsed = time.perf_counter() - start
    ok = (worst_dense <= 1e-9 and worst_closed <= 1e-9 and a1.passed and eq.passed
          and elapsed < 60)
    residual = max(v.measured for v in eq.verdicts if v.check == "residual")
    criterion(10, ok, f"{count} graphs, |lambda2 - dense| <= {worst_dense:.1e}, "
                      f"|lambda2 - closed form| <= {worst_closed:.1e}, "
                      f"lemmaA1 {'ok' if a1.passed else 'FAILED'}, "
                      f"eq5 residual {residual:.1e}, {elapsed:.1f}s")
    assert worst_dense <= 1e-9 and worst_closed <= 1e-9
    assert a1.passed, failed(a1)
    assert eq.passed, failed(eq)
    assert elapsed < 60

