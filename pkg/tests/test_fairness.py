import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detlb.balancers import (BalancerState, StepFlows, make_balancer, steady_state_adversary,
                             step)
from detlb.errors import DiagnosticsFailure, LedgerCorruption, PreconditionError
from detlb.fairness import (FairnessReport, FlowLedger, audit, cumulative_fairness_gap,
                            deviation_diagnostics, good_s_check, normalize_remainder,
                            record_step, round_fairness_check)
from detlb.graphs import augment, make_cycle, make_random_regular, make_torus
from detlb.spectral import transition_matrix


def record(g, name, x, steps, keep_trace=True):
    bal = make_balancer(name)
    ledger = FlowLedger(g, x, keep_trace=keep_trace)
    state = bal.init_state(g)
    for _ in range(steps):
        fl, x, state = step(bal, g, x, state)
        ledger.record(fl)
    return ledger


def brute_gap(trace, d):
    """Max over prefixes and nodes of the spread of cumulative original-edge flows."""
    n = trace[0].ports.shape[0]
    cum = [[0] * d for _ in range(n)]
    best = 0
    for f in trace:
        for u in range(n):
            for j in range(d):
                cum[u][j] += int(f.ports[u, j])
            best = max(best, max(cum[u]) - min(cum[u]))
    return best


def brute_round_fair(trace):
    for f in trace:
        for u in range(f.ports.shape[0]):
            x = int(f.load[u])
            dp = f.ports.shape[1]
            lo, hi = x // dp, -(-x // dp)
            if any(not (lo <= int(v) <= hi) for v in f.ports[u]):
                return False
    return True


# ---------------------------------------------------------------- ledger


def test_record_step_example():
    g = augment(make_cycle(3), 2)
    ledger = FlowLedger(g, [8, 0, 0])
    fl, _, _ = step(make_balancer("send-floor"), g, np.array([8, 0, 0]), BalancerState())
    record_step(ledger, fl)
    assert ledger.F[0, :2].tolist() == [2, 2]
    assert ledger.load.tolist() == [4, 2, 2]


def test_zero_flows():
    g = augment(make_cycle(4), 2)
    ledger = FlowLedger(g, [0, 0, 0, 0])
    ledger.record(StepFlows(np.zeros((4, 4), dtype=np.int64), np.zeros(4, dtype=np.int64)))
    assert ledger.t == 1 and ledger.F.sum() == 0


def test_identity_violation_detected():
    g = augment(make_cycle(4), 0)
    ledger = FlowLedger(g, [2, 0, 0, 0])
    bad = StepFlows(np.array([[1, 1], [0, 0], [0, 0], [0, 0]]), np.array([1, 0, 0, 0]))
    with pytest.raises(LedgerCorruption):
        ledger.record(bad)


def test_rotor_ledger_identities():
    g = augment(make_cycle(8), 0)
    x = np.zeros(8, dtype=np.int64)
    x[0] = 64
    ledger = record(g, "rotor-router", x, 100, keep_trace=False)
    assert ledger.load.sum() == 64


@pytest.mark.parametrize("name,bound", [("send-floor", 0), ("send-round", 0),
                                        ("rotor-router", 1)])
def test_cumulative_gap(name, bound):
    g = augment(make_random_regular(24, 4, 2), 4)
    x = np.random.default_rng(1).integers(0, 200, 24)
    ledger = record(g, name, x, 200)
    gap = cumulative_fairness_gap(ledger)
    assert gap == brute_gap(ledger.trace, g.d)
    assert gap <= bound


def test_empty_ledger_gap():
    with pytest.raises(PreconditionError):
        cumulative_fairness_gap(FlowLedger(augment(make_cycle(3), 1), [0, 0, 0]))


def test_round_fairness():
    g = augment(make_cycle(9), 3)
    x = np.random.default_rng(4).integers(0, 90, 9)
    rr = record(g, "rotor-router", x, 50)
    assert round_fairness_check(rr.trace)
    assert brute_round_fair(rr.trace)
    adv = steady_state_adversary(make_torus(5, 2))
    tr = record_fixed(adv)
    assert round_fairness_check(tr)
    bad = StepFlows(np.array([[9, 0, 0, 0]]), np.array([0]))
    assert not round_fairness_check([bad])


def record_fixed(adv):
    fl, _, _ = step(adv.balancer, adv.graph, adv.load, BalancerState())
    return [fl]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 500), k=st.integers(0, 6),
       name=st.sampled_from(["send-floor", "rotor-router", "rotor-router-star"]))
def test_round_fairness_matches_oracle(seed, k, name):
    if name == "rotor-router-star" and k == 0:
        return
    g = augment(make_cycle(6), k)
    x = np.random.default_rng(seed).integers(0, 40, 6)
    ledger = record(g, name, x, 15)
    assert round_fairness_check(ledger.trace, g.d) == brute_round_fair(ledger.trace)
    assert ledger.round_fair == brute_round_fair(ledger.trace)


# ---------------------------------------------------------------- good s


def test_good_s_send_round_small():
    g = augment(make_cycle(16), 3)
    x = np.zeros(16, dtype=np.int64)
    x[0] = 256
    ledger = record(g, "send-round", x, 300)
    ok, res = good_s_check(ledger.trace, g.d, 1)
    assert ok and res.max_s >= 1


def test_good_s_send_floor_point7():
    g = augment(make_cycle(3), 2)
    ledger = record(g, "send-floor", np.array([7, 0, 0]), 1)
    res = good_s_check(ledger.trace, g.d)
    # surplus (3, 2) on the loops breaks round-fairness
    assert not res.round_fair and res.max_s == 0


def test_good_s_rotor_star():
    g = augment(make_cycle(32), 2)
    x = np.random.default_rng(2).integers(0, 100, 32)
    ledger = record(g, "rotor-router-star", x, 400)
    assert good_s_check(ledger.trace, g.d).max_s >= 1
    assert ledger.max_s >= 1


@pytest.mark.parametrize("d,k", [(2, 3), (2, 5), (4, 8), (4, 9), (3, 7)])
def test_send_round_self_preference_is_exact(d, k):
    # the observed s equals ceil(d+/2) - d: the ceiling-level loops at e = ceil(d+/2)
    base = make_cycle(40) if d == 2 else make_random_regular(40, d, 3)
    g = augment(base, k)
    dp = d + k
    x = np.arange(40, dtype=np.int64) + dp * 5  # covers every residue class
    ledger = record(g, "send-round", x, 1)
    res = good_s_check(ledger.trace, d)
    assert res.max_s == -(-dp // 2) - d


def test_audit_report():
    g = augment(make_cycle(8), 2)
    ledger = record(g, "rotor-router", np.arange(8) * 10, 50, keep_trace=False)
    rep = audit(ledger)
    assert isinstance(rep, FairnessReport)
    assert rep.steps == 50 and rep.delta_observed <= 1 and rep.round_fair
    assert FairnessReport.CSV_HEADER.split(",")[1] == "delta_observed"
    assert rep.csv_row().startswith("50,")


# ---------------------------------------------------------------- normalization


@pytest.mark.parametrize("name", ["send-floor", "send-round", "rotor-router",
                                  "rotor-router-star"])
def test_normalization_bounds(name):
    g = augment(make_random_regular(20, 4, 5), 4)
    x = np.random.default_rng(9).integers(0, 300, 20)
    ledger = record(g, name, x, 150)
    norm = normalize_remainder(ledger)
    assert norm.all_edge_gap <= norm.delta
    assert norm.max_abs_remainder <= g.d_plus
    assert np.array_equal(norm.ports[:, :, :g.d],
                          np.stack([f.ports[:, :g.d] for f in ledger.trace]))
    # port flows plus remainder still account for every token
    loads = np.stack([f.load for f in ledger.trace])
    assert np.array_equal(norm.ports.sum(axis=2) + norm.remainder, loads)
    # every port within delta + r of the equal share
    assert norm.share_deviation <= norm.delta + 1


def test_normalization_zero_trace_is_identity():
    g = augment(make_cycle(5), 2)
    ledger = record(g, "send-floor", np.zeros(5, dtype=np.int64), 10)
    norm = normalize_remainder(ledger)
    assert norm.ports.sum() == 0 and norm.remainder.sum() == 0


def test_normalization_preconditions():
    g = augment(make_cycle(6), 2)
    ledger = record(g, "rotor-router", np.arange(6) * 7 + 1, 30)
    assert ledger.delta_observed == 1
    with pytest.raises(PreconditionError):
        normalize_remainder(ledger, delta=0)
    no_trace = record(g, "send-floor", np.arange(6), 3, keep_trace=False)
    with pytest.raises(PreconditionError):
        normalize_remainder(no_trace)


# ---------------------------------------------------------------- out-flow recursion diagnostics


def diag_oracle(norm, P):
    """Float recomputation of eps_t and the recursion residual."""
    g = norm.graph
    n, d, dp = g.n, g.d, g.d_plus
    M = P.dense()
    adj, rev = g.base.adjacency, g.base.reverse_index
    F_prev = np.zeros((n, dp))
    worst = 0.0
    out = []
    for t in range(norm.steps):
        Fo_prev = F_prev.sum(axis=1)
        eps = np.zeros(n)
        for u in range(n):
            s = 0.0
            for j in range(d):
                v = adj[u][j]
                s += F_prev[v, rev[u][j]] - Fo_prev[v] / dp
            s += F_prev[u, d:].sum() - g.d_loops / dp * Fo_prev[u]
            eps[u] = s - norm.remainder[t, u]
        Fo = norm.F[t].sum(axis=1)
        worst = max(worst, np.abs(Fo - norm.x1 - M @ Fo_prev - eps).max())
        out.append(eps)
        F_prev = norm.F[t].astype(float)
    return np.array(out), worst


@pytest.mark.parametrize("name", ["send-floor", "rotor-router"])
def test_deviation_diagnostics_matches_oracle(name):
    g = augment(make_cycle(3), 2) if name == "send-floor" else augment(make_cycle(7), 2)
    x = np.array([40, 3, 11]) if g.n == 3 else np.arange(7) * 9
    ledger = record(g, name, x, 50)
    norm = normalize_remainder(ledger)
    P = transition_matrix(g)
    rep = deviation_diagnostics(norm, P)
    eps, worst = diag_oracle(norm, P)
    assert rep.residual <= 1e-9
    assert worst <= 1e-9
    assert np.allclose(rep.epsilon, eps)
    assert rep.within_bound


def test_deviation_zero_load():
    g = augment(make_cycle(5), 2)
    ledger = record(g, "rotor-router", np.zeros(5, dtype=np.int64), 10)
    rep = deviation_diagnostics(normalize_remainder(ledger), transition_matrix(g))
    assert not rep.epsilon.any()


def test_deviation_rotor_bound():
    g = augment(make_random_regular(16, 4, 1), 4)
    ledger = record(g, "rotor-router", np.random.default_rng(0).integers(0, 300, 16), 120)
    rep = deviation_diagnostics(normalize_remainder(ledger), transition_matrix(g))
    assert rep.eps_inf <= 2 * g.d_plus


def test_deviation_wrong_matrix():
    g = augment(make_cycle(5), 2)
    ledger = record(g, "send-floor", np.arange(5) * 5, 5)
    norm = normalize_remainder(ledger)
    wrong = transition_matrix(augment(make_cycle(5), 3))
    with pytest.raises(DiagnosticsFailure):
        deviation_diagnostics(norm, wrong)
