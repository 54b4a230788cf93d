"""Audit the flows a balancer produced.

The ledger accumulates per-port flows and checks conservation at every step.
From it we read the cumulative fairness gap, round-fairness and the largest
self-preference s the run supports.
"""
import numpy as np

from detlb import FlowLedger, augment, audit, good_s_check, make_balancer, make_cycle, step

for name, loops in [("send-floor", 2), ("send-round", 3), ("rotor-router", 2),
                    ("rotor-router-star", 2)]:
    g = augment(make_cycle(32), loops)
    bal = make_balancer(name)
    x = np.random.default_rng(3).integers(0, 200, g.n)
    ledger = FlowLedger(g, x, keep_trace=True)
    state = bal.init_state(g)
    for _ in range(500):
        flows, x, state = step(bal, g, x, state)
        ledger.record(flows)
    rep = audit(ledger)
    s = good_s_check(ledger.trace, g.d).max_s
    print(f"{name:<18} loops={loops} gap={rep.delta_observed} round_fair={rep.round_fair} "
          f"s={s} tokens={int(ledger.load.sum())}")
