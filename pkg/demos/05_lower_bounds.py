"""Three constructions where balancing stalls.

A round-fair flow table can freeze a load with discrepancy linear in the
diameter. A stateless balancer can freeze on a circulant clique. A rotor
configuration on an odd cycle oscillates with period 2 forever.
"""
import numpy as np

from detlb import (BalancerState, augment, diameter, discrepancy, make_balancer,
                   make_cycle, odd_cycle_rotor_config, stateless_clique_fixture,
                   steady_state_adversary, step)

adv = steady_state_adversary(make_cycle(40))
_, y, _ = step(adv.balancer, adv.graph, adv.load, BalancerState())
print(f"adversary on cycle(40): fixed={np.array_equal(y, adv.load)} "
      f"discrepancy={discrepancy(adv.load)} diameter={diameter(make_cycle(40))}")

base, x = stateless_clique_fixture(12, 6)
g = augment(base, 6)
_, y, _ = step(make_balancer("send-floor"), g, x, BalancerState())
print(f"send-floor on circlique(12,6): fixed={np.array_equal(y, x)} "
      f"discrepancy={discrepancy(x)}")

cfg = odd_cycle_rotor_config(make_cycle(11), L=10)
bal, state, x = cfg.balancer, cfg.state, cfg.load
loads = []
for _ in range(6):
    loads.append(int(x[cfg.source]))
    _, x, state = step(bal, cfg.graph, x, state)
print(f"rotor on cycle(11): source load over time {loads}")
