"""Run every balancer from the same point load and watch the discrepancy fall.

The continuous walk is the reference; the integer balancers track it up to
a bounded rounding error.
"""
import numpy as np

from detlb import BALANCERS, augment, discrepancy, make_balancer, make_torus, simulate

g = augment(make_torus(8, 2), 4)
x0 = np.zeros(g.n, dtype=np.int64)
x0[0] = 64 * 64

checkpoints = [0, 10, 50, 200, 1000]
print("step      " + "".join(f"{name:>20}" for name in BALANCERS))
history = {}
for name in BALANCERS:
    seen = {0: discrepancy(x0)}
    simulate(make_balancer(name), g, x0, checkpoints[-1],
             callback=lambda t, f, x, y, seen=seen: seen.update({t: discrepancy(y)}))
    history[name] = seen
for t in checkpoints:
    print(f"{t:<10}" + "".join(f"{float(history[n][t]):>20.3f}" for n in BALANCERS))
