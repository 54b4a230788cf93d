"""Potentials never rise under a good s-balancer, and nodes keep dipping low.

phi(c) counts tokens above level c*d+ and phi'(c) counts holes below
c*d+ + s. The monitor checks the exact per-step drop at every level. The
window monitor measures the longest stretch a node stays above the line
xbar + delta*d+ + 2r + 1/2 + lambda after the balancing time.
"""
import math
from fractions import Fraction

import numpy as np

from detlb import augment, discrepancy, make_balancer, make_random_regular, spectral_summary
from detlb.experiments import monitored_run
from detlb.metrics import WindowMonitor, dip_window

g = augment(make_random_regular(64, 4, seed=1), 8)
bal = make_balancer("send-round")
mu = spectral_summary(g).mu
K = 64 * 64
T = math.ceil(16 * math.log(64 * K) / mu)
lam = Fraction(g.d_plus, 2) - Fraction(1, 2)
T_hat = dip_window(g.n, g.d, mu, float(lam))

x0 = np.zeros(g.n, dtype=np.int64)
x0[0] = K
win = WindowMonitor.for_dip_line(x0, T, T_hat, lam, bal.delta, g.d_loops, g.d_plus)
res = monitored_run(bal, g, x0, T + 5 * T_hat, window=win)
pm = res.potentials
print(f"s={bal.self_preference(g)} steps={pm.steps} levels={len(pm.levels)}")
print(f"phi increases={pm.increases} drop failures={pm.drop_failures} "
      f"min slack={pm.min_slack}")
print(f"phi' increases={pm.increases_prime} drop failures={pm.drop_failures_prime}")
print(f"after T={T}: longest stretch above the line {win.longest} (window {T_hat})")
print(f"final discrepancy {discrepancy(res.x)}")
