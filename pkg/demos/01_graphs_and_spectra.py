"""Build balancing graphs and read off their mixing quantities.

A d-regular graph gets d° self-loops per node. The second eigenvalue of the
walk matrix sets the spectral gap mu, and with it the balancing time T(K).
"""
from detlb import (augment, diameter, make_cycle, make_hypercube, make_random_regular,
                   make_torus, odd_girth, spectral_summary)

K = 4096
print(f"{'graph':<16}{'n':>5}{'d+':>4}{'diam':>6}{'odd girth':>11}{'mu':>11}{'T(K)':>9}")
for label, base in [("cycle(64)", make_cycle(64)), ("cycle(65)", make_cycle(65)),
                    ("torus(8x2)", make_torus(8, 2)), ("hypercube(6)", make_hypercube(6)),
                    ("random(128,4)", make_random_regular(128, 4, seed=1))]:
    g = augment(base, base.d)
    s = spectral_summary(g)
    print(f"{label:<16}{g.n:>5}{g.d_plus:>4}{diameter(base):>6}{str(odd_girth(base)):>11}"
          f"{s.mu:>11.5f}{s.T_of(K):>9.0f}")

# Cycles mix slowly (mu ~ 1/n^2); random regular graphs are expanders.
