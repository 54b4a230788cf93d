"""Deterministic discrete diffusion load balancing on regular graphs.

Graphs with self-loops, integer balancers, flow ledgers with fairness audits,
potential and discrepancy metrics, spectral mixing quantities and a small
experiment harness.
"""
from .balancers import (BALANCERS, Balancer, BalancerState, Continuous, FixedFlow,
                        RotorRouter, RotorRouterStar, SendFloor, SendRound, StepFlows,
                        make_balancer, odd_cycle_rotor_config, simulate,
                        stateless_clique_fixture, steady_state_adversary, step)
from .errors import *  # noqa: F401,F403
from .fairness import (FlowLedger, audit, cumulative_fairness_gap, deviation_diagnostics,
                       good_s_check, normalize_remainder, round_fairness_check)
from .graphs import (BalancingGraph, RegularGraph, augment, diameter, distance_labeling,
                     make_circulant_clique, make_cycle, make_hypercube,
                     make_random_regular, make_torus, odd_girth, odd_girth_phi)
from .harness import ExperimentConfig, RunResult, emit_csv, read_csv, run
from .metrics import (MetricSeries, PotentialMonitor, deviation_to_average, discrepancy,
                      potential_phi, potential_phi_prime)
from .spectral import (SpectralSummary, current_sum, eigen_gap, lambda_bound_check,
                       spectral_summary, transition_matrix)

__version__ = "0.1.0"
