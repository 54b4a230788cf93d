"""Synchronous-round balancers on a balancing graph.

Every discrete balancer maps the load vector ``x`` (and its state) to a port
flow array of shape ``(n, d_plus)`` plus a per-node remainder; the new load is

    y(u) = r(u) + sum of the port flows arriving at u.

The per-node distribution rules (``send_floor``, ``send_round``,
``rotor_router``, ``rotor_router_star``) are vectorized: they accept a scalar
load or an array of loads and return port rows with a trailing ``d_plus`` axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleBalancer, InvalidParameter, NegativeFlow
from .graphs import (BalancingGraph, RegularGraph, augment, distance_labeling,
                     make_circulant_clique, odd_girth_phi)
from .spectral import TransitionMatrix

__all__ = [
    "StepFlows",
    "BalancerState",
    "Balancer",
    "SendFloor",
    "SendRound",
    "RotorRouter",
    "RotorRouterStar",
    "FixedFlow",
    "Continuous",
    "BALANCERS",
    "make_balancer",
    "send_floor",
    "send_round",
    "rotor_router",
    "rotor_router_star",
    "step",
    "simulate",
    "continuous_step",
    "SteadyStateAdversary",
    "steady_state_adversary",
    "OddCycleConfig",
    "odd_cycle_rotor_config",
    "stateless_clique_fixture",
]

LOAD_LIMIT = 2 ** 62


# ---------------------------------------------------------------- per-node rules


def _spread(total, slots):
    """Split ``total`` over ``slots`` as evenly as possible, extras to the first slots."""
    total = np.asarray(total, dtype=np.int64)
    q, e = np.divmod(total, slots)
    k = np.arange(slots)
    return q[..., None] + (k < e[..., None])


def send_floor(x, d: int, d_loops: int):
    """Port rows for Send(floor(x/d+)).

    Every original port gets ``floor(x/d+)``; the self-loops share the rest as
    evenly as possible (first loop first). Without self-loops the leftover
    ``x mod d`` ends up in the returned remainder.

    Returns
    -------
    ports : ndarray, shape (..., d + d_loops)
    remainder : ndarray, shape (...)
    """
    x = np.asarray(x, dtype=np.int64)
    dp = d + d_loops
    q = x // dp
    orig = np.broadcast_to(q[..., None], x.shape + (d,))
    if d_loops == 0:
        return orig.copy(), x - d * q
    loops = _spread(x - d * q, d_loops)
    return np.concatenate([orig, loops], axis=-1), np.zeros_like(x)


def round_half_up(x, dp: int):
    x = np.asarray(x, dtype=np.int64)
    return (2 * x + dp) // (2 * dp)


def send_round(x, d: int, d_loops: int):
    """Port rows for Send([x/d+]) with round-half-up; needs ``d+ >= 2d``."""
    dp = d + d_loops
    if dp < 2 * d:
        raise InfeasibleBalancer(f"send-round needs d+ >= 2d (d={d}, d+={dp})")
    x = np.asarray(x, dtype=np.int64)
    rq = round_half_up(x, dp)
    orig = np.broadcast_to(rq[..., None], x.shape + (d,))
    if d_loops == 0:
        return orig.copy(), x - d * rq
    loops = _spread(x - d * rq, d_loops)
    return np.concatenate([orig, loops], axis=-1), np.zeros_like(x)


def _round_robin(x, rotor, m: int):
    x = np.asarray(x, dtype=np.int64)
    rotor = np.asarray(rotor, dtype=np.int64)
    q, e = np.divmod(x, m)
    k = np.arange(m)
    vals = q[..., None] + (((k - rotor[..., None]) % m) < e[..., None])
    return vals, (rotor + e) % m


def rotor_router(x, rotor, d_plus: int):
    """Round-robin ``x`` tokens over ``d_plus`` ports starting at ``rotor``.

    Returns the flows in rotor-cycle order and the advanced rotor.
    """
    return _round_robin(x, rotor, d_plus)


def rotor_router_star(x, rotor, d: int, d_loops: int):
    """Rotor-Router*: the last loop gets ``ceil(x / (2 d°))`` (capped at ``x``);
    the other ``d + d° - 1`` ports run a rotor-router on the rest.

    Returns ``(ports, new_rotor)`` with ports in rotor-cycle order followed by
    the special loop.
    """
    if d_loops < 1:
        raise InfeasibleBalancer("rotor-router* needs at least one self-loop")
    x = np.asarray(x, dtype=np.int64)
    special = np.minimum(-(-x // (2 * d_loops)), x)
    vals, new_rotor = _round_robin(x - special, rotor, d + d_loops - 1)
    return np.concatenate([vals, special[..., None]], axis=-1), new_rotor


# ---------------------------------------------------------------- interface


@dataclass(frozen=True, eq=False)
class StepFlows:
    """Port flows of one synchronous step.

    ``ports[u, j]`` tokens leave ``u`` on its ``j``-th port (canonical order,
    originals first); ``remainder[u]`` tokens stay outside the ports.
    """

    ports: np.ndarray
    remainder: np.ndarray

    @property
    def out(self) -> np.ndarray:
        return self.ports.sum(axis=1)

    @property
    def load(self) -> np.ndarray:
        """The load the flows were computed from: ``f_out + r``."""
        return self.ports.sum(axis=1) + self.remainder

    def self_loop_total(self, d: int) -> np.ndarray:
        return self.ports[:, d:].sum(axis=1)


@dataclass(frozen=True, eq=False)
class BalancerState:
    """Per-node persistent state. Both fields are ``None`` for stateless balancers.

    ``rotor[u]`` indexes into ``order[u]``, the cyclic port order of node ``u``
    (a permutation of the ports the rotor runs over).
    """

    rotor: np.ndarray | None = None
    order: np.ndarray | None = None

    @property
    def is_empty(self) -> bool:
        return self.rotor is None and self.order is None

    def same_as(self, other: "BalancerState") -> bool:
        def eq(a, b):
            return (a is None and b is None) or (a is not None and b is not None
                                                and np.array_equal(a, b))
        return eq(self.rotor, other.rotor) and eq(self.order, other.order)


class Balancer:
    """Base class. Subclasses implement ``flows``."""

    name = "abstract"
    stateless = True
    discrete = True
    #: cumulative fairness on original edges guaranteed by construction
    delta = None

    def check(self, g: BalancingGraph) -> None:
        """Raise ``InfeasibleBalancer`` if the balancer cannot run on ``g``."""

    def init_state(self, g: BalancingGraph) -> BalancerState:
        return BalancerState()

    def self_preference(self, g: BalancingGraph) -> int:
        """Declared ``s`` used for the lower potential; at least 1."""
        return 1

    def flows(self, g: BalancingGraph, x: np.ndarray, state: BalancerState):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class SendFloor(Balancer):
    name = "send-floor"
    delta = 0

    def flows(self, g, x, state):
        ports, rem = send_floor(x, g.d, g.d_loops)
        return StepFlows(ports, rem), state


class SendRound(Balancer):
    name = "send-round"
    delta = 0

    def check(self, g):
        if g.d_plus < 2 * g.d:
            raise InfeasibleBalancer(
                f"send-round needs d+ >= 2d, got d={g.d}, d+={g.d_plus}")

    def self_preference(self, g):
        # loops carrying the ceiling when the edges round up: e - d >= ceil(d+/2) - d
        return max(1, -(-g.d_plus // 2) - g.d)

    def flows(self, g, x, state):
        ports, rem = send_round(x, g.d, g.d_loops)
        return StepFlows(ports, rem), state


def _scatter(values, order):
    """Place ``values[u, k]`` on port ``order[u, k]``."""
    out = np.empty_like(values)
    np.put_along_axis(out, order, values, axis=1)
    return out


class RotorRouter(Balancer):
    """Round-robin over all ``d+`` ports.

    ``rotor`` and ``order`` override the default initial pointers (all 0) and
    the canonical cyclic port order, per node.
    """

    name = "rotor-router"
    stateless = False
    delta = 1

    def __init__(self, rotor=None, order=None):
        self.rotor = None if rotor is None else np.asarray(rotor, dtype=np.int64)
        self.order = None if order is None else np.asarray(order, dtype=np.int64)

    def _cycle_len(self, g):
        return g.d_plus

    def init_state(self, g):
        m = self._cycle_len(g)
        rotor = np.zeros(g.n, dtype=np.int64) if self.rotor is None else self.rotor.copy()
        order = (np.broadcast_to(np.arange(m), (g.n, m)).copy()
                 if self.order is None else self.order.copy())
        if rotor.shape != (g.n,) or rotor.min(initial=0) < 0 or rotor.max(initial=0) >= m:
            raise InvalidParameter("rotor pointers must be valid port indices")
        if order.shape != (g.n, m) or not np.array_equal(np.sort(order, axis=1),
                                                         np.broadcast_to(np.arange(m), (g.n, m))):
            raise InvalidParameter("port order override must be a permutation per node")
        return BalancerState(rotor, order)

    def flows(self, g, x, state):
        vals, rotor = rotor_router(x, state.rotor, g.d_plus)
        ports = _scatter(vals, state.order)
        return StepFlows(ports, np.zeros_like(x)), BalancerState(rotor, state.order)


class RotorRouterStar(RotorRouter):
    name = "rotor-router-star"

    def check(self, g):
        if g.d_loops < 1:
            raise InfeasibleBalancer("rotor-router* needs at least one self-loop")

    def _cycle_len(self, g):
        return g.d_plus - 1

    def flows(self, g, x, state):
        vals, rotor = rotor_router_star(x, state.rotor, g.d, g.d_loops)
        rr = _scatter(vals[:, :-1], state.order)
        ports = np.concatenate([rr, vals[:, -1:]], axis=1)
        return StepFlows(ports, np.zeros_like(x)), BalancerState(rotor, state.order)


class FixedFlow(Balancer):
    """Sends a fixed per-port table every step; the load must match the table."""

    name = "fixed-flow"

    def __init__(self, table):
        self.table = np.asarray(table, dtype=np.int64)
        if self.table.min(initial=0) < 0:
            raise NegativeFlow("flow table has negative entries")

    def check(self, g):
        if self.table.shape != (g.n, g.d_plus):
            raise InfeasibleBalancer("flow table shape does not match the graph")

    def flows(self, g, x, state):
        if not np.array_equal(self.table.sum(axis=1), x):
            raise InfeasibleBalancer("load vector left the adversary's steady state")
        return StepFlows(self.table.copy(), np.zeros_like(x)), state


class Continuous(Balancer):
    """Real-valued diffusion ``x <- P x`` (reference process)."""

    name = "continuous"
    discrete = False

    def flows(self, g, x, state):
        x = np.asarray(x, dtype=float)
        ports = np.broadcast_to((x / g.d_plus)[:, None], (g.n, g.d_plus)).copy()
        return StepFlows(ports, np.zeros_like(x)), state


BALANCERS = {
    "send-floor": SendFloor,
    "send-round": SendRound,
    "rotor-router": RotorRouter,
    "rotor-router-star": RotorRouterStar,
    "continuous": Continuous,
}


def make_balancer(name: str, **kw) -> Balancer:
    try:
        cls = BALANCERS[name]
    except KeyError:
        raise InvalidParameter(f"unknown balancer {name!r}") from None
    return cls(**kw)


# ---------------------------------------------------------------- stepping


def step(balancer: Balancer, g: BalancingGraph, x, state: BalancerState):
    """One synchronous round: ``(StepFlows, new load, new state)``."""
    if balancer.discrete:
        x = np.asarray(x, dtype=np.int64)
        if x.size and (x.min() < 0 or x.max() >= LOAD_LIMIT):
            raise InvalidParameter("loads must be non-negative and below 2**62")
    else:
        x = np.asarray(x, dtype=float)
    flows, state = balancer.flows(g, x, state)
    y = flows.remainder + g.incoming(flows.ports)
    return flows, y, state


def simulate(balancer: Balancer, g: BalancingGraph, x, steps: int,
             state: BalancerState | None = None, callback=None):
    """Run ``steps`` rounds; ``callback(t, flows, x_t, x_{t+1})`` sees each one.

    Returns ``(final load, final state)``.
    """
    balancer.check(g)
    if state is None:
        state = balancer.init_state(g)
    x = np.asarray(x)
    for t in range(1, steps + 1):
        flows, y, state = step(balancer, g, x, state)
        if callback is not None:
            callback(t, flows, x, y)
        x = y
    return x, state


def continuous_step(P: TransitionMatrix, x) -> np.ndarray:
    return P @ np.asarray(x, dtype=float)


# ---------------------------------------------------------------- adversaries


@dataclass(frozen=True, eq=False)
class SteadyStateAdversary:
    graph: BalancingGraph
    load: np.ndarray
    table: np.ndarray
    labels: np.ndarray

    @property
    def balancer(self) -> FixedFlow:
        return FixedFlow(self.table)


def steady_state_adversary(g: RegularGraph, source: int = 0) -> SteadyStateAdversary:
    """Round-fair steady state with flows ``f(v1, v2) = min(b(v1), b(v2))``.

    ``b`` is the BFS distance from ``source``. Flows are symmetric, so every
    node receives exactly what it sends and the load never changes.
    """
    b = distance_labeling(g, source).b
    table = np.minimum(b[:, None], b[g.adjacency])
    bg = augment(g, 0)
    load = table.sum(axis=1)
    adv = SteadyStateAdversary(bg, load, table, b)
    _, y, _ = step(adv.balancer, bg, load, BalancerState())
    if not np.array_equal(y, load):
        raise AssertionError("steady-state construction is not a fixed point")
    return adv


@dataclass(frozen=True, eq=False)
class OddCycleConfig:
    """Two-periodic Rotor-Router configuration on a non-bipartite graph (no loops)."""

    graph: BalancingGraph
    load: np.ndarray
    state: BalancerState
    f0: np.ndarray
    f1: np.ndarray
    phi: int
    base_load: int
    source: int
    labels: np.ndarray

    @property
    def balancer(self) -> RotorRouter:
        return RotorRouter(rotor=self.state.rotor, order=self.state.order)


def odd_cycle_rotor_config(g: RegularGraph, L: int, source: int = 0) -> OddCycleConfig:
    """Rotor directions and loads for which Rotor-Router oscillates with period 2.

    With ``b`` the BFS distance from ``source`` and ``phi`` from the odd girth
    ``2 phi + 1``, an arc ``(v1, v2)`` with ``m = min(b(v1), b(v2)) < phi``
    carries ``L + (phi - m)`` at even steps when ``b(v1)`` is even and
    ``L - (phi - m)`` when it is odd; arcs between nodes both at distance
    ``>= phi`` carry ``L``. Odd steps carry the reversed flows. Each node's
    rotor cycle lists its heavier even-step ports first.
    """
    phi = odd_girth_phi(g)
    if phi is None:
        raise InvalidParameter("graph is bipartite; no odd cycle")
    if L < phi:
        raise NegativeFlow(f"base load L={L} below phi={phi} gives negative flows")
    b = distance_labeling(g, source).b
    adj = g.adjacency
    b1, b2 = b[:, None], b[adj]
    m = np.minimum(b1, b2)
    sign = np.where(b1 % 2 == 0, 1, -1)
    f0 = np.where(m < phi, L + sign * (phi - m), L).astype(np.int64)
    f1 = f0[adj, g.reverse_index]
    spread = f0.max(axis=1) - f0.min(axis=1)
    if spread.max() > 1:
        raise AssertionError("construction is not round-fair")
    heavy = f0 > f0.min(axis=1, keepdims=True)
    # stable sort puts heavier ports (P1) first, each group in canonical order
    order = np.argsort(~heavy, axis=1, kind="stable")
    state = BalancerState(np.zeros(g.n, dtype=np.int64), order)
    bg = augment(g, 0)
    cfg = OddCycleConfig(bg, f0.sum(axis=1), state, f0, f1, phi, L, source, b)

    rr = cfg.balancer
    s = rr.init_state(bg)
    fl0, x1, s = step(rr, bg, cfg.load, s)
    fl1, x2, s = step(rr, bg, x1, s)
    if not (np.array_equal(fl0.ports, f0) and np.array_equal(fl1.ports, f1)
            and np.array_equal(x2, cfg.load) and np.array_equal(s.rotor, state.rotor)):
        raise AssertionError("rotor configuration is not 2-periodic")
    return cfg


def stateless_clique_fixture(n: int, d: int):
    """Circulant clique graph and the load ``floor(d/2) - 1`` on each clique node."""
    g = make_circulant_clique(n, d)
    h = d // 2
    x = np.zeros(n, dtype=np.int64)
    x[:h] = max(h - 1, 0)
    return g, x
