"""Cumulative flow ledgers and fairness audits.

A :class:`FlowLedger` follows one run step by step. It keeps cumulative flows
per port (every self-loop separately), per-node in/out totals and the last
remainder, re-checks the in/out identity

    x_1(u) + F_in_{t-1}(u) == r_t(u) + F_out_t(u)

exactly after every step, and maintains running fairness statistics so long
runs never need the full flow history. Pass ``keep_trace=True`` to also keep
the per-step :class:`StepFlows` for remainder normalization and diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .balancers import StepFlows
from .errors import DiagnosticsFailure, LedgerCorruption, PreconditionError
from .graphs import BalancingGraph
from .spectral import TransitionMatrix

__all__ = [
    "FlowLedger",
    "FairnessReport",
    "GoodSResult",
    "NormalizedLedger",
    "DeviationReport",
    "record_step",
    "cumulative_fairness_gap",
    "round_fairness_check",
    "good_s_check",
    "audit",
    "normalize_remainder",
    "deviation_diagnostics",
]

MAX_VIOLATIONS = 100


def _step_checks(flows: StepFlows, d: int):
    """Per-node floor/round-fair masks and the self-preference bound of one step.

    Returns ``(floor_ok, round_ok, s_cap)`` where ``s_cap[u]`` is the largest
    ``s`` for which node ``u`` meets ``#loops at ceiling >= min(s, e(u))``.
    """
    ports = flows.ports
    dp = ports.shape[1]
    x = flows.load
    lo = x // dp
    hi = -(-x // dp)
    floor_ok = (ports >= lo[:, None]).all(axis=1)
    round_ok = floor_ok & (ports <= hi[:, None]).all(axis=1)
    e = x - dp * lo
    at_ceiling = (ports[:, d:] == hi[:, None]).sum(axis=1)
    # e <= at_ceiling always satisfies; otherwise s must not exceed at_ceiling
    s_cap = np.where(e <= at_ceiling, dp, at_ceiling)
    return floor_ok, round_ok, s_cap


@dataclass
class FlowLedger:
    graph: BalancingGraph
    x1: np.ndarray
    keep_trace: bool = False
    t: int = 0
    F: np.ndarray = field(init=False, repr=False)
    F_in: np.ndarray = field(init=False, repr=False)
    F_out: np.ndarray = field(init=False, repr=False)
    remainder: np.ndarray = field(init=False, repr=False)
    delta_observed: int = 0
    round_fair: bool = True
    floor_ok: bool = True
    s_cap: int = field(init=False)
    violations: list = field(default_factory=list)
    violation_count: int = 0
    trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        n, dp = self.graph.n, self.graph.d_plus
        self.x1 = np.asarray(self.x1, dtype=np.int64).copy()
        self.F = np.zeros((n, dp), dtype=np.int64)
        self.F_in = np.zeros(n, dtype=np.int64)
        self.F_out = np.zeros(n, dtype=np.int64)
        self.remainder = np.zeros(n, dtype=np.int64)
        self.s_cap = dp

    @property
    def load(self) -> np.ndarray:
        """Load at the start of the next step: ``x_1 + F_in - F_out``."""
        return self.x1 + self.F_in - self.F_out

    def _violation(self, kind, nodes, detail=""):
        self.violation_count += len(nodes)
        room = MAX_VIOLATIONS - len(self.violations)
        for u in list(nodes)[:max(room, 0)]:
            self.violations.append((self.t, int(u), kind + detail))

    def record(self, flows: StepFlows) -> "FlowLedger":
        g = self.graph
        d = g.d
        ports = np.asarray(flows.ports, dtype=np.int64)
        rem = np.asarray(flows.remainder, dtype=np.int64)
        if ports.shape != self.F.shape:
            raise LedgerCorruption(f"flow shape {ports.shape} != {self.F.shape}")
        if ports.min(initial=0) < 0:
            raise LedgerCorruption(f"negative port flow at step {self.t + 1}")
        self.t += 1
        self.F += ports
        self.F_out += ports.sum(axis=1)
        lhs = self.x1 + self.F_in
        rhs = rem + self.F_out
        if not np.array_equal(lhs, rhs):
            u = int(np.flatnonzero(lhs != rhs)[0])
            raise LedgerCorruption(
                f"in/out identity broken at t={self.t}, node {u}: {lhs[u]} != {rhs[u]}")
        self.F_in += g.incoming(ports)
        self.remainder = rem

        if d > 1:
            orig = self.F[:, :d]
            gap = orig.max(axis=1) - orig.min(axis=1)
            self.delta_observed = max(self.delta_observed, int(gap.max()))
        floor_ok, round_ok, s_cap = _step_checks(StepFlows(ports, rem), d)
        if not floor_ok.all():
            self.floor_ok = False
            self._violation("below-floor", np.flatnonzero(~floor_ok))
        if not round_ok.all():
            self.round_fair = False
            self._violation("not-round-fair", np.flatnonzero(~round_ok & floor_ok))
        self.s_cap = min(self.s_cap, int(s_cap.min()))
        if self.keep_trace:
            self.trace.append(StepFlows(ports.copy(), rem.copy()))
        return self

    @property
    def max_s(self) -> int:
        """Largest ``s`` in ``[0, d°]`` for which the recorded run is a good s-balancer."""
        if not (self.round_fair and self.delta_observed <= 1):
            return 0
        return int(min(self.s_cap, self.graph.d_loops))


def record_step(ledger: FlowLedger, flows: StepFlows) -> FlowLedger:
    return ledger.record(flows)


def cumulative_fairness_gap(ledger: FlowLedger) -> int:
    """Exact max over nodes and recorded steps of ``max |F_t(e1) - F_t(e2)|`` on original edges."""
    if ledger.t == 0:
        raise PreconditionError("empty ledger")
    return ledger.delta_observed


def round_fairness_check(trace, d: int = 0) -> bool:
    """True iff every port flow of every step is ``floor(x/d+)`` or ``ceil(x/d+)``."""
    return all(_step_checks(f, d)[1].all() for f in trace)


@dataclass(frozen=True)
class GoodSResult:
    max_s: int
    round_fair: bool
    delta: int

    def passes(self, s: int) -> bool:
        return s >= 1 and self.max_s >= s


def good_s_check(trace, d: int, s: int | None = None):
    """Largest ``s`` for which a flow trace satisfies the good s-balancer rules.

    The trace must be round-fair and cumulatively 1-fair on the original
    edges; otherwise the result is ``0``. With ``s`` given, returns
    ``(passes, result)``.
    """
    trace = list(trace)
    if not trace:
        raise PreconditionError("empty trace")
    dp = trace[0].ports.shape[1]
    cum = np.zeros_like(trace[0].ports)
    delta = 0
    rf = True
    cap = dp
    for f in trace:
        cum = cum + f.ports
        if d > 1:
            delta = max(delta, int((cum[:, :d].max(axis=1) - cum[:, :d].min(axis=1)).max()))
        _, round_ok, s_cap = _step_checks(f, d)
        rf = rf and bool(round_ok.all())
        cap = min(cap, int(s_cap.min()))
    max_s = min(cap, dp - d) if (rf and delta <= 1) else 0
    res = GoodSResult(max_s, rf, delta)
    if s is None:
        return res
    return res.passes(s), res


@dataclass(frozen=True)
class FairnessReport:
    steps: int
    delta_observed: int
    round_fair: bool
    floor_ok: bool
    good_s: int
    violations: tuple
    violation_count: int

    CSV_HEADER = "steps,delta_observed,round_fair,floor_ok,max_s,violations"

    def csv_row(self) -> str:
        return (f"{self.steps},{self.delta_observed},{int(self.round_fair)},"
                f"{int(self.floor_ok)},{self.good_s},{self.violation_count}")


def audit(ledger: FlowLedger) -> FairnessReport:
    return FairnessReport(ledger.t, ledger.delta_observed, ledger.round_fair,
                          ledger.floor_ok, ledger.max_s, tuple(ledger.violations),
                          ledger.violation_count)


# ---------------------------------------------------------------- normalization


@dataclass(frozen=True, eq=False)
class NormalizedLedger:
    """Per-step flows after moving self-loop tokens into the remainder.

    ``ports[t]``/``remainder[t]`` hold step ``t + 1``; ``F[t]`` the cumulative
    port flows after it.
    """

    graph: BalancingGraph
    x1: np.ndarray
    delta: int
    ports: np.ndarray        # (T, n, d+)
    remainder: np.ndarray    # (T, n)
    F: np.ndarray            # (T, n, d+)

    @property
    def steps(self) -> int:
        return self.ports.shape[0]

    @property
    def F_out(self) -> np.ndarray:
        return self.F.sum(axis=2)

    @property
    def max_abs_remainder(self) -> int:
        return int(np.abs(self.remainder).max(initial=0))

    @property
    def all_edge_gap(self) -> int:
        if not self.steps:
            return 0
        return int((self.F.max(axis=2) - self.F.min(axis=2)).max())

    @property
    def share_deviation(self) -> float:
        """``max |F'_t(u, v) - F'_out_t(u) / d+|`` over all ports and steps."""
        if not self.steps:
            return 0.0
        dp = self.graph.d_plus
        scaled = np.abs(dp * self.F - self.F_out[..., None])
        return float(scaled.max()) / dp


def normalize_remainder(source, delta: int | None = None) -> NormalizedLedger:
    """Make every port pairwise cumulatively ``delta``-fair, originals untouched.

    Ports are processed in canonical order (originals first). A port whose new
    cumulative value would leave the window ``[max_seen - delta,
    min_seen + delta]`` spanned by the ports already processed at that node
    is clipped into it, and the difference moves into the node's remainder.
    For round-fair input this is the single-token adjustment; wider gaps (as
    Send(floor) produces on its loops) are clipped in one move.

    ``source`` is a ledger recorded with ``keep_trace=True``.
    """
    g = source.graph
    d, dp, n = g.d, g.d_plus, g.n
    trace = source.trace
    if source.t and not trace:
        raise PreconditionError("ledger was recorded without keep_trace=True")
    if delta is None:
        delta = source.delta_observed
    if source.delta_observed > delta:
        raise PreconditionError(
            f"input is only {source.delta_observed}-fair on original edges (delta={delta})")
    T = len(trace)
    ports = np.zeros((T, n, dp), dtype=np.int64)
    rem = np.zeros((T, n), dtype=np.int64)
    F = np.zeros((T, n, dp), dtype=np.int64)
    cum = np.zeros((n, dp), dtype=np.int64)
    for t, fl in enumerate(trace):
        x = fl.load
        new = np.empty_like(cum)
        for j in range(dp):
            cand = cum[:, j] + fl.ports[:, j]
            if j:
                lo = new[:, :j].max(axis=1) - delta
                hi = new[:, :j].min(axis=1) + delta
                cand = np.clip(cand, lo, hi)
            new[:, j] = cand
        step_ports = new - cum
        if not np.array_equal(step_ports[:, :d], fl.ports[:, :d]):
            raise PreconditionError(f"original-edge flow would change at step {t + 1}")
        ports[t] = step_ports
        rem[t] = x - step_ports.sum(axis=1)
        cum = new
        F[t] = cum
    return NormalizedLedger(g, np.asarray(source.x1, dtype=np.int64), delta, ports, rem, F)


@dataclass(frozen=True, eq=False)
class DeviationReport:
    epsilon: np.ndarray          # (T, n) error vectors eps_t, t = 1..T
    corrective: np.ndarray       # (T, n, d+1) delta_{t,u}: neighbors then the node itself
    residual: float
    eps_inf: float
    eps_bound: float
    corrective_inf: float

    @property
    def within_bound(self) -> bool:
        return self.eps_inf <= self.eps_bound + 1e-12


def deviation_diagnostics(norm: NormalizedLedger, P: TransitionMatrix,
                          tol: float = 1e-9) -> DeviationReport:
    """Error vectors of the cumulative out-flow recursion.

    With ``delta_{t,u}(v) = F_t(v, u) - F_out_t(v) / d+`` for neighbours and
    ``delta_{t,u}(u) = F_t(u, u) - d°/d+ F_out_t(u)`` (all loops of u), the
    error ``eps_t(u) = sum_v delta_{t-1,u}(v) - r_t(u)`` makes

        F_out_t = x_1 + P F_out_{t-1} + eps_t

    hold exactly. Everything is computed in integers scaled by ``d+`` (P is
    used as the integer matrix ``d+ P``), so the residual is exact.
    """
    g = norm.graph
    n, d, dp, k = g.n, g.d, g.d_plus, g.d_loops
    Pint = np.rint(P.dense() * dp).astype(np.int64)
    if not np.allclose(Pint / dp, P.dense(), atol=1e-12):
        raise DiagnosticsFailure("P is not the transition matrix of a d+-regular balancing graph")
    T = norm.steps
    eps = np.zeros((T, n))
    corr = np.zeros((T, n, d + 1))
    worst_res = 0
    adj, rev = g.base.adjacency, g.base.reverse_index
    F_prev = np.zeros((n, dp), dtype=np.int64)
    for t in range(T):
        Fo_prev = F_prev.sum(axis=1)
        # scaled corrective entries: d+ * delta_{t-1,u}(v)
        nb = dp * F_prev[adj, rev] - Fo_prev[adj]
        own = dp * F_prev[:, d:].sum(axis=1) - k * Fo_prev
        scaled_eps = nb.sum(axis=1) + own - dp * norm.remainder[t]
        Fo = norm.F[t].sum(axis=1)
        res = dp * Fo - (dp * norm.x1 + Pint @ Fo_prev + scaled_eps)
        worst_res = max(worst_res, int(np.abs(res).max(initial=0)))
        eps[t] = scaled_eps / dp
        F_prev = norm.F[t]
        nb_t = dp * F_prev[adj, rev] - F_prev.sum(axis=1)[adj]
        own_t = dp * F_prev[:, d:].sum(axis=1) - k * F_prev.sum(axis=1)
        corr[t, :, :d] = nb_t / dp
        corr[t, :, d] = own_t / dp
    residual = worst_res / dp
    if residual > tol:
        raise DiagnosticsFailure(f"recursion residual {residual} exceeds {tol}")
    r = norm.max_abs_remainder
    return DeviationReport(eps, corr, residual, float(np.abs(eps).max(initial=0.0)),
                           norm.delta * dp + r, float(np.abs(corr).max(initial=0.0)))
