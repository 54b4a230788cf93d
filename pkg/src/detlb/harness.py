"""Experiment configuration, spec-string parsing, single runs and CSV output."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .balancers import (BalancerState, make_balancer, odd_cycle_rotor_config,
                        steady_state_adversary, step)
from .errors import ConfigError, DetlbError
from .fairness import FairnessReport, FlowLedger, audit
from .graphs import (BalancingGraph, augment, make_circulant_clique, make_cycle,
                     make_hypercube, make_random_regular, make_torus, read_graph)
from .metrics import MetricSeries, default_levels
from .spectral import DENSE_LIMIT, SpectralSummary, spectral_summary

__all__ = [
    "SIM_LIMIT",
    "ExperimentConfig",
    "RunResult",
    "parse_graph_spec",
    "parse_load_spec",
    "resolve_steps",
    "run",
    "emit_csv",
    "read_csv",
]

SIM_LIMIT = 4096


def parse_graph_spec(spec: str, d_loops: int = 0) -> BalancingGraph:
    """Build a balancing graph from ``cycle:n``, ``torus:SIDExR``,
    ``hypercube:dim``, ``random:n:d:seed``, ``circlique:n:d`` or ``file:path``.

    A ``file:`` graph keeps the loop count stored in the file.
    """
    kind, _, rest = spec.partition(":")
    try:
        if kind == "cycle":
            g = make_cycle(int(rest))
        elif kind == "torus":
            side, r = rest.lower().split("x")
            g = make_torus(int(side), int(r))
        elif kind == "hypercube":
            g = make_hypercube(int(rest))
        elif kind == "random":
            n, d, seed = rest.split(":")
            g = make_random_regular(int(n), int(d), int(seed))
        elif kind == "circlique":
            n, d = rest.split(":")
            g = make_circulant_clique(int(n), int(d))
        elif kind == "file":
            try:
                return read_graph(rest)
            except OSError as e:
                raise ConfigError(f"cannot read graph file {rest}: {e.strerror}") from e
        else:
            raise ConfigError(f"unknown graph kind {kind!r} in {spec!r}")
    except ValueError as e:
        if isinstance(e, DetlbError):
            raise
        raise ConfigError(f"malformed graph spec {spec!r}") from e
    return augment(g, d_loops)


def parse_load_spec(spec: str, n: int, seed: int = 0) -> np.ndarray:
    """``point:K``, ``uniform:m`` (m tokens per node), ``random:m[:seed]``
    (m tokens dropped uniformly at random; ``seed`` is the fallback) or
    ``file:path``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "point":
            x = np.zeros(n, dtype=np.int64)
            x[0] = int(rest)
        elif kind == "uniform":
            x = np.full(n, int(rest), dtype=np.int64)
        elif kind == "random":
            m, _, given = rest.partition(":")
            rng = np.random.default_rng(int(given) if given else seed)
            x = np.bincount(rng.integers(0, n, int(m)), minlength=n).astype(np.int64)
        elif kind == "file":
            try:
                x = np.loadtxt(rest, dtype=np.int64, ndmin=1, comments="#")
            except OSError as e:
                raise ConfigError(f"cannot read load file {rest}: {e.strerror}") from e
            if x.size != n:
                raise ConfigError(f"load file {rest} has {x.size} entries, graph has {n} nodes")
        else:
            raise ConfigError(f"unknown load kind {kind!r} in {spec!r}")
    except ValueError as e:
        if isinstance(e, DetlbError):
            raise
        raise ConfigError(f"malformed load spec {spec!r}") from e
    if (x < 0).any():
        raise ConfigError("loads must be non-negative")
    return x


@dataclass
class ExperimentConfig:
    """Everything that determines a run.

    ``balancer`` is one of the balancer names or ``adversary-steady`` /
    ``adversary-rotor-odd``; for the latter ``load`` must be ``base:L``.
    ``steps`` is an integer or ``"auto"`` for ``ceil(16 ln(n K) / mu)``.
    """

    graph: str
    d_loops: int = 0
    balancer: str = "send-floor"
    load: str = "point:0"
    steps: int | str = 0
    levels: list[int] | None = None
    seed: int = 0
    output: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))


@dataclass(eq=False)
class RunResult:
    config: ExperimentConfig
    series: MetricSeries
    fairness: FairnessReport | None
    spectral: SpectralSummary | None
    final_load: np.ndarray
    steps: int
    wall_time: float = field(default=0.0, compare=False)


def resolve_steps(steps, n: int, K: int, mu: float | None) -> int:
    if isinstance(steps, str):
        if steps != "auto":
            try:
                steps = int(steps)
            except ValueError:
                raise ConfigError(f"steps must be an integer or 'auto', got {steps!r}") from None
        else:
            if mu is None or mu <= 0:
                raise ConfigError("steps=auto needs a positive spectral gap")
            return math.ceil(16 * math.log(n * max(K, 1)) / mu)
    if steps < 0:
        raise ConfigError("steps must be >= 0")
    return int(steps)


def _setup(cfg: ExperimentConfig):
    g = parse_graph_spec(cfg.graph, cfg.d_loops)
    if g.n > SIM_LIMIT:
        raise ConfigError(f"n={g.n} exceeds the simulation cap {SIM_LIMIT}")
    if cfg.balancer == "adversary-steady":
        if g.d_loops:
            raise ConfigError("adversary-steady runs without self-loops")
        adv = steady_state_adversary(g.base)
        return adv.graph, adv.balancer, adv.load, BalancerState()
    if cfg.balancer == "adversary-rotor-odd":
        if g.d_loops:
            raise ConfigError("adversary-rotor-odd runs without self-loops")
        kind, _, L = cfg.load.partition(":")
        if kind != "base":
            raise ConfigError("adversary-rotor-odd needs load spec base:L")
        oc = odd_cycle_rotor_config(g.base, int(L))
        return oc.graph, oc.balancer, oc.load, oc.state
    try:
        bal = make_balancer(cfg.balancer)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    bal.check(g)
    x = parse_load_spec(cfg.load, g.n, cfg.seed)
    if not bal.discrete:
        x = x.astype(float)
    return g, bal, x, bal.init_state(g)


def run(cfg: ExperimentConfig, *, spectral: bool = True) -> RunResult:
    """Run one configuration, recording the ledger and metrics at every step."""
    start = time.perf_counter()
    g, bal, x, state = _setup(cfg)
    summary = None
    if spectral and g.n <= DENSE_LIMIT:
        summary = spectral_summary(g)
    elif cfg.steps == "auto":
        raise ConfigError(f"steps=auto needs dense spectral work, capped at n={DENSE_LIMIT}")
    K = int(round(float(np.max(x) - np.min(x)))) if x.size else 0
    steps = resolve_steps(cfg.steps, g.n, K, summary.mu if summary else None)

    levels = cfg.levels if cfg.levels is not None else (
        default_levels(x, g.d_plus) if bal.discrete else [])
    s = bal.self_preference(g)
    series = MetricSeries(levels, g.d_plus, s)
    series.append(0, x)
    ledger = FlowLedger(g, x) if bal.discrete else None
    for t in range(1, steps + 1):
        flows, x, state = step(bal, g, x, state)
        if ledger is not None:
            ledger.record(flows)
        series.append(t, x)
    report = audit(ledger) if ledger is not None and steps else None
    return RunResult(cfg, series, report, summary, x, steps,
                     time.perf_counter() - start)


def emit_csv(result: RunResult, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            result.series.write_csv(fh)
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}") from e


def read_csv(path, d_plus: int = 1, s: int = 1) -> MetricSeries:
    with open(Path(path), newline="") as fh:
        return MetricSeries.read_csv(fh, d_plus, s)
