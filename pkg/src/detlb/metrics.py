"""Scalar observables and the two potential families.

For a level ``c`` and degree ``d+``:

    phi(c)  = sum_v max(x(v) - c d+, 0)          tokens stacked above c d+
    phi'(c) = sum_v max(c d+ + s - x(v), 0)      holes below c d+ + s

The average load is kept exact as the pair ``(m, n)``; comparisons against it
use integers or :class:`fractions.Fraction`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "discrepancy",
    "balancedness",
    "average",
    "deviation_to_average",
    "potential_phi",
    "potential_phi_prime",
    "potentials",
    "drop_delta",
    "drop_delta_prime",
    "default_levels",
    "dip_window",
    "dip_threshold",
    "drop_below_line_check",
    "window_return_check",
    "interval_drop_check",
    "interval_rise_check",
    "PotentialMonitor",
    "WindowMonitor",
    "MetricSeries",
]


def discrepancy(x) -> int:
    x = np.asarray(x)
    return x.max() - x.min()


def average(x) -> Fraction:
    x = np.asarray(x)
    if x.dtype.kind in "iu":
        return Fraction(int(x.sum()), x.size)
    return Fraction(float(x.sum())) / x.size


def balancedness(x) -> float:
    """``max(x) - xbar``."""
    x = np.asarray(x)
    if x.dtype.kind in "iu":
        return float(Fraction(int(x.max())) - average(x))
    return float(x.max() - x.mean())


def deviation_to_average(x) -> float:
    """``max_u |x(u) - xbar|``; exact for integer loads."""
    x = np.asarray(x)
    if x.dtype.kind in "iu":
        n, m = x.size, int(x.sum())
        worst = max(abs(n * int(x.max()) - m), abs(n * int(x.min()) - m))
        return float(Fraction(worst, n))
    return float(np.abs(x - x.mean()).max())


def potential_phi(x, c, d_plus: int):
    x = np.asarray(x)
    return np.maximum(x - c * d_plus, 0).sum()


def potential_phi_prime(x, c, s: int, d_plus: int):
    x = np.asarray(x)
    return np.maximum(c * d_plus + s - x, 0).sum()


def potentials(x, levels, d_plus: int, s: int):
    """``(phi, phi')`` at every level, as two arrays."""
    x = np.asarray(x)
    thr = np.asarray(levels, dtype=np.int64)[:, None] * d_plus
    phi = np.maximum(x[None, :] - thr, 0).sum(axis=1)
    phip = np.maximum(thr + s - x[None, :], 0).sum(axis=1)
    return phi, phip


def drop_delta(x_prev, x, c, s: int, d_plus: int):
    """Guaranteed one-step drop of ``phi(c)`` at a node.

    ``min(x_prev, c d+ + s) - max(x, c d+)`` when the load fell from above
    ``c d+`` to below ``c d+ + s``, else 0. Vectorized over all arguments.
    """
    x_prev, x = np.asarray(x_prev), np.asarray(x)
    lvl = np.asarray(c) * d_plus
    val = np.minimum(x_prev, lvl + s) - np.maximum(x, lvl)
    active = (x_prev > x) & (x_prev > lvl) & (x < lvl + s)
    return np.where(active, val, 0)


def drop_delta_prime(x_prev, x, c, s: int, d_plus: int):
    """Guaranteed one-step drop of ``phi'(c)`` at a node (mirror of :func:`drop_delta`)."""
    x_prev, x = np.asarray(x_prev), np.asarray(x)
    lvl = np.asarray(c) * d_plus
    val = np.minimum(x, lvl + s) - np.maximum(x_prev, lvl)
    active = (x_prev < x) & (x_prev < lvl + s) & (x > lvl)
    return np.where(active, val, 0)


def default_levels(x0, d_plus: int, cap: int = 64) -> list[int]:
    """``0..ceil(max x0 / d+)``, evenly subsampled down to ``cap`` levels."""
    top = -(-int(np.max(x0)) // d_plus)
    if top + 1 <= cap:
        return list(range(top + 1))
    return sorted(set(np.linspace(0, top, cap).round().astype(int).tolist()))


def dip_window(n: int, d: int, mu: float, lam: float) -> int:
    """Window length ``ceil(6 d ln n / (mu (lam + 1)))``."""
    return math.ceil(6 * d * math.log(n) / (mu * (lam + 1)))


def dip_threshold(x, delta: int, r, d_plus: int, lam) -> Fraction:
    """``xbar + delta d+ + 2 r + 1/2 + lam`` as an exact fraction."""
    return average(x) + delta * d_plus + 2 * Fraction(r) + Fraction(1, 2) + Fraction(lam)


def drop_below_line_check(series, t: int, T_hat: int, lam, delta: int, r, d_plus: int):
    """Per node: does the load reach ``<= threshold`` at some step in ``[t+1, t+T_hat]``?

    ``series`` is a ``(steps + 1, n)`` load history, row ``i`` being the load
    after ``i`` steps.
    """
    series = np.asarray(series)
    if t < 0 or t + T_hat >= series.shape[0]:
        raise IndexError(f"window [{t + 1}, {t + T_hat}] outside recorded series "
                         f"of {series.shape[0] - 1} steps")
    limit = math.floor(dip_threshold(series[0], delta, r, d_plus, lam))
    return (series[t + 1:t + T_hat + 1] <= limit).any(axis=0)


def window_return_check(series, start: int, T_hat: int, lam, delta: int, r, d_plus: int):
    """Run :func:`drop_below_line_check` for every ``t`` from ``start`` on.

    Returns ``(ok, worst_gap)`` where ``worst_gap`` is the longest stretch
    (in steps) any node spent above the threshold after ``start``; every
    window passes iff ``worst_gap < T_hat``. Windows reaching past the
    series end are skipped.
    """
    series = np.asarray(series)
    last = series.shape[0] - 1 - T_hat
    if last < start:
        raise IndexError("series too short for a single window")
    limit = math.floor(dip_threshold(series[0], delta, r, d_plus, lam))
    below = series[start + 1:last + T_hat + 1] <= limit
    worst = 0
    for u in range(series.shape[1]):
        hits = np.flatnonzero(below[:, u])
        # positions relative to start+1; gaps include the leading stretch
        pts = np.concatenate([[-1], hits])
        gaps = np.diff(pts) - 1
        run = int(gaps.max(initial=0))
        # trailing stretch only matters inside full windows
        tail = below.shape[0] - 1 - (hits[-1] if hits.size else -1)
        if tail >= T_hat:
            run = max(run, tail)
        worst = max(worst, run)
    return worst < T_hat, worst


def interval_drop_check(series, t: int, t2: int, c: int, s: int, d_plus: int):
    """Interval drop of ``phi(c)`` over ``[t, t2]``.

    Nodes with ``x_t(u) >= c d+ + 1`` that reach ``<= c d+`` within the
    interval each force a drop of ``min(s, x_t(u) - c d+)``. Returns
    ``(holds, slack)`` with ``slack = bound - phi_{t2}``.
    """
    series = np.asarray(series)
    lvl = c * d_plus
    xt = series[t]
    dipped = (series[t:t2 + 1] <= lvl).any(axis=0)
    U = (xt >= lvl + 1) & dipped
    bound = potential_phi(xt, c, d_plus) - np.minimum(s, xt[U] - lvl).sum()
    phi2 = potential_phi(series[t2], c, d_plus)
    return bool(phi2 <= bound), int(bound - phi2)


def interval_rise_check(series, t: int, t2: int, c: int, s: int, d_plus: int):
    """Mirror of :func:`interval_drop_check` for ``phi'(c)``."""
    series = np.asarray(series)
    lvl = c * d_plus
    xt = series[t]
    rose = (series[t:t2 + 1] >= lvl + s).any(axis=0)
    U = (xt < lvl + s) & rose
    bound = potential_phi_prime(xt, c, s, d_plus) - np.minimum(s, lvl + s - xt[U]).sum()
    phi2 = potential_phi_prime(series[t2], c, s, d_plus)
    return bool(phi2 <= bound), int(bound - phi2)


@dataclass
class PotentialMonitor:
    """Step-by-step check of potential monotonicity and the per-step drop bounds.

    After each ``update(x_prev, x)`` it verifies, at every tracked level,

        phi_t  <= phi_{t-1}  - sum_u drop_delta
        phi'_t <= phi'_{t-1} - sum_u drop_delta_prime
    """

    levels: np.ndarray
    s: int
    d_plus: int
    steps: int = 0
    increases: int = 0
    drop_failures: int = 0
    increases_prime: int = 0
    drop_failures_prime: int = 0
    min_slack: int | None = None
    min_slack_prime: int | None = None
    first_failure: tuple | None = None
    total_drop: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=np.int64)
        self.total_drop = np.zeros(self.levels.size, dtype=np.int64)

    @property
    def ok(self) -> bool:
        return not (self.increases or self.drop_failures
                    or self.increases_prime or self.drop_failures_prime)

    def update(self, x_prev, x):
        c = self.levels[:, None]
        phi0, phip0 = potentials(x_prev, self.levels, self.d_plus, self.s)
        phi1, phip1 = potentials(x, self.levels, self.d_plus, self.s)
        dd = drop_delta(x_prev[None, :], x[None, :], c, self.s, self.d_plus).sum(axis=1)
        ddp = drop_delta_prime(x_prev[None, :], x[None, :], c, self.s, self.d_plus).sum(axis=1)
        self.steps += 1
        slack = phi0 - dd - phi1
        slackp = phip0 - ddp - phip1
        self.total_drop += dd
        self.increases += int((phi1 > phi0).sum())
        self.increases_prime += int((phip1 > phip0).sum())
        bad = int((slack < 0).sum())
        badp = int((slackp < 0).sum())
        self.drop_failures += bad
        self.drop_failures_prime += badp
        if (bad or badp) and self.first_failure is None:
            self.first_failure = (self.steps, x_prev.copy(), x.copy())
        ms, msp = int(slack.min()), int(slackp.min())
        self.min_slack = ms if self.min_slack is None else min(self.min_slack, ms)
        self.min_slack_prime = msp if self.min_slack_prime is None else min(self.min_slack_prime, msp)


@dataclass
class WindowMonitor:
    """Online form of :func:`window_return_check` for runs too long to store.

    Feed every load ``x_t`` in order with ``update(t, x)``. For ``t > start``
    the monitor tracks, per node, the last step at which the load was at or
    below ``limit``; ``longest`` is the longest run of consecutive steps any
    node has spent above it since ``start``. All windows of length ``T_hat``
    starting after ``start`` contain a dip iff ``longest < T_hat``.
    """

    limit: int
    start: int
    T_hat: int
    n: int
    longest: int = 0
    last: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.last = np.full(self.n, self.start, dtype=np.int64)

    @classmethod
    def for_dip_line(cls, x1, start: int, T_hat: int, lam, delta: int, r, d_plus: int):
        limit = math.floor(dip_threshold(x1, delta, r, d_plus, lam))
        return cls(limit, start, T_hat, len(x1))

    @property
    def ok(self) -> bool:
        return self.longest < self.T_hat

    def update(self, t: int, x) -> None:
        if t <= self.start:
            return
        self.last[np.asarray(x) <= self.limit] = t
        self.longest = max(self.longest, int(t - self.last.min()))


class MetricSeries:
    """Per-step observables; row ``t`` describes the load after ``t`` steps.

    Columns: ``t, max, min, discrepancy, balancedness, dev_to_avg``, then
    ``phi_c<k>`` and ``phiP_c<k>`` for each tracked level ``k``.
    """

    BASE = ["t", "max", "min", "discrepancy", "balancedness", "dev_to_avg"]

    def __init__(self, levels=(), d_plus: int = 1, s: int = 1):
        self.levels = [int(c) for c in levels]
        self.d_plus = d_plus
        self.s = s
        self.rows: list[list] = []

    @property
    def columns(self) -> list[str]:
        return (self.BASE + [f"phi_c{c}" for c in self.levels]
                + [f"phiP_c{c}" for c in self.levels])

    def append(self, t: int, x) -> None:
        x = np.asarray(x)
        row = [t, x.max().item(), x.min().item(), discrepancy(x).item(),
               balancedness(x), deviation_to_average(x)]
        if self.levels:
            phi, phip = potentials(x, self.levels, self.d_plus, self.s)
            row += phi.tolist() + phip.tolist()
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[self.columns.index(name)] for r in self.rows])

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])

    @classmethod
    def read_csv(cls, fh, d_plus: int = 1, s: int = 1) -> "MetricSeries":
        rd = csv.reader(fh)
        header = next(rd)
        if header[:len(cls.BASE)] != cls.BASE:
            raise ValueError(f"unexpected header {header[:len(cls.BASE)]}")
        levels = [int(h[len("phi_c"):]) for h in header if h.startswith("phi_c")]
        out = cls(levels, d_plus, s)
        for rec in rd:
            row = []
            for name, v in zip(header, rec):
                if name in ("balancedness", "dev_to_avg"):
                    row.append(float(v))
                else:
                    row.append(_number(v))
            out.rows.append(row)
        return out


def _number(v: str):
    try:
        return int(v)
    except ValueError:
        return float(v)
