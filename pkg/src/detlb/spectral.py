"""Transition matrix of the balancing graph and its mixing quantities.

All logarithms are natural. Dense float64 linear algebra is used up to
``DENSE_LIMIT`` nodes; above that ``eigen_gap`` falls back to deflated power
iteration on a sparse matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix, identity

from .errors import NoSteadyState, NumericFailure
from .graphs import BalancingGraph, odd_girth

DENSE_LIMIT = 1024

__all__ = [
    "DENSE_LIMIT",
    "TransitionMatrix",
    "SpectralSummary",
    "LambdaBoundReport",
    "transition_matrix",
    "steady_state",
    "eigenvalues",
    "eigen_gap",
    "spectral_summary",
    "error_matrix",
    "lambda_bound_check",
    "current_sum",
    "current_sums",
    "t_mu",
    "balancing_time",
]


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Random-walk matrix of G+: ``1/d+`` per original edge, ``d°/d+`` on the diagonal."""

    n: int
    d: int
    d_loops: int
    entries: np.ndarray | csr_matrix

    @property
    def d_plus(self) -> int:
        return self.d + self.d_loops

    @property
    def is_dense(self) -> bool:
        return isinstance(self.entries, np.ndarray)

    def dense(self) -> np.ndarray:
        return self.entries if self.is_dense else self.entries.toarray()

    def __matmul__(self, x):
        return self.entries @ x


@dataclass(frozen=True)
class SpectralSummary:
    n: int
    d: int
    d_loops: int
    lambda2: float
    method: str = "dense"
    iterations: int = 0

    @property
    def mu(self) -> float:
        return 1.0 - self.lambda2

    @property
    def t_mu(self) -> float:
        return t_mu(self.n, self.mu)

    def T_of(self, K: int) -> float:
        return balancing_time(self.n, K, self.mu)

    def csv_row(self, K: int) -> str:
        return (f"{self.n},{self.d},{self.d_loops},{self.lambda2!r},{self.mu!r},"
                f"{self.t_mu!r},{self.T_of(K)!r}")


CSV_HEADER = "n,d,d_loops,lambda2,mu,t_mu,T"


def t_mu(n: int, mu: float) -> float:
    """``6 ln n / mu``."""
    return 6.0 * math.log(n) / mu


def balancing_time(n: int, K: int, mu: float) -> float:
    """``16 ln(n K) / mu`` (K clamped to >= 1)."""
    return 16.0 * math.log(n * max(K, 1)) / mu


def transition_matrix(g: BalancingGraph, *, sparse: bool | None = None) -> TransitionMatrix:
    n, dp = g.n, g.d_plus
    if sparse is None:
        sparse = n > DENSE_LIMIT
    rows = np.repeat(np.arange(n), g.d)
    cols = g.base.adjacency.ravel()
    if sparse:
        m = csr_matrix((np.full(rows.size, 1.0 / dp), (rows, cols)), shape=(n, n))
        m = (m + identity(n, format="csr") * (g.d_loops / dp)).tocsr()
    else:
        m = np.zeros((n, n))
        m[rows, cols] = 1.0 / dp
        m[np.arange(n), np.arange(n)] = g.d_loops / dp
    return TransitionMatrix(n, g.d, g.d_loops, m)


def steady_state(g: BalancingGraph) -> np.ndarray:
    """The uniform stationary row vector; requires an ergodic chain."""
    if not g.base.is_connected():
        raise NoSteadyState("chain is reducible (graph disconnected)")
    if g.d_loops == 0 and odd_girth(g) is None:
        raise NoSteadyState("chain is periodic (bipartite graph without self-loops)")
    return np.full(g.n, 1.0 / g.n)


def eigenvalues(P) -> np.ndarray:
    """All eigenvalues, descending (dense symmetric solver)."""
    a = P.dense() if isinstance(P, TransitionMatrix) else np.asarray(P)
    return np.linalg.eigvalsh(a)[::-1]


def eigen_gap(P, *, method: str = "auto", tol: float = 1e-11,
              max_iter: int = 500_000, seed: int = 0) -> SpectralSummary:
    """Second-largest eigenvalue and the gap ``mu = 1 - lambda2``.

    ``method="auto"`` uses ``numpy.linalg.eigvalsh`` for ``n <= DENSE_LIMIT``
    and deflated power iteration otherwise. Power iteration runs on the
    shifted matrix ``(I + P) / 2`` (spectrum in ``[0, 1]``, order preserved) with
    the uniform eigenvector projected out.
    """
    if not isinstance(P, TransitionMatrix):
        a = np.asarray(P, dtype=float)
        P = TransitionMatrix(a.shape[0], 0, 0, a)
    n = P.n
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "power"
    if n == 1:
        return SpectralSummary(n, P.d, P.d_loops, 0.0, method)
    if method == "dense":
        lam = eigenvalues(P)
        return SpectralSummary(n, P.d, P.d_loops, float(lam[1]), "dense")
    if method != "power":
        raise ValueError(f"unknown method {method!r}")

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x -= x.mean()
    x /= np.linalg.norm(x)
    rho = 0.0
    for it in range(1, max_iter + 1):
        y = 0.5 * (x + P @ x)
        y -= y.mean()
        rho = float(x @ y)
        res = np.linalg.norm(y - rho * x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            rho = 0.0
            break
        x = y / ny
        if res < tol:
            break
    else:
        raise NumericFailure(f"power iteration did not converge in {max_iter} iterations",
                             iterations=max_iter)
    return SpectralSummary(n, P.d, P.d_loops, 2.0 * rho - 1.0, "power", it)


def spectral_summary(g: BalancingGraph, **kw) -> SpectralSummary:
    return eigen_gap(transition_matrix(g), **kw)


def error_matrix(P, t: int) -> np.ndarray:
    """``Lambda_t = P^t - P^inf`` as a dense matrix (uniform steady state)."""
    a = P.dense() if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    n = a.shape[0]
    return np.linalg.matrix_power(a, t) - np.full((n, n), 1.0 / n)


@dataclass(frozen=True)
class LambdaBoundReport:
    c: int
    threshold_i: int
    threshold_ii: int
    worst_i: float          # max ||Lambda_t q_t||_inf over t >= threshold_i
    bound_i: float          # 2^-c
    sum_ii: float           # truncated sum plus rigorous geometric tail
    bound_ii: float         # n^-c max ||q||_inf
    horizon: int

    @property
    def claim_i(self) -> bool:
        return self.worst_i <= self.bound_i

    @property
    def claim_ii(self) -> bool:
        return self.sum_ii <= self.bound_ii

    @property
    def margin_i(self) -> float:
        return self.bound_i - self.worst_i

    @property
    def margin_ii(self) -> float:
        return self.bound_ii - self.sum_ii


def lambda_bound_check(P, q_sequence, c: int, *, tail_eps: float = 1e-3) -> LambdaBoundReport:
    """Numerically check both mixing bounds on ``Lambda_t q_t``.

    ``q_sequence`` is a ``(k, n)`` array, read periodically: ``q_t = Q[t % k]``.
    Terms are computed by iterating ``Y <- Y P`` on the centred rows. The sum
    for claim (ii) is evaluated up to a horizon past which the geometric tail
    ``lam*^H / (1 - lam*) * max ||q - qbar||_2`` is below ``tail_eps`` times the
    bound; that tail is added, so the reported sum is an upper bound.
    """
    a = P.dense() if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    n = a.shape[0]
    Q = np.atleast_2d(np.asarray(q_sequence, dtype=float))
    k = Q.shape[0]
    centred = Q - Q.mean(axis=1, keepdims=True)
    dev_inf = float(np.abs(centred).max())
    dev_two = float(np.linalg.norm(centred, axis=1).max())
    q_inf = float(np.abs(Q).max())
    lam = np.linalg.eigvalsh(a)
    mu = 1.0 - lam[-2]
    lam_star = max(abs(lam[-2]), abs(lam[0]))

    bound_i = 2.0 ** (-c)
    bound_ii = float(n) ** (-c) * q_inf
    arg = n * dev_inf
    t_i = max(0, math.ceil(4 * c * math.log(arg) / mu)) if arg > 1 else 0
    t_ii = math.ceil(6 * c * math.log(n) / mu)
    if dev_two == 0.0:
        return LambdaBoundReport(c, t_i, t_ii, 0.0, bound_i, 0.0, bound_ii, 0)

    target = tail_eps * max(min(bound_i, bound_ii), 1e-300)
    if lam_star >= 1.0:
        raise NumericFailure("chain does not mix (|lambda| = 1 beyond the top eigenvalue)")
    # smallest H with lam*^H/(1-lam*) * dev_two <= target
    h = math.log(target * (1 - lam_star) / dev_two) / math.log(lam_star) if lam_star > 0 else 0
    horizon = max(t_i, t_ii, math.ceil(h)) + 1

    worst_i = 0.0
    total = 0.0
    Y = centred.copy()
    for t in range(horizon):
        term = float(np.abs(Y[t % k]).max())
        if t >= t_i:
            worst_i = max(worst_i, term)
        if t >= t_ii:
            total += term
        Y = Y @ a
    tail = (lam_star ** horizon) / (1 - lam_star) * dev_two if lam_star > 0 else 0.0
    worst_i = max(worst_i, tail)
    return LambdaBoundReport(c, t_i, t_ii, worst_i, bound_i, total + tail, bound_ii, horizon)


def current_sums(P, A: int) -> np.ndarray:
    """``current_sum(a)`` for ``a = 0..A``."""
    a_mat = P.dense() if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    n = a_mat.shape[0]
    out = np.empty(A + 1)
    Pa = np.eye(n)
    for a in range(A + 1):
        nxt = Pa @ a_mat
        out[a] = np.abs(nxt - Pa).sum(axis=0).max()
        Pa = nxt
    return out


def current_sum(P, a: int) -> float:
    """``max_w sum_v |P^{a+1}(v, w) - P^a(v, w)|``."""
    if a < 0:
        raise ValueError("a must be >= 0")
    m = P.dense() if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    Pa = np.linalg.matrix_power(m, a)
    return float(np.abs(Pa @ m - Pa).sum(axis=0).max())
