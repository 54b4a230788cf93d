"""Regular graphs, balancing graphs (self-loop augmentation) and BFS queries.

Graphs are immutable. Adjacency is stored as an ``(n, d)`` integer array whose
rows are sorted ascending; the balancing graph adds ``d_loops`` self-loop ports
after the original edges of every node, which fixes a canonical port order::

    ports(u) = [edge -> adj[u][0], ..., edge -> adj[u][d-1], loop, ..., loop]
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import (DisconnectedGraph, GenerationFailure, InvalidParameter)

__all__ = [
    "RegularGraph",
    "BalancingGraph",
    "DistanceLabeling",
    "make_cycle",
    "make_torus",
    "make_hypercube",
    "make_random_regular",
    "make_circulant_clique",
    "augment",
    "diameter",
    "odd_girth",
    "odd_girth_phi",
    "distance_labeling",
    "graph_queries",
    "read_graph",
    "write_graph",
    "format_graph",
    "parse_graph",
]


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RegularGraph:
    """Simple, symmetric, d-regular graph on nodes ``0..n-1``."""

    n: int
    d: int
    adjacency: np.ndarray = field(repr=False)

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int64).reshape(self.n, self.d)
        adj = np.sort(adj, axis=1)
        object.__setattr__(self, "adjacency", _frozen(adj))
        self._validate()

    def _validate(self):
        adj = self.adjacency
        n, d = self.n, self.d
        if n < 1 or d < 0:
            raise InvalidParameter(f"bad dimensions n={n}, d={d}")
        if adj.size and (adj.min() < 0 or adj.max() >= n):
            raise InvalidParameter("neighbor index out of range")
        if np.any(adj == np.arange(n)[:, None]):
            raise InvalidParameter("self-entries are not allowed in a RegularGraph")
        if d > 1 and np.any(adj[:, 1:] == adj[:, :-1]):
            raise InvalidParameter("duplicate neighbor entries")
        # symmetry: the multiset of directed arcs equals its reverse
        src = np.repeat(np.arange(n), d)
        fwd = np.sort(src * n + adj.ravel())
        rev = np.sort(adj.ravel() * n + src)
        if not np.array_equal(fwd, rev):
            raise InvalidParameter("adjacency is not symmetric")

    def neighbors(self, u: int) -> list[int]:
        return self.adjacency[u].tolist()

    def edges(self):
        """Undirected edges ``(u, v)`` with ``u < v``, lexicographically sorted."""
        src = np.repeat(np.arange(self.n), self.d)
        dst = self.adjacency.ravel()
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    @cached_property
    def reverse_index(self) -> np.ndarray:
        """``rev[u, k]`` is the position of ``u`` in ``adj[adj[u, k]]``."""
        n, d = self.n, self.d
        adj = self.adjacency
        rev = np.empty((n, d), dtype=np.int64)
        # position lookup via searchsorted on each sorted neighbor row
        for k in range(d):
            v = adj[:, k]
            rows = adj[v]
            rev[:, k] = (rows < np.arange(n)[:, None]).sum(axis=1)
        assert np.array_equal(adj[adj, rev], np.broadcast_to(np.arange(n)[:, None], (n, d)))
        return _frozen(rev)

    def to_sparse(self) -> csr_matrix:
        data = np.ones(self.n * self.d)
        src = np.repeat(np.arange(self.n), self.d)
        return csr_matrix((data, (src, self.adjacency.ravel())), shape=(self.n, self.n))

    @cached_property
    def distances(self) -> np.ndarray:
        dist = shortest_path(self.to_sparse(), unweighted=True, directed=False)
        return dist

    def is_connected(self) -> bool:
        return bool(np.isfinite(self.distances[0]).all())

    def is_bipartite(self) -> bool:
        return odd_girth(self) is None

    def same_as(self, other: "RegularGraph") -> bool:
        return (self.n, self.d) == (other.n, other.d) and np.array_equal(
            self.adjacency, other.adjacency)


@dataclass(frozen=True, eq=False)
class BalancingGraph:
    """A regular graph plus ``d_loops`` self-loops per node.

    Attributes
    ----------
    base : RegularGraph
    d_loops : int
        Self-loops per node.
    ports : ndarray, shape (n, d_plus)
        Destination node of every port (the node itself for loop ports).
    in_src, in_port : ndarray, shape (n, d_plus)
        Incoming gather tables: node ``u`` receives over its ``k``-th incoming
        arc what node ``in_src[u, k]`` put on its port ``in_port[u, k]``.
        Column ``k < d`` is the arc from ``adj[u][k]``; columns ``>= d`` are
        the loops of ``u`` itself.
    """

    base: RegularGraph
    d_loops: int
    ports: np.ndarray = field(init=False, repr=False)
    in_src: np.ndarray = field(init=False, repr=False)
    in_port: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.d_loops < 0:
            raise InvalidParameter("d_loops must be >= 0")
        n, d, k = self.base.n, self.base.d, self.d_loops
        if d + k == 0:
            raise InvalidParameter("balancing graph needs at least one port per node")
        own = np.broadcast_to(np.arange(n)[:, None], (n, k))
        ports = np.concatenate([self.base.adjacency, own], axis=1)
        in_src = ports.copy()
        in_port = np.concatenate(
            [self.base.reverse_index, np.broadcast_to(np.arange(d, d + k), (n, k))], axis=1)
        object.__setattr__(self, "ports", _frozen(ports))
        object.__setattr__(self, "in_src", _frozen(in_src))
        object.__setattr__(self, "in_port", _frozen(in_port))

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def d_plus(self) -> int:
        return self.base.d + self.d_loops

    @property
    def loop_mask(self) -> np.ndarray:
        return np.arange(self.d_plus) >= self.d

    def port_labels(self, u: int) -> list[str]:
        """Human-readable port list, e.g. ``['edge->1', 'edge->2', 'loop', 'loop']``."""
        return [f"edge->{v}" for v in self.base.adjacency[u]] + ["loop"] * self.d_loops

    def incoming(self, flows: np.ndarray) -> np.ndarray:
        """Per-node incoming totals for a ``(n, d_plus)`` port-flow array."""
        return flows[self.in_src, self.in_port].sum(axis=1)


@dataclass(frozen=True)
class DistanceLabeling:
    source: int
    b: np.ndarray = field(repr=False)

    @property
    def eccentricity(self) -> int:
        return int(self.b.max())


# ---------------------------------------------------------------- generators


def make_cycle(n: int) -> RegularGraph:
    if n < 3:
        raise InvalidParameter(f"cycle needs n >= 3, got {n}")
    i = np.arange(n)
    return RegularGraph(n, 2, np.stack([(i - 1) % n, (i + 1) % n], axis=1))


def make_torus(side: int, r: int) -> RegularGraph:
    """r-dimensional torus with ``side**r`` nodes (2r-regular)."""
    if side < 3:
        raise InvalidParameter(f"torus side must be >= 3, got {side}")
    if r < 1:
        raise InvalidParameter(f"torus dimension must be >= 1, got {r}")
    n = side ** r
    coords = np.stack(np.unravel_index(np.arange(n), (side,) * r), axis=1)
    cols = []
    for axis in range(r):
        for step in (-1, 1):
            c = coords.copy()
            c[:, axis] = (c[:, axis] + step) % side
            cols.append(np.ravel_multi_index(tuple(c.T), (side,) * r))
    return RegularGraph(n, 2 * r, np.stack(cols, axis=1))


def make_hypercube(dim: int) -> RegularGraph:
    if dim < 1:
        raise InvalidParameter(f"hypercube dimension must be >= 1, got {dim}")
    i = np.arange(2 ** dim)
    return RegularGraph(2 ** dim, dim, np.stack([i ^ (1 << b) for b in range(dim)], axis=1))


def make_random_regular(n: int, d: int, seed: int, *, connected: bool = True,
                        max_tries: int = 2000) -> RegularGraph:
    """Seeded pairing-model sampler for simple d-regular graphs.

    Stubs are paired by a random shuffle; pairs that would create a loop or a
    multi-edge are returned to the pool and re-paired. A round that leaves no
    usable pair restarts from scratch. With ``connected=True`` disconnected
    samples are rejected too. Same ``(n, d, seed)`` gives the same graph.
    """
    if n < 1 or d < 0:
        raise InvalidParameter("need n >= 1 and d >= 0")
    if (n * d) % 2:
        raise InvalidParameter(f"n*d must be even (n={n}, d={d})")
    if d >= n:
        raise InvalidParameter(f"need d < n (n={n}, d={d})")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        edges = _try_pairing(n, d, rng)
        if edges is None:
            continue
        adj = [[] for _ in range(n)]
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        g = RegularGraph(n, d, np.array(adj, dtype=np.int64).reshape(n, d))
        if connected and d > 0 and not g.is_connected():
            continue
        return g
    raise GenerationFailure(f"no simple d-regular graph after {max_tries} attempts (n={n}, d={d})")


def _try_pairing(n, d, rng):
    edges = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        stubs = rng.permutation(stubs)
        pairs = np.sort(stubs.reshape(-1, 2), axis=1)
        left = []
        for a, b in pairs.tolist():
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                left.extend((a, b))
        if len(left) == stubs.size:
            # no progress possible unless some remaining pair is admissible
            rem = sorted(set(left))
            if not any(a != b and (a, b) not in edges
                       for i, a in enumerate(rem) for b in rem[i + 1:]):
                return None
        stubs = np.array(left, dtype=np.int64)
    return sorted(edges)


def make_circulant_clique(n: int, d: int) -> RegularGraph:
    """Circulant graph containing the clique ``{0, ..., d//2 - 1}``.

    ``i ~ j`` iff ``(i - j) mod n`` lies in ``{+-1, ..., +-(d//2)}``, plus the
    antipodal chord ``n/2`` when ``d`` is odd.
    """
    h = d // 2
    if n % 2 or not 2 * h < n or d < 1:
        raise InvalidParameter(f"circulant clique needs even n and 2*floor(d/2) < n (n={n}, d={d})")
    i = np.arange(n)
    offsets = [k for k in range(1, h + 1)] + [-k for k in range(1, h + 1)]
    if d % 2:
        offsets.append(n // 2)
    return RegularGraph(n, d, np.stack([(i + o) % n for o in offsets], axis=1))


def augment(g: RegularGraph, d_loops: int) -> BalancingGraph:
    return BalancingGraph(g, d_loops)


# ---------------------------------------------------------------- queries


def _base(g) -> RegularGraph:
    return g.base if isinstance(g, BalancingGraph) else g


def diameter(g) -> int:
    dist = _base(g).distances
    if not np.isfinite(dist).all():
        raise DisconnectedGraph("diameter of a disconnected graph")
    return int(dist.max())


def distance_labeling(g, source: int = 0) -> DistanceLabeling:
    row = _base(g).distances[source]
    if not np.isfinite(row).all():
        raise DisconnectedGraph("graph is disconnected")
    b = row.astype(np.int64)
    b.setflags(write=False)
    return DistanceLabeling(source, b)


def odd_girth(g) -> int | None:
    """Length of the shortest odd cycle, or ``None`` for bipartite graphs."""
    g = _base(g)
    dist = g.distances
    e = g.edges()
    if not len(e):
        return None
    da, db = dist[:, e[:, 0]], dist[:, e[:, 1]]
    same = (da == db) & np.isfinite(da)
    if not same.any():
        return None
    return int(2 * da[same].min() + 1)


def odd_girth_phi(g) -> int | None:
    """``phi`` with odd girth ``2*phi + 1`` (``None`` if bipartite)."""
    og = odd_girth(g)
    return None if og is None else (og - 1) // 2


def graph_queries(g, source: int = 0) -> dict:
    og = odd_girth(g)
    return {
        "diameter": diameter(g),
        "odd_girth": "none" if og is None else og,
        "distance_labeling": distance_labeling(g, source),
    }


# ---------------------------------------------------------------- text format


def format_graph(bg: BalancingGraph) -> str:
    lines = [f"{bg.n} {bg.d} {bg.d_loops}"]
    for u, row in enumerate(bg.base.adjacency.tolist()):
        lines.append(" ".join(map(str, [u, *row])))
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> BalancingGraph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise InvalidParameter("header must be 'n d d_loops'")
    n, d, k = map(int, rows[0])
    if len(rows) != n + 1:
        raise InvalidParameter(f"expected {n} node lines, got {len(rows) - 1}")
    adj = np.empty((n, d), dtype=np.int64)
    seen = set()
    for fields in rows[1:]:
        vals = list(map(int, fields))
        u, nb = vals[0], vals[1:]
        if len(nb) != d:
            raise InvalidParameter(f"node {u}: expected {d} neighbors, got {len(nb)}")
        if not 0 <= u < n or u in seen:
            raise InvalidParameter(f"bad or repeated node index {u}")
        seen.add(u)
        adj[u] = nb
    return BalancingGraph(RegularGraph(n, d, adj), k)


def write_graph(bg: BalancingGraph, path) -> None:
    Path(path).write_text(format_graph(bg))


def read_graph(path) -> BalancingGraph:
    return parse_graph(Path(path).read_text())
