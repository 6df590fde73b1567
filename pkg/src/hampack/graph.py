"""Graph representation, seeded samplers, and the graph algebra.

Vertices are dense integers 0..n-1. Graphs are immutable after
construction and safe to share between threads; all mutation happens
inside the factory functions.
"""

from __future__ import annotations

import io
from typing import Iterable, Iterator, Sequence

import numpy as np

from .rng import stream


def edge(u: int, v: int) -> tuple[int, int]:
    """Canonical (u, v) with u < v. Loops are rejected."""
    if u == v:
        raise ValueError(f"loop edge ({u},{v}) not allowed")
    return (u, v) if u < v else (v, u)


class Graph:
    """Immutable simple undirected graph on vertices 0..n-1."""

    __slots__ = ("n", "adjacency", "edge_count", "_adj_sets", "_edge_set")

    def __init__(self, n: int, adjacency: tuple, edge_count: int):
        self.n = n
        self.adjacency = adjacency  # per-vertex sorted neighbor tuples
        self.edge_count = edge_count
        self._adj_sets = None
        self._edge_set = None

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        seen = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) outside universe 0..{n - 1}")
            seen.add(edge(u, v))
        return cls._from_edge_set(n, seen)

    @classmethod
    def _from_edge_set(cls, n: int, edge_set: set) -> "Graph":
        adj = [[] for _ in range(n)]
        for u, v in edge_set:
            adj[u].append(v)
            adj[v].append(u)
        return cls(n, tuple(tuple(sorted(a)) for a in adj), len(edge_set))

    @classmethod
    def _from_arrays(cls, n: int, us: np.ndarray, vs: np.ndarray) -> "Graph":
        # assumes canonical u < v, no duplicates
        m = len(us)
        if m == 0:
            return cls(n, tuple(() for _ in range(n)), 0)
        ends = np.concatenate([us, vs])
        nbrs = np.concatenate([vs, us])
        order = np.lexsort((nbrs, ends))
        ends = ends[order]
        nbrs = nbrs[order]
        counts = np.bincount(ends, minlength=n)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        adj = tuple(
            tuple(int(x) for x in nbrs[offsets[v]:offsets[v + 1]]) for v in range(n)
        )
        return cls(n, adj, m)

    # -- queries ---------------------------------------------------------

    @property
    def adj_sets(self) -> list:
        if self._adj_sets is None:
            self._adj_sets = [set(a) for a in self.adjacency]
        return self._adj_sets

    def edge_set(self) -> frozenset:
        if self._edge_set is None:
            self._edge_set = frozenset(
                (u, v) for u in range(self.n) for v in self.adjacency[u] if u < v
            )
        return self._edge_set

    def edges(self) -> Iterator[tuple[int, int]]:
        for u in range(self.n):
            for v in self.adjacency[u]:
                if u < v:
                    yield (u, v)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj_sets[u]

    def neighbors(self, v: int) -> tuple:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    def min_degree(self) -> int:
        return min(self.degrees()) if self.n else 0

    def max_degree(self) -> int:
        return max(self.degrees()) if self.n else 0

    def restrict(self, keep: set) -> "Graph":
        """Same universe, keeping only edges with both endpoints in ``keep``."""
        kept = {
            (u, v)
            for u in keep
            if 0 <= u < self.n
            for v in self.adjacency[u]
            if u < v and v in keep
        }
        return Graph._from_edge_set(self.n, kept)

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and self.adjacency == other.adjacency
        )

    def __hash__(self):
        return hash((self.n, self.adjacency))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.edge_count})"


class BipartitePair:
    """Bipartite graph with color classes ``left`` and ``right``.

    Every edge crosses between the sides; sides are disjoint vertex-id
    tuples (ids live in any shared universe).
    """

    __slots__ = ("left", "right", "cross_edges", "_adj_left", "_adj_right")

    def __init__(self, left: Sequence[int], right: Sequence[int], cross_edges):
        left = tuple(left)
        right = tuple(right)
        lset, rset = set(left), set(right)
        if len(lset) != len(left) or len(rset) != len(right):
            raise ValueError("duplicate vertex on a side")
        if lset & rset:
            raise ValueError("sides must be disjoint")
        edges = frozenset((a, b) for a, b in cross_edges)
        for a, b in edges:
            if a not in lset or b not in rset:
                raise ValueError(f"edge ({a},{b}) does not cross left -> right")
        self.left = left
        self.right = right
        self.cross_edges = edges
        self._adj_left = None
        self._adj_right = None

    @classmethod
    def from_graph(cls, g: Graph, left: Sequence[int], right: Sequence[int]) -> "BipartitePair":
        rset = set(right)
        edges = [
            (a, b) for a in left for b in g.adjacency[a] if b in rset
        ]
        return cls(left, right, edges)

    @property
    def adj_left(self) -> dict:
        if self._adj_left is None:
            adj = {a: [] for a in self.left}
            for a, b in self.cross_edges:
                adj[a].append(b)
            self._adj_left = {a: tuple(sorted(bs)) for a, bs in adj.items()}
        return self._adj_left

    @property
    def adj_right(self) -> dict:
        if self._adj_right is None:
            adj = {b: [] for b in self.right}
            for a, b in self.cross_edges:
                adj[b].append(a)
            self._adj_right = {b: tuple(sorted(xs)) for b, xs in adj.items()}
        return self._adj_right

    def degree(self, v: int) -> int:
        if v in self.adj_left:
            return len(self.adj_left[v])
        return len(self.adj_right[v])

    def edge_count(self) -> int:
        return len(self.cross_edges)

    def induced(self, left_keep: Iterable[int], right_keep: Iterable[int]) -> "BipartitePair":
        lk, rk = set(left_keep), set(right_keep)
        edges = [(a, b) for a, b in self.cross_edges if a in lk and b in rk]
        return BipartitePair(
            tuple(v for v in self.left if v in lk),
            tuple(v for v in self.right if v in rk),
            edges,
        )

    def __repr__(self):
        return f"BipartitePair(|A|={len(self.left)}, |B|={len(self.right)}, m={len(self.cross_edges)})"


# -- seeded samplers -----------------------------------------------------

_DENSE_THRESHOLD = 0.1  # geometric skip below, per-pair Bernoulli above


def _sample_indices(total: int, p: float, gen: np.random.Generator) -> np.ndarray:
    """Sorted linear indices of selected items among 0..total-1, iid prob p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability p={p} outside [0, 1]")
    if total == 0 or p == 0.0:
        return np.empty(0, dtype=np.int64)
    if p == 1.0:
        return np.arange(total, dtype=np.int64)
    if p < _DENSE_THRESHOLD:
        chunks = []
        pos = -1
        while True:
            remaining = total - pos - 1
            size = max(256, int(remaining * p * 1.2) + 16)
            skips = gen.geometric(p, size=size).astype(np.int64)
            idx = pos + np.cumsum(skips)
            inside = idx[idx < total]
            chunks.append(inside)
            if inside.size < idx.size:
                break
            pos = int(idx[-1])
        return np.concatenate(chunks)
    out = []
    start = 0
    block = 1 << 20
    while start < total:
        stop = min(total, start + block)
        mask = gen.random(stop - start) < p
        out.append(np.nonzero(mask)[0].astype(np.int64) + start)
        start = stop
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def _decode_pairs(n: int, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear index -> (u, v) with u < v, lexicographic pair order."""
    if idx.size == 0:
        return idx.copy(), idx.copy()
    k = idx.astype(np.float64)
    disc = (2 * n - 1) ** 2 - 8.0 * k
    u = np.floor((2 * n - 1 - np.sqrt(disc)) / 2).astype(np.int64)
    # float sqrt can land one row off; fix with exact integer row offsets
    for _ in range(2):
        t = u * (2 * n - u - 1) // 2
        too_high = t > idx
        u[too_high] -= 1
        t = u * (2 * n - u - 1) // 2
        t_next = (u + 1) * (2 * n - u - 2) // 2
        too_low = t_next <= idx
        u[too_low] += 1
    t = u * (2 * n - u - 1) // 2
    v = u + 1 + (idx - t)
    return u, v.astype(np.int64)


def gen_gnp(n: int, p: float, seed: int) -> Graph:
    """Binomial random graph: each of the C(n,2) pairs is an edge iid prob p.

    Deterministic for fixed (n, p, seed); O(expected edges) for sparse p
    via geometric skips.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = stream(seed, "gnp", n)
    total = n * (n - 1) // 2
    idx = _sample_indices(total, p, gen)
    us, vs = _decode_pairs(n, idx)
    return Graph._from_arrays(n, us, vs)


def gen_bipartite_gnnp(n: int, p: float, seed: int) -> BipartitePair:
    """Balanced random bipartite graph on sides 0..n-1 and n..2n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = stream(seed, "gnnp", n)
    idx = _sample_indices(n * n, p, gen)
    a = idx // n
    b = idx % n + n
    left = tuple(range(n))
    right = tuple(range(n, 2 * n))
    return BipartitePair(left, right, zip(a.tolist(), b.tolist()))


# -- graph algebra -------------------------------------------------------


def _check_universe(g: Graph, h: Graph):
    if g.n != h.n:
        raise ValueError(f"vertex universes differ: {g.n} vs {h.n}")


def graph_union(g: Graph, h: Graph) -> Graph:
    _check_universe(g, h)
    return Graph._from_edge_set(g.n, set(g.edge_set()) | set(h.edge_set()))


def graph_minus(g: Graph, h: Graph) -> Graph:
    _check_universe(g, h)
    return Graph._from_edge_set(g.n, set(g.edge_set()) - set(h.edge_set()))


def e_within(g: Graph, x: Iterable[int]) -> int:
    xs = set(x)
    return sum(1 for u in xs for v in g.adjacency[u] if u < v and v in xs)


def e_between(g: Graph, x: Iterable[int], y: Iterable[int]) -> int:
    xs, ys = set(x), set(y)
    if xs & ys:
        raise ValueError("cross-edge count needs disjoint sets")
    return sum(1 for u in xs for v in g.adjacency[u] if v in ys)


def external_neighborhood(g: Graph, u: Iterable[int]) -> set:
    us = set(u)
    out = set()
    for v in us:
        out.update(g.adjacency[v])
    return out - us


def edge_stats(g: Graph, x: Iterable[int], y: Iterable[int], u: Iterable[int]):
    """(e(X), e(X,Y), N(U)) in one call; X and Y must be disjoint."""
    return e_within(g, x), e_between(g, x, y), external_neighborhood(g, u)


# -- edge-list text format -----------------------------------------------
# First line "n m", then m lines "u v" with u < v. UTF-8, LF.


def write_edgelist(g: Graph, target) -> None:
    close = False
    if isinstance(target, (str, bytes)):
        fh = open(target, "w", encoding="utf-8", newline="\n")
        close = True
    else:
        fh = target
    try:
        fh.write(f"{g.n} {g.edge_count}\n")
        for u, v in sorted(g.edges()):
            fh.write(f"{u} {v}\n")
    finally:
        if close:
            fh.close()


def read_edgelist(source) -> Graph:
    close = False
    if isinstance(source, (str, bytes)):
        fh = open(source, "r", encoding="utf-8")
        close = True
    elif isinstance(source, io.StringIO) or hasattr(source, "readline"):
        fh = source
    else:
        raise TypeError("source must be a path or a text stream")
    try:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("header must be 'n m'")
        n, m = int(header[0]), int(header[1])
        seen = set()
        for lineno in range(m):
            parts = fh.readline().split()
            if len(parts) != 2:
                raise ValueError(f"edge line {lineno + 2}: expected 'u v'")
            u, v = int(parts[0]), int(parts[1])
            if u == v:
                raise ValueError(f"edge line {lineno + 2}: loop {u}")
            if not u < v:
                raise ValueError(f"edge line {lineno + 2}: expected u < v")
            if not (0 <= u and v < n):
                raise ValueError(f"edge line {lineno + 2}: vertex outside 0..{n - 1}")
            if (u, v) in seen:
                raise ValueError(f"edge line {lineno + 2}: duplicate edge ({u},{v})")
            seen.add((u, v))
        return Graph._from_edge_set(n, seen)
    finally:
        if close:
            fh.close()
