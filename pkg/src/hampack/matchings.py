"""Matching decompositions and path-system assembly.

Regular bipartite graphs split into perfect matchings on their span;
the cross matchings get randomly extended to perfect matchings of the
whole bipartition, and juxtaposing an inner matching with a cross
matching yields the vertex-disjoint path system one Hamilton cycle
slot consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .factors import BisectionSchedule, FactorShortfall, RegularSubgraph, build_level_regulars
from .graph import Graph
from .rng import stream


@dataclass(frozen=True)
class Matching:
    edges: frozenset  # canonical (u, v) pairs, pairwise vertex-disjoint
    host: str = ""

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if u in seen or v in seen or u == v:
                raise ValueError("matching edges must be pairwise vertex-disjoint")
            seen.add(u)
            seen.add(v)

    @classmethod
    def of(cls, pairs: Iterable, host: str = "") -> "Matching":
        return cls(frozenset((u, v) if u < v else (v, u) for u, v in pairs), host)

    def vertices(self) -> set:
        out = set()
        for u, v in self.edges:
            out.add(u)
            out.add(v)
        return out

    def __len__(self):
        return len(self.edges)


def _hopcroft_karp(left: Sequence[int], adj: dict, order: Optional[dict] = None) -> dict:
    """Maximum matching on a bipartite adjacency dict (left -> neighbors).

    ``order`` optionally overrides per-vertex neighbor order, which is
    the randomization hook for sampled decompositions.
    """
    INF = float("inf")
    pair_l: dict = {}
    pair_r: dict = {}
    dist: dict = {}

    def neighbors(a):
        return order[a] if order is not None else adj[a]

    def bfs():
        queue = []
        for a in left:
            if a not in pair_l:
                dist[a] = 0
                queue.append(a)
            else:
                dist[a] = INF
        found = False
        for a in queue:
            for b in neighbors(a):
                other = pair_r.get(b)
                if other is None:
                    found = True
                elif dist[other] == INF:
                    dist[other] = dist[a] + 1
                    queue.append(other)
        return found

    def dfs(a):
        for b in neighbors(a):
            other = pair_r.get(b)
            if other is None or (dist[other] == dist[a] + 1 and dfs(other)):
                pair_l[a] = b
                pair_r[b] = a
                return True
        dist[a] = INF
        return False

    while bfs():
        for a in left:
            if a not in pair_l:
                dfs(a)
    return pair_l


def _peel_matchings(h: RegularSubgraph, gen=None) -> list[Matching]:
    """Split a k-regular span into k perfect matchings by repeated removal."""
    left = sorted(h.left_span())
    adj = {a: [] for a in left}
    for a, b in sorted(h.edges):
        adj[a].append(b)
    for a in adj:
        adj[a].sort()
    out = []
    for _ in range(h.k):
        order = None
        if gen is not None:
            order = {}
            for a in left:
                lst = list(adj[a])
                gen.shuffle(lst)
                order[a] = lst
        pair_l = _hopcroft_karp(left, adj, order)
        if len(pair_l) != len(left):
            raise ValueError("regular span lost a perfect matching; input not regular?")
        out.append(Matching.of(pair_l.items(), host="cross"))
        for a, b in pair_l.items():
            adj[a].remove(b)
    if any(adj[a] for a in left):
        raise ValueError("edges left over after k rounds; input not regular?")
    return out


def decompose_regular(h: RegularSubgraph) -> list[Matching]:
    """Exactly k perfect matchings on the span, partitioning the edges."""
    return _peel_matchings(h, gen=None)


def random_ordered_decomposition(h: RegularSubgraph, seed: int) -> list[Matching]:
    """Decomposition with randomized search order and random list order."""
    gen = stream(seed, "decomp")
    out = _peel_matchings(h, gen=gen)
    gen.shuffle(out)
    return out


def build_inner_matchings(
    g: Graph, schedule: BisectionSchedule, k: Optional[int] = None, seed: int = 0
) -> tuple[list[Matching], list[FactorShortfall]]:
    """Pool level decompositions into edge-disjoint inner matchings.

    Levels 2..ell contribute; every edge lies inside one of the two
    level-1 halves, never across, and distinct matchings never share an
    edge. Returns at most k matchings (fewer is a recorded shortfall).
    """
    want = k if k is not None else schedule.k_total
    matchings: list[Matching] = []
    shortfalls: list[FactorShortfall] = []
    for i in range(2, schedule.ell + 1):
        if len(matchings) >= want:
            break
        regs, misses = build_level_regulars(g, schedule, i, seed=seed)
        shortfalls.extend(misses)
        per_pair = [decompose_regular(r) for r in regs]
        depth = max((len(d) for d in per_pair), default=0)
        for t in range(depth):
            if len(matchings) >= want:
                break
            pooled = []
            for d in per_pair:
                if t < len(d):
                    pooled.extend(d[t].edges)
            if pooled:
                matchings.append(Matching.of(pooled, host=f"level-{i}"))
    return matchings, shortfalls


@dataclass(frozen=True)
class PerfectExtension:
    base: Matching
    synthetic_edges: frozenset
    total: Matching


def extend_to_perfect(n_i: Matching, a_side: Sequence[int], b_side: Sequence[int], seed: int) -> PerfectExtension:
    """Extend a cross matching to a perfect matching of (A, B).

    Uncovered A vertices get matched to uncovered B vertices by a
    uniformly random bijection; the synthetic edges need not exist in
    any graph.
    """
    a_set, b_set = set(a_side), set(b_side)
    if len(a_set) != len(b_set):
        raise ValueError("sides must have equal size")
    covered = n_i.vertices()
    if not covered <= (a_set | b_set):
        raise ValueError("matching must live on the given sides")
    free_a = sorted(a_set - covered)
    free_b = sorted(b_set - covered)
    if len(free_a) != len(free_b):
        raise ValueError("uncovered side counts differ")
    gen = stream(seed, "extend")
    gen.shuffle(free_b)
    synthetic = frozenset(
        (a, b) if a < b else (b, a) for a, b in zip(free_a, free_b)
    )
    total = Matching(n_i.edges | synthetic, host=n_i.host)
    return PerfectExtension(n_i, synthetic, total)


@dataclass(frozen=True)
class PathSystem:
    paths: tuple     # vertex-disjoint simple paths, as vertex tuples
    covered: frozenset

    def __post_init__(self):
        seen = set()
        for p in self.paths:
            for v in p:
                if v in seen:
                    raise ValueError("paths must be vertex-disjoint")
                seen.add(v)
        if seen != set(self.covered):
            raise ValueError("covered set must equal the union of path vertices")

    @classmethod
    def of(cls, paths: Iterable) -> "PathSystem":
        tup = tuple(sorted((tuple(p) for p in paths), key=lambda p: (-len(p), p)))
        return cls(tup, frozenset(v for p in tup for v in p))


@dataclass
class ComponentStats:
    path_count: int
    cycles_closed: int
    isolated_in_m: int
    dropped_edges: int


def _components_deg_le2(vertices, adj):
    """Split a max-degree-2 graph into (paths, cycles), deterministic order."""
    visited = set()
    paths = []
    cycles = []
    for v in sorted(vertices):
        if v in visited or len(adj[v]) > 1:
            continue
        # endpoint (degree 0 or 1): walk the path
        walk = [v]
        visited.add(v)
        prev, cur = None, v
        while True:
            nxts = [w for w in adj[cur] if w != prev]
            if not nxts:
                break
            prev, cur = cur, nxts[0]
            walk.append(cur)
            visited.add(cur)
        paths.append(tuple(walk))
    for v in sorted(vertices):
        if v in visited:
            continue
        walk = [v]
        visited.add(v)
        prev, cur = None, v
        while True:
            nxts = [w for w in adj[cur] if w != prev]
            nxt = nxts[0]
            if nxt == walk[0]:
                break
            prev, cur = cur, nxt
            walk.append(cur)
            visited.add(cur)
        cycles.append(tuple(walk))
    return paths, cycles


def assemble_path_system(
    m_i: Matching, ext: PerfectExtension, seed: int = 0
) -> tuple[PathSystem, ComponentStats]:
    """Juxtapose an inner matching with a cross matching.

    The union has maximum degree 2, so it splits into paths and cycles;
    each cycle loses one uniformly chosen edge. Cycle counting follows
    the component-discovery procedure on the perfect extension, whose
    cycle count stochastically mirrors the cycle count of a random
    permutation.
    """
    vertices = ext.total.vertices()  # the two sides, completely covered
    base_edges = set(m_i.edges) | set(ext.base.edges)
    adj = {v: [] for v in vertices}
    for u, v in sorted(base_edges):
        if u not in adj or v not in adj:
            raise ValueError("inner matching leaves the bipartition")
        adj[u].append(v)
        adj[v].append(u)
    if any(len(a) > 2 for a in adj.values()):
        raise ValueError("union of the two matchings has a vertex of degree > 2")

    # cycles closed: count on the full extension, as the discovery procedure does
    full_adj = {v: [] for v in vertices}
    for u, v in sorted(set(m_i.edges) | set(ext.total.edges)):
        full_adj[u].append(v)
        full_adj[v].append(u)
    if any(len(a) > 2 for a in full_adj.values()):
        raise ValueError("union with the perfect extension has a vertex of degree > 2")
    _, full_cycles = _components_deg_le2(vertices, full_adj)

    paths, cycles = _components_deg_le2(vertices, adj)
    gen = stream(seed, "cycle-break")
    opened = []
    for cyc in cycles:
        cut = int(gen.integers(0, len(cyc)))
        # drop edge (cyc[cut], cyc[cut+1]); path starts at the far end
        opened.append(cyc[cut + 1:] + cyc[: cut + 1])
    system = PathSystem.of(paths + opened)
    stats = ComponentStats(
        path_count=len(system.paths),
        cycles_closed=len(full_cycles),
        isolated_in_m=len(vertices - m_i.vertices()),
        dropped_edges=len(ext.synthetic_edges),
    )
    return system, stats
