"""Degree-window trimming, bipartite k-factor extraction, and the
recursive bisection schedule feeding the inner matchings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .graph import BipartitePair, Graph
from .rng import stream


@dataclass(frozen=True)
class DegreeWindow:
    center: float
    halfwidth: float
    c: float = 0.0

    def __post_init__(self):
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be >= 0")

    @property
    def lo(self) -> float:
        return self.center - self.halfwidth

    @property
    def hi(self) -> float:
        return self.center + self.halfwidth


@dataclass
class TrimResult:
    h: BipartitePair
    removed_minus: list  # (a-side vertex, b-side vertex) eviction pairs
    removed_plus: list
    z_cap: int
    aborted: bool


def trim_balanced(
    bp: BipartitePair, window: DegreeWindow, z_cap: int, seed: int
) -> TrimResult:
    """Pare a balanced bipartite graph until all degrees sit in the window.

    Low-degree eviction runs before high-degree eviction; every evicted
    vertex drags a uniformly random partner from the opposite side so
    the sides stay balanced. Stops early (abort flag) once a removed
    class collects z_cap eviction pairs.
    """
    if len(bp.left) != len(bp.right):
        raise ValueError("sides must be balanced")
    gen = stream(seed, "trim")
    active_a = set(bp.left)
    active_b = set(bp.right)
    deg = {v: bp.degree(v) for v in bp.left + bp.right}
    side_of = {v: 0 for v in bp.left}
    side_of.update({v: 1 for v in bp.right})
    adj = {}
    adj.update(bp.adj_left)
    adj.update(bp.adj_right)

    lo, hi = window.lo, window.hi
    low = {v for v in deg if deg[v] < lo}
    high = {v for v in deg if deg[v] > hi}
    removed_minus: list = []
    removed_plus: list = []
    aborted = False

    def active(v):
        return v in active_a or v in active_b

    def evict(v, bucket, mates):
        # pair with an opposite-side violator when one exists: the choice is
        # free, and dragging a healthy vertex instead collapses the core at
        # sparse desk densities
        opp = active_b if side_of[v] == 0 else active_a
        pool = sorted((mates & opp) - {v}) or sorted(opp - {v})
        partner = pool[int(gen.integers(0, len(pool)))]
        for x in (v, partner):
            (active_a if side_of[x] == 0 else active_b).discard(x)
            low.discard(x)
            high.discard(x)
            for w in adj[x]:
                if active(w):
                    deg[w] -= 1
                    if deg[w] < lo:
                        low.add(w)
        pair = (v, partner) if side_of[v] == 0 else (partner, v)
        bucket.append(pair)

    while True:
        if len(removed_minus) >= z_cap or len(removed_plus) >= z_cap:
            aborted = True
            break
        if not active_a:
            break
        if low:
            evict(min(low), removed_minus, low)
        elif high:
            v = min(high)
            if deg[v] > hi:
                evict(v, removed_plus, high)
            else:
                high.discard(v)  # degree fell back into the window
        else:
            break

    h = bp.induced(active_a, active_b)
    return TrimResult(h, removed_minus, removed_plus, z_cap, aborted)


def bal_deficiency(bp: BipartitePair, k: int, x: Iterable[int], y: Iterable[int]) -> int:
    """e(X, Y) - k(|X| + |Y| - n) for X on the left, Y on the right.

    Nonnegativity over all (X, Y) characterizes the existence of a
    k-factor in a balanced bipartite graph.
    """
    xs, ys = set(x), set(y)
    if not xs <= set(bp.left) or not ys <= set(bp.right):
        raise ValueError("X must sit on the left side and Y on the right")
    n = len(bp.left)
    exy = sum(1 for a in xs for b in bp.adj_left[a] if b in ys)
    return exy - k * (len(xs) + len(ys) - n)


@dataclass
class RegularSubgraph:
    host: BipartitePair
    k: int
    edges: frozenset
    span: frozenset

    def __post_init__(self):
        deg = {v: 0 for v in self.span}
        for a, b in self.edges:
            if (a, b) not in self.host.cross_edges:
                raise ValueError(f"edge ({a},{b}) is not a host edge")
            deg[a] += 1
            deg[b] += 1
        if any(d != self.k for d in deg.values()):
            raise ValueError("covered vertices must have degree exactly k")

    def left_span(self):
        return [v for v in self.host.left if v in self.span]

    def right_span(self):
        return [v for v in self.host.right if v in self.span]


@dataclass
class KFactorOutcome:
    factor: Optional[RegularSubgraph]
    max_flow: int
    target: int  # k * n, the flow a k-factor requires

    @property
    def found(self) -> bool:
        return self.factor is not None


class _Dinic:
    def __init__(self, n):
        self.n = n
        self.head = [[] for _ in range(n)]
        self.to = []
        self.cap = []

    def add(self, u, v, c):
        self.head[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(c)
        self.head[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0)

    def max_flow(self, s, t):
        flow = 0
        n = self.n
        while True:
            level = [-1] * n
            level[s] = 0
            queue = [s]
            for u in queue:
                for eid in self.head[u]:
                    v = self.to[eid]
                    if self.cap[eid] > 0 and level[v] < 0:
                        level[v] = level[u] + 1
                        queue.append(v)
            if level[t] < 0:
                return flow
            it = [0] * n

            def dfs(u, pushed):
                if u == t:
                    return pushed
                while it[u] < len(self.head[u]):
                    eid = self.head[u][it[u]]
                    v = self.to[eid]
                    if self.cap[eid] > 0 and level[v] == level[u] + 1:
                        got = dfs(v, min(pushed, self.cap[eid]))
                        if got:
                            self.cap[eid] -= got
                            self.cap[eid ^ 1] += got
                            return got
                    it[u] += 1
                return 0

            while True:
                pushed = dfs(s, 1 << 60)
                if not pushed:
                    break
                flow += pushed


def extract_k_factor(bp: BipartitePair, k: int) -> KFactorOutcome:
    """Spanning k-regular subgraph via a feasible-flow reduction.

    Source->left arcs carry k, cross arcs carry 1, right->sink arcs
    carry k; a k-factor exists iff the max flow saturates k*n, and the
    achieved flow is the certificate otherwise.
    """
    na, nb = len(bp.left), len(bp.right)
    if na != nb:
        raise ValueError("sides must be balanced")
    if not 0 <= k <= na:
        raise ValueError(f"k={k} outside 0..{na}")
    target = k * na
    if k == 0:
        factor = RegularSubgraph(bp, 0, frozenset(), frozenset(bp.left) | frozenset(bp.right))
        return KFactorOutcome(factor, 0, 0)
    aidx = {a: 1 + i for i, a in enumerate(bp.left)}
    bidx = {b: 1 + na + i for i, b in enumerate(bp.right)}
    net = _Dinic(2 + na + nb)
    s, t = 0, 1 + na + nb
    for a in bp.left:
        net.add(s, aidx[a], k)
    cross = []
    for a in bp.left:
        for b in bp.adj_left[a]:
            cross.append((len(net.to), a, b))
            net.add(aidx[a], bidx[b], 1)
    for b in bp.right:
        net.add(bidx[b], t, k)
    flow = net.max_flow(s, t)
    if flow < target:
        return KFactorOutcome(None, flow, target)
    edges = frozenset((a, b) for eid, a, b in cross if net.cap[eid] == 0)
    span = frozenset(bp.left) | frozenset(bp.right)
    return KFactorOutcome(RegularSubgraph(bp, k, edges, span), flow, target)


# -- bisection schedule ------------------------------------------------------


@dataclass
class ScheduleLevel:
    index: int
    parts: tuple      # parts[0] is the catch-all; parts[1..2^i] have equal size
    k: int
    m: int
    k_exact: float
    m_exact: float


@dataclass
class BisectionSchedule:
    n: int
    p: float
    c: float
    ell: int
    levels: list           # ScheduleLevel for i = 1..ell
    k_total: int
    k_total_exact: float

    def level(self, i: int) -> ScheduleLevel:
        if not 1 <= i <= self.ell:
            raise ValueError(f"level {i} outside 1..{self.ell}")
        return self.levels[i - 1]

    def pair_parts(self, i: int):
        """The (A_{2j-1}, A_{2j}) part pairs at level i, j = 1..2^(i-1)."""
        parts = self.level(i).parts
        return [(parts[2 * j - 1], parts[2 * j]) for j in range(1, 2 ** (i - 1) + 1)]


def bisection_schedule(n: int, p: float, c: float, seed: int) -> BisectionSchedule:
    """Nested random equipartitions with per-level factor targets.

    The depth is the smallest ell with p * 2^-ell * n below a fixed
    fraction of sqrt(np log n); odd part sizes spill their leftover
    vertex into the level's catch-all part.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p={p} outside (0, 1]")
    if c <= 0:
        raise ValueError("c must be positive")
    logn = math.log(n)
    bound = (c / 4.0) * math.sqrt(n * p * logn)
    ell = 1
    while p * n / (2 ** ell) >= bound:
        ell += 1

    order = list(range(n))
    stream(seed, "schedule").shuffle(order)

    levels = []
    prev = None
    for i in range(1, ell + 1):
        size = n >> i
        if prev is None:
            parts = [tuple(order[2 * size:]), tuple(order[:size]), tuple(order[size: 2 * size])]
        else:
            parts = [list(prev[0])]
            for part in prev[1:]:
                parts.append(tuple(part[:size]))
                parts.append(tuple(part[size: 2 * size]))
                parts[0].extend(part[2 * size:])
            parts[0] = tuple(parts[0])
        local = size
        k_exact = p * local - (c / 7.0) * math.sqrt(max(p * local, 0.0) * logn)
        m_exact = local - local ** (1.0 - c * c / 5880.0) if local > 0 else 0.0
        levels.append(
            ScheduleLevel(
                index=i,
                parts=tuple(parts),
                k=max(0, math.floor(k_exact)),
                m=max(0, math.floor(m_exact)),
                k_exact=k_exact,
                m_exact=m_exact,
            )
        )
        prev = levels[-1].parts

    k_total_exact = 0.5 * (n * p - c * math.sqrt(n * p * logn))
    return BisectionSchedule(
        n=n,
        p=p,
        c=c,
        ell=ell,
        levels=levels,
        k_total=max(0, math.floor(k_total_exact)),
        k_total_exact=k_total_exact,
    )


@dataclass
class FactorShortfall:
    level: int
    pair_index: int
    k_target: int
    k_found: int
    trim_aborted: bool = False


def pipeline_window(side: int, mean_degree: float, k: int) -> DegreeWindow:
    """Trim window used before extracting a k-factor from a random pair.

    Only the low side matters for feasibility (the flow extractor does
    not care about maximum degree), so the window runs from a margin
    above k all the way up to the side size.
    """
    lo = k + max(1.0, (mean_degree - k) / 4.0)
    hi = float(side)
    if lo > hi:
        lo = float(k)
    return DegreeWindow(center=(lo + hi) / 2.0, halfwidth=(hi - lo) / 2.0)


def default_z_cap(local_n: int, c: float) -> int:
    return max(1, int(local_n ** (1.0 - c * c / 66.0) / 2.0))


def largest_feasible_k(bp: BipartitePair, k_hi: int) -> KFactorOutcome:
    """Binary search the largest k <= k_hi with a k-factor.

    Downward monotone: a k-regular bipartite graph splits into perfect
    matchings, so dropping one gives a (k-1)-factor.
    """
    lo, hi = 0, k_hi
    best = extract_k_factor(bp, 0)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        out = extract_k_factor(bp, mid)
        if out.found:
            best = out
            lo = mid
        else:
            hi = mid - 1
    return best


def descending_factor(
    bp: BipartitePair, k_hi: int, c: float, seed: int
) -> tuple[Optional[RegularSubgraph], bool]:
    """Best spanning regular subgraph after trimming, trying k_hi down to 1.

    Each candidate degree gets a fresh trim of the original pair (a trim
    tight enough for a large factor can destroy the core a smaller one
    would have kept). Returns the factor and whether any trim aborted.
    """
    side = len(bp.left)
    if side == 0 or k_hi <= 0:
        return None, False
    mean = bp.edge_count() / side
    z_cap = default_z_cap(side, c)
    aborted_any = False
    for k_try in range(min(k_hi, side), 0, -1):
        window = pipeline_window(side, mean, k_try)
        trimmed = trim_balanced(bp, window, z_cap, seed + 31 * k_try)
        aborted_any = aborted_any or trimmed.aborted
        span = len(trimmed.h.left)
        if span == 0 or trimmed.aborted:
            continue
        out = extract_k_factor(trimmed.h, min(k_try, span))
        if out.found and out.factor.k >= 1:
            return out.factor, aborted_any
        if k_try == 1:
            # gentlest trim still infeasible; salvage whatever regular core is left
            out = largest_feasible_k(trimmed.h, min(k_hi, span))
            if out.factor is not None and out.factor.k >= 1:
                return out.factor, aborted_any
    return None, aborted_any


def build_level_regulars(
    g: Graph, schedule: BisectionSchedule, level_index: int, seed: int = 0
) -> tuple[list[RegularSubgraph], list[FactorShortfall]]:
    """Trim + extract a k_i-factor for every part pair at one level.

    Pairs where the target is infeasible fall back to the largest
    feasible degree; every miss is recorded as a shortfall.
    """
    lvl = schedule.level(level_index)
    regs: list[RegularSubgraph] = []
    shortfalls: list[FactorShortfall] = []
    if lvl.k <= 0 or not lvl.parts[1]:
        return regs, shortfalls
    for j, (part_a, part_b) in enumerate(schedule.pair_parts(level_index), start=1):
        bp = BipartitePair.from_graph(g, part_a, part_b)
        factor, aborted = descending_factor(
            bp, lvl.k, schedule.c, seed + 7919 * level_index + j
        )
        k_found = factor.k if factor is not None else 0
        if k_found < lvl.k:
            shortfalls.append(FactorShortfall(level_index, j, lvl.k, k_found, aborted))
        if factor is not None:
            regs.append(factor)
    return regs, shortfalls
