"""Rotation-extension machinery.

Expander checking, the path/cycle/booster trichotomy, the order on
path systems, extremal normalization, and the merge round that turns
an s-path system into an (s-1)-path system or a Hamilton cycle.

Soundness is enforced structurally: every cycle returned from this
module is re-verified vertex by vertex against the edges it is allowed
to use before it escapes.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .graph import Graph
from .rng import stream


@dataclass(frozen=True)
class ExpanderParams:
    m: int
    c: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.c <= 0:
            raise ValueError("c must be positive")


@dataclass
class ExpanderVerdict:
    ok: bool
    mode: str
    witness: Optional[frozenset] = None
    checked: int = 0


_EXACT_N_CAP = 24
_EXACT_ENUM_CAP = 2_000_000


def check_expander(
    g: Graph, params: ExpanderParams, mode: str, samples: int = 100_000, seed: int = 0
) -> ExpanderVerdict:
    """Is every set U with |U| <= m expanding by factor c?

    Exact mode enumerates all candidate sets (small n only). Sampled
    mode draws connected-biased random sets; a True verdict there means
    "no counterexample found", never a proof, while any reported
    witness is re-verified and therefore genuine.
    """
    n = g.n
    if mode == "exact":
        if n > _EXACT_N_CAP:
            raise ValueError(f"exact mode limited to n <= {_EXACT_N_CAP}")
        top = min(params.m, n)
        total = sum(math.comb(n, j) for j in range(1, top + 1))
        if total > _EXACT_ENUM_CAP:
            raise ValueError("exact enumeration too large for these parameters")
        masks = [sum(1 << w for w in g.adjacency[v]) for v in range(n)]
        checked = 0
        for size in range(1, top + 1):
            need = params.c * size
            for combo in itertools.combinations(range(n), size):
                umask = 0
                nmask = 0
                for v in combo:
                    umask |= 1 << v
                    nmask |= masks[v]
                checked += 1
                if (nmask & ~umask).bit_count() < need:
                    return ExpanderVerdict(False, "exact", frozenset(combo), checked)
        return ExpanderVerdict(True, "exact", None, checked)

    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")

    adj = np.zeros((n, n), dtype=np.int16)
    for v in range(n):
        for w in g.adjacency[v]:
            adj[v, w] = 1
    gen = stream(seed, "expander-sample")
    top = min(params.m, n)
    checked = 0
    remaining = samples
    while remaining > 0:
        b = min(4096, remaining)
        remaining -= b
        sizes = gen.integers(1, top + 1, size=b)
        rows = np.zeros((b, n), dtype=np.int16)
        rows[np.arange(b), gen.integers(0, n, size=b)] = 1
        cur = np.ones(b, dtype=np.int64)
        for _ in range(top - 1):
            grow = cur < sizes
            if not grow.any():
                break
            reach = (rows @ adj) > 0
            avail = reach & (rows == 0)
            noise = gen.random((b, n))
            biased = np.where(avail, noise, -1.0)
            pick = biased.argmax(axis=1)
            stuck = biased.max(axis=1) < 0
            if stuck.any():
                fallback = np.where(rows == 0, gen.random((b, n)), -1.0)
                pick = np.where(stuck, fallback.argmax(axis=1), pick)
            idx = np.nonzero(grow)[0]
            rows[idx, pick[idx]] = 1
            cur[grow] += 1
        ext = ((rows @ adj) > 0) & (rows == 0)
        counts = ext.sum(axis=1)
        usize = rows.sum(axis=1)
        bad = counts < params.c * usize
        checked += b
        if bad.any():
            i = int(np.nonzero(bad)[0][0])
            witness = frozenset(int(v) for v in np.nonzero(rows[i])[0])
            nbr = set()
            for v in witness:
                nbr.update(g.adjacency[v])
            nbr -= witness
            if len(nbr) < params.c * len(witness):  # re-verify before claiming
                return ExpanderVerdict(False, "sampled", witness, checked)
    return ExpanderVerdict(True, "sampled", None, checked)


# -- exact Hamiltonicity oracle for tiny instances ------------------------


def hamilton_oracle_small(g: Graph) -> Optional[tuple]:
    """Exact backtracking Hamilton cycle search, n <= 14."""
    n = g.n
    if n > 14:
        raise ValueError("oracle limited to n <= 14")
    if n < 3 or g.min_degree() < 2:
        return None
    adj_mask = [sum(1 << w for w in g.adjacency[v]) for v in range(n)]
    full = (1 << n) - 1
    failed = set()

    def dfs(v, visited):
        if visited == full:
            return [v] if adj_mask[v] & 1 else None
        key = (v, visited)
        if key in failed:
            return None
        rest = adj_mask[v] & ~visited
        while rest:
            bit = rest & -rest
            rest ^= bit
            w = bit.bit_length() - 1
            tail = dfs(w, visited | bit)
            if tail is not None:
                return [v] + tail
        failed.add(key)
        return None

    res = dfs(0, 1)
    return tuple(res) if res is not None else None


# -- order on path systems -------------------------------------------------


@dataclass(frozen=True)
class PathOrderKey:
    path_count: int
    lengths: tuple  # nonincreasing vertex counts

    @classmethod
    def of_paths(cls, paths: Iterable) -> "PathOrderKey":
        lengths = tuple(sorted((len(p) for p in paths), reverse=True))
        return cls(len(lengths), lengths)


def compare_path_systems(a: PathOrderKey, b: PathOrderKey) -> int:
    """-1 when a comes strictly before b (fewer paths, or same count and
    lexicographically larger length vector), 0 on equal keys, else 1."""
    if a.path_count != b.path_count:
        return -1 if a.path_count < b.path_count else 1
    if a.lengths == b.lengths:
        return 0
    return -1 if a.lengths > b.lengths else 1


# -- rotation closure ------------------------------------------------------


def _closure(n, adj_in, path0, budget, stop):
    """Breadth-first rotation closure with path0[0] held fixed.

    Discovers Hamilton paths of the span reachable by rotations,
    indexed by their free endpoint. ``stop(endpoint, path)`` may return
    a truthy value to end the search early. Returns (stop result or
    None, {endpoint: (path, positions)}).
    """
    path0 = np.asarray(path0, dtype=np.int64)
    size = path0.shape[0]
    pos0 = np.full(n, -1, dtype=np.int64)
    pos0[path0] = np.arange(size)
    end0 = int(path0[-1])
    discovered = {end0: (path0, pos0)}
    res = stop(end0, path0)
    if res is not None:
        return res, discovered
    if size < 3:
        return None, discovered
    queue = deque([end0])
    count = 0
    while queue and count < budget:
        u = queue.popleft()
        path, pos = discovered[u]
        prev = int(path[size - 2])
        for w in adj_in[u]:
            if w == prev:
                continue
            j = int(pos[w])
            x = int(path[j + 1])
            if x in discovered:
                continue
            npath = path.copy()
            npath[j + 1:] = path[:j:-1]
            npos = pos.copy()
            npos[npath[j + 1:]] = np.arange(j + 1, size)
            discovered[x] = (npath, npos)
            count += 1
            res = stop(x, npath)
            if res is not None:
                return res, discovered
            queue.append(x)
            if count >= budget:
                break
    return None, discovered


# -- trichotomy ------------------------------------------------------------


@dataclass
class TrichotomyOutcome:
    kind: str  # "extendable" | "hamiltonian" | "boosters"
    span: frozenset
    path: Optional[tuple] = None            # extendable: endpoint is path[-1]
    outside_neighbor: Optional[int] = None
    cycle: Optional[tuple] = None           # hamiltonian: closing edge implied
    boosters: dict = field(default_factory=dict)  # (u,v) -> certifying path


def _check_path(adj, path):
    seen = set(path)
    if len(seen) != len(path):
        raise ValueError("path repeats a vertex")
    for u, v in zip(path, path[1:]):
        if v not in adj[u]:
            raise ValueError(f"({u},{v}) is not an edge of the host graph")


def posa_trichotomy(
    g: Graph,
    path: Iterable[int],
    params: ExpanderParams,
    *,
    rotation_budget: Optional[int] = None,
    booster_cap: int = 4096,
) -> TrichotomyOutcome:
    """Rotation closure of a path inside its span.

    Returns the first of: a Hamilton path of the span whose endpoint
    has a neighbor outside; a Hamilton cycle of the span; or a set of
    certified boosters, pairs whose addition makes the span
    Hamiltonian (each carries the witnessing Hamilton path).
    """
    adj = g.adj_sets
    path = tuple(path)
    _check_path(adj, path)
    return _trichotomy(g.n, adj, path, rotation_budget, booster_cap)


def _trichotomy(n, adj, path, rotation_budget, booster_cap):
    span = frozenset(path)
    size = len(path)
    budget = rotation_budget if rotation_budget is not None else 4 * size
    adj_in = {v: [w for w in sorted(adj[v]) if w in span] for v in span}
    outside_of = {
        v: next((w for w in sorted(adj[v]) if w not in span), None) for v in span
    }

    def stop_for(anchor_set):
        def stop(e, p):
            w = outside_of[e]
            if w is not None:
                return ("ext", p, w)
            if e in anchor_set:
                return ("ham", p)
            return None

        return stop

    a = path[0]
    if outside_of[a] is not None:
        rev = tuple(reversed(path))
        return TrichotomyOutcome("extendable", span, path=rev, outside_neighbor=outside_of[a])

    res, reach_a = _closure(n, adj_in, path, budget, stop_for(set(adj_in[a])))
    if res is not None:
        if res[0] == "ext":
            return TrichotomyOutcome(
                "extendable", span, path=tuple(int(v) for v in res[1]), outside_neighbor=res[2]
            )
        return TrichotomyOutcome("hamiltonian", span, cycle=tuple(int(v) for v in res[1]))

    boosters = {}
    for u in sorted(reach_a):
        if u != a and u not in adj[a]:
            pair = (a, u) if a < u else (u, a)
            boosters.setdefault(pair, tuple(int(v) for v in reach_a[u][0]))

    for u in sorted(reach_a):
        if len(boosters) >= booster_cap:
            break
        p_u = reach_a[u][0][::-1].copy()  # same path anchored at u
        res, reach_u = _closure(n, adj_in, p_u, budget, stop_for(set(adj_in[u])))
        if res is not None:
            if res[0] == "ext":
                return TrichotomyOutcome(
                    "extendable", span, path=tuple(int(v) for v in res[1]), outside_neighbor=res[2]
                )
            return TrichotomyOutcome("hamiltonian", span, cycle=tuple(int(v) for v in res[1]))
        for x in sorted(reach_u):
            if x != u and x not in adj[u]:
                pair = (u, x) if u < x else (x, u)
                if pair not in boosters:
                    boosters[pair] = tuple(int(v) for v in reach_u[x][0])
                    if len(boosters) >= booster_cap:
                        break
    return TrichotomyOutcome("boosters", span, boosters=boosters)


# -- extremal normalization -------------------------------------------------


def _sorted_paths(paths):
    return sorted((tuple(p) for p in paths), key=lambda p: (-len(p), p))


def _locate_all(paths):
    loc = {}
    for idx, p in enumerate(paths):
        for j, v in enumerate(p):
            loc[v] = (idx, j)
    return loc


def _apply_splice(paths, r, ham_path, r2, j):
    target = paths[r2]
    merged = tuple(ham_path) + tuple(reversed(target[: j + 1]))
    rest = target[j + 1:]
    out = [p for i, p in enumerate(paths) if i not in (r, r2)]
    out.append(merged)
    if rest:
        out.append(rest)
    return _sorted_paths(out)


def _find_splice(n, adj, paths, rotation_budget):
    loc = _locate_all(paths)
    # endpoint pass: no rotations needed
    for r, p in enumerate(paths):
        for oriented in (p, tuple(reversed(p))):
            u = oriented[-1]
            for w in sorted(adj[u]):
                hit = loc.get(w)
                if hit is not None and hit[0] > r:
                    return (r, oriented, hit[0], hit[1])
    # rotation pass
    for r, p in enumerate(paths):
        if len(p) < 3 or r == len(paths) - 1:
            continue
        span = set(p)
        adj_in = {v: [w for w in sorted(adj[v]) if w in span] for v in span}

        def stop(e, pp):
            for w in sorted(adj[e]):
                hit = loc.get(w)
                if hit is not None and hit[0] > r:
                    return (tuple(int(v) for v in pp), hit[0], hit[1])
            return None

        budget = rotation_budget if rotation_budget is not None else 4 * len(p)
        for oriented in (p, tuple(reversed(p))):
            res, _ = _closure(n, adj_in, oriented, budget, stop)
            if res is not None:
                return (r, res[0], res[1], res[2])
    return None


def _normalize(n, adj, paths, rotation_budget=None, move_cap=None):
    paths = _sorted_paths(paths)
    cap = move_cap if move_cap is not None else 4 * n + 100
    key = PathOrderKey.of_paths(paths)
    for _ in range(cap):
        if len(paths) == 1:
            break
        move = _find_splice(n, adj, paths, rotation_budget)
        if move is None:
            break
        paths = _apply_splice(paths, *move)
        new_key = PathOrderKey.of_paths(paths)
        if compare_path_systems(new_key, key) != -1:
            raise AssertionError("splice move failed to improve the path system")
        key = new_key
    return paths


def normalize_extremal(g: Graph, paths: Iterable, *, rotation_budget=None, move_cap=None):
    """Drive a spanning path system to a splice fixpoint.

    Repeatedly reroutes a rotated endpoint of an earlier path into a
    later path until no such move is found (under the rotation budget).
    The resulting system never compares after the input one.
    """
    plist = [tuple(p) for p in paths]
    covered = [v for p in plist for v in p]
    if len(covered) != g.n or set(covered) != set(range(g.n)):
        raise ValueError("path system must cover every vertex exactly once")
    return _normalize(g.n, g.adj_sets, plist, rotation_budget, move_cap)


# -- merge round ------------------------------------------------------------


def _canon(u, v):
    return (u, v) if u < v else (v, u)


class _SpanCache:
    __slots__ = ("tri", "pairs", "log_idx", "pending", "touches")

    def __init__(self, tri, pairs, log_idx):
        self.tri = tri
        self.pairs = pairs          # booster pairs surviving the forbidden/S filter
        self.log_idx = log_idx
        self.pending = set()        # edges exposed inside the span since computing
        self.touches = 0


class _ConnCache:
    __slots__ = ("log_idx",)

    def __init__(self, log_idx):
        self.log_idx = log_idx


@dataclass
class MergeState:
    n: int
    gamma: set                       # forbidden pairs, canonical
    s_set: frozenset
    working: list                    # list[set]: usable adjacency right now
    paths: list                      # tuples, sorted nonincreasing
    layers_spent: int = 0
    booster_counts: list = field(default_factory=list)
    exposed_log: list = field(default_factory=list)
    cache: dict = field(default_factory=dict)
    normalized_at: int = -1
    refresh_threshold: int = 6

    @classmethod
    def initial(cls, base: Graph, gamma: Iterable, paths: Iterable, s_set: Iterable):
        gamma = {_canon(u, v) for u, v in gamma}
        working = [set(a) for a in base.adjacency]
        for u, v in gamma:
            working[u].discard(v)
            working[v].discard(u)
        paths = _sorted_paths(paths)
        for p in paths:
            for u, v in zip(p, p[1:]):
                if v not in working[u]:
                    raise ValueError(
                        f"path edge ({u},{v}) is forbidden or absent from the base graph"
                    )
        return cls(
            n=base.n,
            gamma=gamma,
            s_set=frozenset(s_set),
            working=working,
            paths=paths,
        )

    @property
    def s(self) -> int:
        return len(self.paths)

    def _set_paths(self, paths):
        self.paths = _sorted_paths(paths)
        self.normalized_at = -1


@dataclass
class MergeRoundResult:
    kind: str  # "cycle" | "progress" | "retry"
    cycle: Optional[tuple] = None
    layer_spent: bool = False
    diagnostics: dict = field(default_factory=dict)


def _assert_cycle(cycle, n, working, gamma):
    assert len(cycle) == n and len(set(cycle)) == n, "cycle must span every vertex once"
    for u, v in zip(cycle, cycle[1:] + (cycle[0],)):
        assert v in working[u], f"cycle edge ({u},{v}) is not usable"
        assert _canon(u, v) not in gamma, f"cycle edge ({u},{v}) is forbidden"


def _assert_span_cycle(cycle, span, working):
    assert set(cycle) == set(span) and len(cycle) == len(span)
    for u, v in zip(cycle, cycle[1:] + (cycle[0],)):
        assert v in working[u], f"span cycle edge ({u},{v}) is not usable"


def _open_cycle_at(cycle, w):
    i = cycle.index(w)
    return cycle[i:] + cycle[:i]  # path starting at w, dropping edge (last, w)


def _fetch_trichotomy(state: MergeState, path, booster_cap):
    entry = state.cache.get(path)
    if entry is not None and isinstance(entry, _SpanCache):
        span = entry.tri.span
        for e in state.exposed_log[entry.log_idx:]:
            ins = (e[0] in span) + (e[1] in span)
            if ins:
                entry.touches += 1
                if ins == 2:
                    entry.pending.add(e)
        entry.log_idx = len(state.exposed_log)
        if entry.touches >= state.refresh_threshold:
            entry = None
    else:
        entry = None
    if entry is None:
        tri = _trichotomy(state.n, state.working, path, None, booster_cap)
        pairs = set()
        if tri.kind == "boosters":
            pairs = {
                pr
                for pr in tri.boosters
                if pr not in state.gamma
                and pr[0] not in state.s_set
                and pr[1] not in state.s_set
            }
            state.booster_counts.append(len(pairs))
        entry = _SpanCache(tri, pairs, len(state.exposed_log))
        state.cache[path] = entry
    return entry


def _build_span_cycle(state, entry, usable):
    """Cycle on the entry's span, or ("retry", needs_spend) when stuck.

    Returns (cycle, used_layer): pending (already exposed) booster hits
    are tried before this round's layer edges.
    """
    tri = entry.tri
    if tri.kind == "hamiltonian":
        return tri.cycle, False
    hit = next((e for e in sorted(entry.pending) if e in entry.pairs), None)
    if hit is not None:
        return tri.boosters[hit], False
    hit = next((e for e in usable if e in entry.pairs), None)
    if hit is not None:
        return tri.boosters[hit], True
    return None, False


def _connection_to(state: MergeState, p2, p1, rotation_budget=None):
    """Hamilton path of span(p2) whose endpoint sees span(p1) in the
    working graph; scan results are cached until span(p2) is touched."""
    key = ("conn", p1, p2)
    entry = state.cache.get(key)
    span2 = set(p2)
    if isinstance(entry, _ConnCache):
        touched = any(
            e[0] in span2 or e[1] in span2 for e in state.exposed_log[entry.log_idx:]
        )
        if not touched:
            return None
    adj = state.working
    v1set = set(p1)
    adj_in = {v: [w for w in sorted(adj[v]) if w in span2] for v in span2}

    def stop(e, pp):
        for w in sorted(adj[e]):
            if w in v1set:
                return (tuple(int(v) for v in pp), w)
        return None

    budget = rotation_budget if rotation_budget is not None else 4 * len(p2)
    for oriented in (p2, tuple(reversed(p2))):
        res, _ = _closure(state.n, adj_in, oriented, budget, stop)
        if res is not None:
            return res
    state.cache[key] = _ConnCache(len(state.exposed_log))
    return None


def merge_round(
    state: MergeState,
    booster_layer: Graph,
    params: ExpanderParams,
    *,
    booster_cap: int = 4096,
) -> MergeRoundResult:
    """One round of the merging loop.

    Free moves (splices, in-graph cycle closing, in-graph bridging) are
    tried first and do not consume the layer. When fresh randomness is
    needed, the layer is exposed: its edges (minus forbidden pairs and
    pairs touching the protected low-degree set) join the working graph,
    boosters are matched against it, and a miss yields a retry so the
    caller can spend the next layer.
    """
    usable = []
    for u, v in booster_layer.edges():
        e = _canon(u, v)
        if e in state.gamma or u in state.s_set or v in state.s_set:
            continue
        usable.append(e)
    usable.sort()
    spent = False

    def expose():
        nonlocal spent
        if spent:
            return
        spent = True
        state.layers_spent += 1
        for u, v in usable:
            if v not in state.working[u]:
                state.working[u].add(v)
                state.working[v].add(u)
                state.exposed_log.append((u, v))

    def result(kind, **kw):
        return MergeRoundResult(kind, layer_spent=spent, **kw)

    # free splices first (skipped when nothing changed since the last fixpoint)
    if state.normalized_at != len(state.exposed_log):
        before = state.paths
        state.paths = _normalize(state.n, state.working, state.paths)
        state.normalized_at = len(state.exposed_log)
        if state.paths != before:
            state.cache.clear()

    p1 = state.paths[0]
    entry = _fetch_trichotomy(state, p1, booster_cap)
    tri1 = entry.tri

    if tri1.kind == "extendable":
        loc = _locate_all(state.paths)
        hit = loc.get(tri1.outside_neighbor)
        state.cache.pop(p1, None)
        assert hit is not None and hit[0] > 0, "outside neighbor must sit on a later path"
        state._set_paths(_apply_splice(state.paths, 0, tri1.path, hit[0], hit[1]))
        return result("progress")

    c1, used_layer = _build_span_cycle(state, entry, usable)
    if c1 is None:
        expose()
        return result(
            "retry", diagnostics={"stage": "p1-boosters", "pairs": len(entry.pairs)}
        )
    if used_layer:
        expose()
        state.cache.pop(p1, None)
    _assert_span_cycle(c1, tri1.span, state.working)

    if state.s == 1:
        _assert_cycle(c1, state.n, state.working, state.gamma)
        # spans below the expander scale are accepted but visible to callers
        return result("cycle", cycle=c1, diagnostics={"span": len(c1), "below_m": len(c1) < params.m})

    # direct merge: a rotated endpoint of P2 adjacent to the cycle span
    p2 = state.paths[1]
    conn = _connection_to(state, p2, p1)
    if conn is not None:
        pth, w = conn
        opened = _open_cycle_at(c1, w)
        merged = tuple(pth) + opened
        state._set_paths([merged] + list(state.paths[2:]))
        state.cache.clear()
        return result("progress")

    entry2 = _fetch_trichotomy(state, p2, booster_cap)
    tri2 = entry2.tri
    if tri2.kind == "extendable":
        loc = _locate_all(state.paths)
        hit = loc.get(tri2.outside_neighbor)
        state.cache.pop(p2, None)
        assert hit is not None and hit[0] != 1, "outside neighbor must sit on another path"
        if hit[0] == 0:
            opened = _open_cycle_at(c1, tri2.outside_neighbor)
            merged = tuple(tri2.path) + opened
            state._set_paths([merged] + list(state.paths[2:]))
            state.cache.clear()
            return result("progress")
        state._set_paths(_apply_splice(state.paths, 1, tri2.path, hit[0], hit[1]))
        return result("progress")

    c2, used_layer2 = _build_span_cycle(state, entry2, usable)
    if c2 is None:
        expose()
        return result(
            "retry", diagnostics={"stage": "p2-boosters", "pairs": len(entry2.pairs)}
        )
    if used_layer2:
        expose()
        state.cache.pop(p2, None)
    _assert_span_cycle(c2, tri2.span, state.working)

    # bridge the two cycles with any usable edge between the spans
    v1set = set(tri1.span)
    v2set = set(tri2.span)
    small, big = (v2set, v1set) if len(v2set) <= len(v1set) else (v1set, v2set)
    bridge = None
    for w in sorted(small):
        for u in sorted(state.working[w]):
            if u in big:
                bridge = (u, w) if u in v1set else (w, u)
                break
        if bridge:
            break
    if bridge is None:
        for u, v in usable:
            if (u in v1set and v in v2set) or (v in v1set and u in v2set):
                expose()
                bridge = (u, v) if u in v1set else (v, u)
                break
    if bridge is None:
        expose()
        return result("retry", diagnostics={"stage": "bridge"})

    u, w = bridge
    path1 = _open_cycle_at(c1, u)  # starts at u
    path2 = _open_cycle_at(c2, w)  # starts at w
    merged = tuple(reversed(path1)) + path2
    state._set_paths([merged] + list(state.paths[2:]))
    state.cache.clear()
    return result("progress")
