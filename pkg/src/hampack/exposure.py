"""Multi-round edge exposure.

A sparse binomial graph is written as the union of a first-round graph
(plus all second-round edges touching the low-degree set S) and a
second-round remainder on V minus S. The remainder is further layered
so the merging phase can spend thin slices of fresh randomness one at
a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .binomial import delta_quantile
from .graph import Graph, _decode_pairs, _sample_indices
from .rng import stream


class ConfigError(ValueError):
    """A parameter combination the pipeline cannot honor."""


@dataclass(frozen=True)
class SplitProbabilities:
    p: float
    p1: float
    p2: float
    p3: float
    p4: float
    beta: float
    lam: float
    k: int        # cycle budget consuming p3
    layers: int   # per-cycle layer count consuming p4

    def identity_errors(self) -> tuple[float, float, float]:
        """Residuals of the three coupling identities (should be ~0)."""
        e1 = (1 - self.p1) * (1 - self.p2) - (1 - self.p)
        e2 = math.exp(self.k * math.log1p(-self.p3)) - (1 - self.p2) if self.p3 < 1 else -(1 - self.p2)
        e3 = math.exp(self.layers * math.log1p(-self.p4)) - (1 - self.p3) if self.p4 < 1 else -(1 - self.p3)
        return e1, e2, e3


def _chain(n: int, p: float, p1: float, beta: float, lam: float, k: int) -> SplitProbabilities:
    d = p - p1
    q = 1.0 - p
    p2 = d / (d + q) if d + q > 0 else 0.0
    layers = max(1, int(n ** (1.0 - lam)))
    if p2 >= 1.0:
        p3 = 1.0
    else:
        p3 = -math.expm1(math.log1p(-p2) / k)
    if p3 >= 1.0:
        p4 = 1.0
    else:
        p4 = -math.expm1(math.log1p(-p3) / layers)
    return SplitProbabilities(p, p1, p2, p3, p4, beta, lam, k, layers)


def split_probabilities(n: int, p: float, beta: float, lam: float, k: int) -> SplitProbabilities:
    """Probabilities (p1..p4) of the exposure chain.

    p1 = p - beta * sqrt(p log n / n); the remaining rounds are defined
    by (1-p1)(1-p2) = 1-p, (1-p3)^k = 1-p2, (1-p4)^layers = 1-p3, all
    evaluated through log1p/expm1 so the identities hold to 1e-12 even
    when p4 is tiny.
    """
    if not 0.0 < p <= 1.0:
        raise ConfigError(f"p={p} outside (0, 1]")
    if k < 1:
        raise ConfigError("cycle budget k must be >= 1")
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"lambda={lam} outside (0, 1)")
    drift = beta * math.sqrt(p * math.log(n) / n)
    p1 = p - drift
    if p1 <= 0.0:
        raise ConfigError(
            f"beta={beta} too large for (n={n}, p={p}): first-round probability <= 0"
        )
    return _chain(n, p, p1, beta, lam, k)


def single_round_fallback(n: int, p: float, lam: float, k: int) -> SplitProbabilities:
    """Degenerate split used when beta * sqrt(p log n / n) >= p.

    Keeps the tool total on very sparse inputs: p1 = 0.9 p and the rest
    of the chain from the identities. Callers flag the report.
    """
    if not 0.0 < p <= 1.0:
        raise ConfigError(f"p={p} outside (0, 1]")
    return _chain(n, p, 0.9 * p, 0.0, lam, k)


@dataclass(frozen=True)
class LayerKey:
    cycle_index: int  # 1..k
    step_index: int   # 1..layers
    master_seed: int


@dataclass
class ExposureOutcome:
    g1_star: Graph
    g2_star: Graph
    g1: Graph
    s_set: frozenset
    g2: Graph  # second-round remainder; vertices of s_set are isolated here
    probs: Optional[SplitProbabilities]
    s_threshold: int
    delta_quantile: int
    g1_independent_of_g2: bool


def gnp_with(n: int, p: float, gen: np.random.Generator) -> Graph:
    total = n * (n - 1) // 2
    idx = _sample_indices(total, p, gen)
    us, vs = _decode_pairs(n, idx)
    return Graph._from_arrays(n, us, vs)


def expose_two_round(n: int, probs: SplitProbabilities, seed: int) -> tuple[Graph, Graph]:
    """Independent samples at p1 and p2; their union is G(n, p) in law."""
    g1_star = gnp_with(n, probs.p1, stream(seed, "expose", 1))
    g2_star = gnp_with(n, probs.p2, stream(seed, "expose", 2))
    return g1_star, g2_star


def build_g1_and_s(
    g1_star: Graph,
    g2_star: Graph,
    n: int,
    p: float,
    alpha: float,
    probs: Optional[SplitProbabilities] = None,
) -> ExposureOutcome:
    """Low-degree set S and the committed first-round graph.

    S collects every vertex whose first-round degree is at most
    delta_quantile(n, p) + floor(alpha * sqrt(np log n)). All
    second-round edges touching S are folded into g1 so that the
    degrees of S vertices are final; the rest of the second round
    (g2) stays untouched by this construction.
    """
    if g1_star.n != n or g2_star.n != n:
        raise ValueError("graphs must live on the same universe")
    dq = delta_quantile(n, p)
    thresh = dq + int(alpha * math.sqrt(n * p * math.log(n)))
    s_set = frozenset(v for v in range(n) if g1_star.degree(v) <= thresh)
    g1_edges = set(g1_star.edge_set())
    for u, v in g2_star.edges():
        if u in s_set or v in s_set:
            g1_edges.add((u, v))
    g1 = Graph._from_edge_set(n, g1_edges)
    keep = set(range(n)) - s_set
    g2 = g2_star.restrict(keep)
    star_edges = g1_star.edge_set()
    audit = (
        all((u, v) in star_edges or u in s_set or v in s_set for u, v in g1.edges())
        and all(u not in s_set and v not in s_set for u, v in g2.edges())
        and g2.edge_set() <= g2_star.edge_set()
    )
    return ExposureOutcome(
        g1_star, g2_star, g1, s_set, g2, probs, thresh, dq, audit
    )


def sample_booster_layer(
    key: LayerKey, probs: SplitProbabilities, universe: Iterable[int], n: int
) -> Graph:
    """One thin random slice G(universe, p4), independent across keys.

    The union over step indices of one cycle's layers is distributed as
    G(universe, p3); the union over cycles as the full second round.
    """
    ids = sorted(universe)
    m = len(ids)
    gen = stream(key.master_seed, "layer", key.cycle_index, key.step_index)
    idx = _sample_indices(m * (m - 1) // 2, probs.p4, gen)
    us, vs = _decode_pairs(m, idx)
    lut = np.asarray(ids, dtype=np.int64)
    if us.size:
        us, vs = lut[us], lut[vs]
    return Graph._from_arrays(n, np.minimum(us, vs), np.maximum(us, vs))


def assign_layer_indices(
    g2: Graph, probs: SplitProbabilities, seed: int
) -> dict[int, list[tuple[int, int]]]:
    """First-occurrence layer index for every realized second-round edge.

    Conditioned on an edge being present in the second round, the index
    of the first layer containing it is a truncated geometric over the
    k * layers slots. Assigning each edge to that slot keeps the union
    of all layers exactly equal to g2, so anything the merge phase uses
    is guaranteed to be an edge of the generated graph.
    """
    edges = sorted(g2.edges())
    slots = probs.k * probs.layers
    out: dict[int, list[tuple[int, int]]] = {}
    if not edges:
        return out
    gen = stream(seed, "layer-assign")
    u = gen.random(len(edges))
    if probs.p4 >= 1.0:
        t = np.ones(len(edges), dtype=np.int64)
    else:
        denom = math.log1p(-probs.p4)
        mass = -math.expm1(slots * denom)  # == p2 up to rounding
        t = np.ceil(np.log1p(-u * mass) / denom).astype(np.int64)
        np.clip(t, 1, slots, out=t)
    for e, ti in zip(edges, t.tolist()):
        out.setdefault(int(ti), []).append(e)
    return out


def layer_slot(probs: SplitProbabilities, cycle_index: int, step_index: int) -> int:
    """Linear slot of layer (cycle_index, step_index), both 1-based."""
    return (cycle_index - 1) * probs.layers + step_index


def conditional_split(g: Graph, probs: SplitProbabilities, seed: int) -> tuple[Graph, Graph]:
    """Thin a realized graph into coupled first/second round pieces.

    Each edge lands in round one only, round two only, or both, with
    the conditional law of two independent G(n, p1), G(n, p2) samples
    given their union. Used when packing a caller-supplied graph.
    """
    p, a, b = probs.p, probs.p1, probs.p2
    if p <= 0:
        return g, Graph._from_edge_set(g.n, set())
    t1 = a * (1 - b) / p            # round one only
    t2 = t1 + (1 - a) * b / p       # round two only
    edges = sorted(g.edges())
    gen = stream(seed, "cond-split")
    x = gen.random(len(edges))
    e1, e2 = set(), set()
    for e, xi in zip(edges, x.tolist()):
        if xi < t1:
            e1.add(e)
        elif xi < t2:
            e2.add(e)
        else:
            e1.add(e)
            e2.add(e)
    return Graph._from_edge_set(g.n, e1), Graph._from_edge_set(g.n, e2)


def short_path_between_s(g: Graph, s_set: Iterable[int], max_len: int = 4) -> bool:
    """True if some path of length <= max_len joins two (possibly equal) S vertices."""
    s_set = set(s_set)
    adj = g.adj_sets
    for s in s_set:
        # distinct endpoints: breadth-first to depth max_len
        dist = {s: 0}
        frontier = [s]
        for d in range(1, max_len + 1):
            nxt = []
            for v in frontier:
                for w in adj[v]:
                    if w not in dist:
                        dist[w] = d
                        nxt.append(w)
                        if w in s_set:
                            return True
            frontier = nxt
        # identical endpoints: short cycle (length 3 or 4) through s
        nbrs = list(adj[s])
        for i in range(len(nbrs)):
            for j in range(i + 1, len(nbrs)):
                x, y = nbrs[i], nbrs[j]
                if y in adj[x]:
                    return True  # triangle through s
                if max_len >= 4 and (adj[x] & adj[y]) - {s}:
                    return True  # 4-cycle through s
    return False
