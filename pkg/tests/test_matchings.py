import itertools
import math
from collections import Counter

import pytest

from hampack.factors import RegularSubgraph, bisection_schedule, extract_k_factor
from hampack.graph import BipartitePair, gen_gnp
from hampack.matchings import (
    ComponentStats,
    Matching,
    PathSystem,
    assemble_path_system,
    build_inner_matchings,
    decompose_regular,
    extend_to_perfect,
    random_ordered_decomposition,
)
from hampack.rng import stream


def complete_pair(n):
    left = tuple(range(n))
    right = tuple(range(n, 2 * n))
    return BipartitePair(left, right, [(a, b) for a in left for b in right])


def six_cycle_pair():
    return BipartitePair(
        (0, 1, 2), (3, 4, 5), [(0, 3), (0, 5), (1, 3), (1, 4), (2, 4), (2, 5)]
    )


def regular_of(bp, k):
    out = extract_k_factor(bp, k)
    assert out.found
    return out.factor


def random_regular_pair(n, k, gen):
    """k-regular bipartite graph from k collision-repaired permutations."""
    used = set()
    for _ in range(k):
        perm = list(gen.permutation(n))
        guard = 0
        while True:
            bad = [a for a in range(n) if (a, perm[a]) in used]
            if not bad:
                break
            guard += 1
            assert guard < 10_000, "permutation repair failed to converge"
            for a in bad:
                a2 = int(gen.integers(0, n))
                perm[a], perm[a2] = perm[a2], perm[a]
        for a in range(n):
            used.add((a, perm[a]))
    left = tuple(range(n))
    right = tuple(range(n, 2 * n))
    bp = BipartitePair(left, right, [(a, n + b) for a, b in used])
    span = frozenset(left) | frozenset(right)
    return RegularSubgraph(bp, k, frozenset(bp.cross_edges), span)


# -- decomposition -------------------------------------------------------------


def check_partition(h, matchings):
    assert len(matchings) == h.k
    seen = set()
    span = set(h.span)
    for m in matchings:
        assert m.vertices() == span  # perfect on the span
        for e in m.edges:
            assert e not in seen
            seen.add(e)
    assert seen == set(h.edges)


def test_k33_latin_square():
    h = regular_of(complete_pair(3), 3)
    check_partition(h, decompose_regular(h))


def test_six_cycle_two_alternating():
    h = regular_of(six_cycle_pair(), 2)
    ms = decompose_regular(h)
    check_partition(h, ms)
    assert {frozenset(m.edges) for m in ms} == {
        frozenset({(0, 3), (1, 4), (2, 5)}),
        frozenset({(0, 5), (1, 3), (2, 4)}),
    }


def test_decompose_random_regular_partition():
    gen = stream(99, "reg")
    for trial in range(100):
        n = int(gen.integers(4, 201))
        k = int(gen.integers(1, min(9, n // 2 + 1)))
        h = random_regular_pair(n, k, gen)
        check_partition(h, decompose_regular(h))


def test_decompose_rejects_irregular():
    bp = BipartitePair((0, 1), (2, 3), [(0, 2), (0, 3), (1, 2)])
    span = frozenset((0, 1, 2, 3))
    with pytest.raises(ValueError):
        RegularSubgraph(bp, 2, frozenset(bp.cross_edges), span)


def test_ordered_decomposition_partitions_and_orders():
    h = regular_of(six_cycle_pair(), 2)
    a = frozenset({(0, 3), (1, 4), (2, 5)})
    counts = Counter()
    for seed in range(2000):
        ms = random_ordered_decomposition(h, seed)
        check_partition(h, ms)
        counts[frozenset(ms[0].edges) == a] += 1
    # the six-cycle has one unordered decomposition, so order must be a coin flip
    freq = counts[True] / 2000
    assert abs(freq - 0.5) <= 0.05


def test_ordered_decomposition_k1_trivial():
    h = regular_of(complete_pair(1), 1)
    ms = random_ordered_decomposition(h, 0)
    assert len(ms) == 1 and ms[0].edges == h.edges


# -- perfect extension ----------------------------------------------------------


def test_extension_of_perfect_matching_is_identity():
    base = Matching.of([(0, 3), (1, 4), (2, 5)])
    ext = extend_to_perfect(base, (0, 1, 2), (3, 4, 5), seed=1)
    assert ext.total.edges == base.edges
    assert not ext.synthetic_edges


def test_extension_uniform_over_bijections():
    a, b = (0, 1, 2), (3, 4, 5)
    counts = Counter()
    trials = 6000
    for seed in range(trials):
        ext = extend_to_perfect(Matching.of([]), a, b, seed)
        counts[tuple(sorted(ext.total.edges))] += 1
    assert len(counts) == 6
    expected = trials / 6
    for key, c in counts.items():
        assert abs(c / trials - 1 / 6) <= 0.03
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 15.086  # 1% critical value, 5 degrees of freedom


def test_extension_never_duplicates_base():
    gen = stream(4, "ext")
    a = tuple(range(8))
    b = tuple(range(8, 16))
    for seed in range(50):
        pairs = [(i, 8 + int(gen.integers(0, 8))) for i in range(4)]
        base_pairs = {}
        for u, v in pairs:
            if v not in base_pairs.values():
                base_pairs[u] = v
        base = Matching.of(base_pairs.items())
        ext = extend_to_perfect(base, a, b, seed)
        assert not (ext.synthetic_edges & base.edges)
        assert ext.total.edges >= base.edges
        assert ext.total.vertices() == set(a) | set(b)


def test_extension_rejects_uneven_sides():
    with pytest.raises(ValueError):
        extend_to_perfect(Matching.of([]), (0, 1), (2,), seed=0)


# -- path assembly ----------------------------------------------------------------


def test_assembly_empty_inner_matching():
    a, b = (0, 1, 2), (3, 4, 5)
    ext = extend_to_perfect(Matching.of([(0, 3), (1, 4), (2, 5)]), a, b, seed=0)
    system, stats = assemble_path_system(Matching.of([]), ext, seed=0)
    assert len(system.paths) == 3
    assert all(len(p) == 2 for p in system.paths)
    assert stats.isolated_in_m == 6
    assert stats.cycles_closed == 0


def test_assembly_single_cycle_breaks_once():
    # M joins (0,1) and (2,3) inside the sides; N' joins across: one 4-cycle
    a, b = (0, 1), (2, 3)
    m = Matching.of([(0, 1), (2, 3)])
    ext = extend_to_perfect(Matching.of([(0, 2), (1, 3)]), a, b, seed=5)
    system, stats = assemble_path_system(m, ext, seed=5)
    assert len(system.paths) == 1
    assert len(system.paths[0]) == 4
    assert stats.cycles_closed == 1
    assert stats.path_count == 1


def test_assembly_rejects_matching_outside_bipartition():
    ext = extend_to_perfect(Matching.of([(0, 2), (1, 3)]), (0, 1), (2, 3), seed=0)
    with pytest.raises(ValueError):
        assemble_path_system(Matching.of([(4, 5)]), ext, seed=0)


def test_assembly_accounting_invariant():
    gen = stream(31, "acct")
    for trial in range(40):
        half = int(gen.integers(3, 30))
        a = tuple(range(half))
        b = tuple(range(half, 2 * half))
        # random partial inner matching within each side
        perm_a = list(gen.permutation(half))
        perm_b = [half + int(x) for x in gen.permutation(half)]
        inner = []
        for i in range(0, half - 1, 2):
            if gen.random() < 0.7:
                inner.append((perm_a[i], perm_a[i + 1]))
            if gen.random() < 0.7:
                inner.append((perm_b[i], perm_b[i + 1]))
        m = Matching.of(inner)
        # random partial cross matching
        cross = []
        free_b = list(b)
        for v in a:
            if gen.random() < 0.6 and free_b:
                w = free_b.pop(int(gen.integers(0, len(free_b))))
                cross.append((v, w))
        ext = extend_to_perfect(Matching.of(cross), a, b, seed=trial)
        system, stats = assemble_path_system(m, ext, seed=trial)
        assert system.covered == set(a) | set(b)
        assert stats.path_count <= stats.isolated_in_m + stats.cycles_closed + stats.dropped_edges
        for p in system.paths:  # the assembled paths really are paths of M union N
            edges = set(m.edges) | set(ext.base.edges)
            for u, v in zip(p, p[1:]):
                assert ((u, v) if u < v else (v, u)) in edges


def test_path_system_validation():
    with pytest.raises(ValueError):
        PathSystem.of([(0, 1), (1, 2)])
    ps = PathSystem.of([(0, 1), (2,)])
    assert ps.covered == {0, 1, 2}


# -- inner matchings ---------------------------------------------------------------


def test_inner_matchings_purity_and_disjointness():
    n = 1024
    p = 4 * math.log(n) / n
    g = gen_gnp(n, p, seed=17)
    schedule = bisection_schedule(n, p, 1 / 3, seed=17)
    matchings, shortfalls = build_inner_matchings(g, schedule, k=4, seed=17)
    assert matchings, "this density should produce at least one inner matching"
    half_a = set(schedule.level(1).parts[1])
    half_b = set(schedule.level(1).parts[2])
    seen = set()
    for m in matchings:
        for u, v in m.edges:
            assert ({u, v} <= half_a) or ({u, v} <= half_b)  # never crosses halves
            assert g.has_edge(u, v)
            assert (u, v) not in seen
            seen.add((u, v))


def test_inner_matchings_size_audit():
    # per-matching size tracks the span the level factors could keep
    n = 1024
    p = 6 * math.log(n) / n
    g = gen_gnp(n, p, seed=3)
    schedule = bisection_schedule(n, p, 1 / 3, seed=3)
    matchings, shortfalls = build_inner_matchings(g, schedule, k=2, seed=3)
    for m in matchings:
        assert len(m) >= n / 2 - n * 0.35  # bookkeeping: trims and catch-alls
    assert isinstance(shortfalls, list)
