"""End-to-end packing pipeline, certification, reports, and the
statistical experiment harness."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass
from typing import Iterable, Optional

from . import rng
from .binomial import delta_quantile
from .exposure import (
    ConfigError,
    SplitProbabilities,
    assign_layer_indices,
    build_g1_and_s,
    conditional_split,
    expose_two_round,
    layer_slot,
    short_path_between_s,
    single_round_fallback,
    split_probabilities,
)
from .factors import (
    BipartitePair,
    bisection_schedule,
    default_z_cap,
    descending_factor,
    extract_k_factor,
    pipeline_window,
    trim_balanced,
)
from .graph import Graph, gen_gnp, graph_union
from .matchings import (
    Matching,
    assemble_path_system,
    build_inner_matchings,
    extend_to_perfect,
    random_ordered_decomposition,
)
from .posa import ExpanderParams, MergeState, merge_round
from .rng import stream

REPORT_SCHEMA_VERSION = 1

# Field order of the serialized report; stable across releases.
REPORT_FIELDS = (
    "schema_version",
    "n",
    "p",
    "seed",
    "config",
    "delta",
    "k_target",
    "outcome",
    "cycles",
    "stages",
    "timing_ms",
)


def theoretical_eta(alpha: float) -> float:
    """Expander-scale constant implied by alpha; astronomically small at
    desk scale, recorded in reports but not used unless asked for."""
    return (alpha / 16.0) * math.exp(-16.0 / alpha - 1.0)


@dataclass(frozen=True)
class PackingConfig:
    alpha: float = 0.5
    beta: float = 0.25
    lam: float = 0.1          # layer count is n^(1-lam)
    c: float = 1.0 / 3.0
    eta: Optional[float] = None       # None: record theoretical_eta(alpha)
    epsilon: float = 1e-5             # admissible-range tag, informational
    m_override: Optional[int] = None  # working expander scale; None: n // 8
    retry_budget: Optional[int] = None  # layers spendable per slot; None: all
    booster_cap: int = 4096
    k_clamping: bool = True
    single_round_fallback: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("alpha", "beta", "lam", "c"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name}={v} outside [0, 1)")

    def working_m(self, n: int) -> int:
        if self.m_override is not None:
            return max(1, self.m_override)
        return max(4, n // 8)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "lambda": self.lam,
            "c": self.c,
            "eta": self.eta if self.eta is not None else theoretical_eta(self.alpha),
            "epsilon": self.epsilon,
            "m_override": self.m_override,
            "retry_budget": self.retry_budget,
            "booster_cap": self.booster_cap,
            "k_clamping": self.k_clamping,
            "single_round_fallback": self.single_round_fallback,
            "seed": self.seed,
            "rng_scheme": rng.RNG_SCHEME,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PackingConfig":
        d = dict(d)
        d.pop("rng_scheme", None)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class VerificationResult:
    passed: bool
    failures: list


def verify_packing(g: Graph, cycles: Iterable) -> VerificationResult:
    """Certify a packing: every cycle Hamiltonian in g, no shared edges."""
    failures = []
    seen = {}
    for ci, cyc in enumerate(cycles):
        cyc = tuple(cyc)
        if len(cyc) != g.n or set(cyc) != set(range(g.n)):
            failures.append({"kind": "non_hamiltonian", "cycle": ci})
            continue
        for u, v in zip(cyc, cyc[1:] + (cyc[0],)):
            e = (u, v) if u < v else (v, u)
            if not g.has_edge(u, v):
                failures.append({"kind": "non_subgraph_edge", "cycle": ci, "edge": list(e)})
            if e in seen:
                failures.append(
                    {"kind": "overlap_edge", "cycles": [seen[e], ci], "edge": list(e)}
                )
            else:
                seen[e] = ci
    return VerificationResult(not failures, failures)


@dataclass
class PackingReport:
    n: int
    p: float
    seed: int
    config: dict
    delta: int
    k_target: int
    outcome: str          # "full" | "partial" | "failed"
    cycles: list
    stages: dict
    timing_ms: float
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        out = {}
        for name in REPORT_FIELDS:
            out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PackingReport":
        extra = set(d) - set(REPORT_FIELDS)
        if extra:
            raise ValueError(f"unknown report fields: {sorted(extra)}")
        kw = {k: d[k] for k in REPORT_FIELDS}
        kw["cycles"] = [list(c) for c in kw["cycles"]]
        return cls(**kw)


def report_serialize(report: PackingReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report.to_dict(), separators=(",", ": "), indent=1) + "\n").encode()
    if fmt == "text":
        d = report.to_dict()
        lines = [f"packing report v{d['schema_version']}"]
        for k in ("n", "p", "seed", "delta", "k_target", "outcome", "timing_ms"):
            lines.append(f"{k}: {d[k]}")
        lines.append(f"cycles: {len(d['cycles'])}")
        for c in d["cycles"]:
            lines.append("  " + " ".join(str(v) for v in c))
        lines.append("stages: " + json.dumps(d["stages"], separators=(",", ":")))
        lines.append("config: " + json.dumps(d["config"], separators=(",", ":")))
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")


def report_parse(data: bytes) -> PackingReport:
    return PackingReport.from_dict(json.loads(data.decode()))


# -- the packing pipeline ---------------------------------------------------


def _chain_probs(n, p, config, k) -> tuple[SplitProbabilities, bool]:
    drift = config.beta * math.sqrt(p * math.log(n) / n)
    if drift >= p:
        if not config.single_round_fallback:
            raise ConfigError(
                f"beta={config.beta} exhausts p={p} and the single-round fallback is disabled"
            )
        return single_round_fallback(n, p, config.lam, k), True
    return split_probabilities(n, p, config.beta, config.lam, k), False


def _empty_report(n, p, config, delta, stages, t0) -> PackingReport:
    return PackingReport(
        n=n,
        p=p,
        seed=config.seed,
        config=config.to_dict(),
        delta=delta,
        k_target=0,
        outcome="full",
        cycles=[],
        stages=stages,
        timing_ms=round((time.perf_counter() - t0) * 1000.0, 3),
    )


def _base_stages() -> dict:
    return {
        "split": {"p1": 0.0, "p2": 0.0, "p3": 0.0, "p4": 0.0, "s_size": 0},
        "factors": {"shortfalls": []},
        "paths": {"counts": [], "cycles_closed": []},
        "merge": {"layers_spent": [], "booster_counts": []},
    }


def pack(n: int, p: float, config: PackingConfig, graph: Optional[Graph] = None) -> PackingReport:
    """Produce and certify edge-disjoint Hamilton cycles, one per unit of
    floor(min-degree / 2).

    Without ``graph`` the instance is generated by two-round exposure;
    with it, the given graph is thinned into coupled rounds instead.
    Every stage failure degrades to a recorded shortfall; the report is
    marked full only when the whole budget is met and certified.
    """
    t0 = time.perf_counter()
    if n < 3:
        raise ConfigError("n must be >= 3")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p={p} outside [0, 1]")
    if graph is not None and graph.n != n:
        raise ConfigError(f"graph has {graph.n} vertices, expected {n}")
    seed = config.seed
    stages = _base_stages()

    if p == 0.0 and graph is None:
        return _empty_report(n, p, config, 0, stages, t0)

    # exposure: p1/p2 are independent of the cycle budget, so split first
    probs0, fell_back = _chain_probs(n, p, config, 1) if p > 0 else (None, False)
    if graph is None:
        g1_star, g2_star = expose_two_round(n, probs0, seed)
        g = graph_union(g1_star, g2_star)
    else:
        g = graph
        if p > 0:
            g1_star, g2_star = conditional_split(g, probs0, seed)
        else:
            g1_star, g2_star = g, Graph.from_edges(n, [])
    delta = g.min_degree()
    k_target = delta // 2

    if p == 0.0 or k_target == 0:
        stages["split"]["s_size"] = n
        outcome_str = "full" if k_target == 0 else "failed"
        rep = _empty_report(n, p, config, delta, stages, t0)
        rep.outcome = outcome_str
        return rep

    exposure = build_g1_and_s(g1_star, g2_star, n, p, config.alpha, probs0)
    probs, fell_back = _chain_probs(n, p, config, k_target)
    stages["split"].update(
        {
            "p1": probs.p1,
            "p2": probs.p2,
            "p3": probs.p3,
            "p4": probs.p4,
            "s_size": len(exposure.s_set),
            "fallback_single_round": fell_back,
            "s_threshold": exposure.s_threshold,
            "delta_quantile": exposure.delta_quantile,
            "delta_g1_equals_delta": exposure.g1.min_degree() == delta,
            "s_separation_violated": short_path_between_s(exposure.g1, exposure.s_set),
        }
    )
    # when every minimum-degree vertex sits in S, the committed graph
    # keeps the true minimum degree
    min_deg_vertices = {v for v in range(n) if g.degree(v) == delta}
    if min_deg_vertices <= exposure.s_set:
        assert exposure.g1.min_degree() == delta

    layer_map = assign_layer_indices(exposure.g2, probs, seed)

    # paths: inner matchings plus a decomposed cross factor
    schedule = bisection_schedule(n, p, config.c, seed)
    inner, shortfalls = build_inner_matchings(
        exposure.g1_star, schedule, k=k_target, seed=seed
    )
    stages["factors"]["shortfalls"] = [
        {
            "level": s.level,
            "pair": s.pair_index,
            "k_target": s.k_target,
            "k_found": s.k_found,
        }
        for s in shortfalls
    ]
    lvl1 = schedule.level(1)
    half_a, half_b = lvl1.parts[1], lvl1.parts[2]
    bp_top = BipartitePair.from_graph(exposure.g1_star, half_a, half_b)
    if config.k_clamping:
        top_factor, _ = descending_factor(bp_top, k_target, config.c, seed)
    else:
        mean = bp_top.edge_count() / max(1, len(half_a))
        window = pipeline_window(len(half_a), mean, k_target)
        trim = trim_balanced(bp_top, window, default_z_cap(len(half_a), config.c), seed)
        out = extract_k_factor(trim.h, min(k_target, len(trim.h.left)))
        top_factor = out.factor
    top_k = top_factor.k if top_factor is not None else 0
    stages["factors"]["top_k_found"] = top_k
    stages["factors"]["inner_matchings"] = len(inner)
    if top_k < k_target:
        stages["factors"]["shortfalls"].append(
            {"level": 1, "pair": 1, "k_target": k_target, "k_found": top_k}
        )

    cross = random_ordered_decomposition(top_factor, seed) if top_k >= 1 else []
    leftovers = [v for v in lvl1.parts[0]]
    systems = []
    for i in range(k_target):
        m_i = inner[i] if i < len(inner) else Matching.of([])
        n_i = cross[i] if i < len(cross) else Matching.of([])
        ext = extend_to_perfect(n_i, half_a, half_b, seed + 104729 * (i + 1))
        system, cstats = assemble_path_system(m_i, ext, seed + 130363 * (i + 1))
        paths = list(system.paths) + [(v,) for v in leftovers]
        systems.append(paths)
        stages["paths"]["counts"].append(len(paths))
        stages["paths"]["cycles_closed"].append(cstats.cycles_closed)
        stages["paths"].setdefault("isolated_in_m", []).append(cstats.isolated_in_m)
        stages["paths"].setdefault("dropped_edges", []).append(cstats.dropped_edges)

    # merge: one slot per cycle, forbidden set shields pending slots
    params = ExpanderParams(config.working_m(n), 2.0)
    budget = probs.layers if config.retry_budget is None else min(config.retry_budget, probs.layers)
    path_edges = [
        {(u, v) if u < v else (v, u) for pth in sys_i for u, v in zip(pth, pth[1:])}
        for sys_i in systems
    ]
    cycles: list[tuple] = []
    cycle_edges: set = set()
    failed_slots = []
    gamma_warning = False
    for i in range(k_target):
        gamma = set(cycle_edges)
        for j in range(i + 1, k_target):
            gamma |= path_edges[j]
        gdeg = {}
        for u, v in gamma:
            gdeg[u] = gdeg.get(u, 0) + 1
            gdeg[v] = gdeg.get(v, 0) + 1
        if gdeg and max(gdeg.values()) > max(delta - 2, 0):
            gamma_warning = True
        state = MergeState.initial(exposure.g1, gamma, systems[i], exposure.s_set)
        got = None
        step = 1
        calls = 0
        call_cap = budget + 8 * n
        last_kind = ""
        while step <= budget and calls < call_cap:
            slot = layer_slot(probs, i + 1, step)
            edges = layer_map.get(slot, [])
            if not edges and last_kind == "retry":
                state.layers_spent += 1
                step += 1
                continue
            layer = Graph.from_edges(n, edges)
            res = merge_round(state, layer, params, booster_cap=config.booster_cap)
            calls += 1
            last_kind = res.kind
            if res.kind == "cycle":
                got = res.cycle
                break
            if res.layer_spent:
                step += 1
        stages["merge"]["layers_spent"].append(state.layers_spent)
        stages["merge"]["booster_counts"].append(state.booster_counts)
        if got is None:
            failed_slots.append(i)
            continue
        for u, v in zip(got, got[1:] + (got[0],)):
            e = (u, v) if u < v else (v, u)
            assert g.has_edge(u, v), "cycle edge outside the generated graph"
            assert e not in cycle_edges, "cycle edge reused across slots"
            cycle_edges.add(e)
        cycles.append(got)
    stages["merge"]["failed_slots"] = failed_slots
    stages["merge"]["gamma_degree_warning"] = gamma_warning

    assert 2 * k_target <= delta
    verdict = verify_packing(g, cycles)
    assert verdict.passed, f"internal verification failed: {verdict.failures}"
    if len(cycles) == k_target:
        outcome = "full"
    elif cycles:
        outcome = "partial"
    else:
        outcome = "failed"

    return PackingReport(
        n=n,
        p=p,
        seed=seed,
        config=config.to_dict(),
        delta=delta,
        k_target=k_target,
        outcome=outcome,
        cycles=[list(c) for c in cycles],
        stages=stages,
        timing_ms=round((time.perf_counter() - t0) * 1000.0, 3),
    )


# -- sparse density statistic ------------------------------------------------


def check_sparse_density(
    g: Graph, gamma: float, samples: int = 2000, seed: int = 0, p: Optional[float] = None
) -> dict:
    """Max edge density over small vertex sets, against gamma * sqrt(np log n).

    Samples random sets up to the admissible size cap plus adversarial
    dense cores from min-degree peeling; reports the worst ratio seen
    and whether it exceeds gamma.
    """
    n = g.n
    if n < 3:
        return {"max_ratio": 0.0, "exceeded": False, "size_cap": 0, "checked": 0}
    p_used = p if p is not None else g.edge_count / (n * (n - 1) / 2)
    logn = math.log(n)
    regime_ok = p_used >= logn / n
    if p_used <= 0:
        return {
            "max_ratio": 0.0,
            "exceeded": False,
            "size_cap": 0,
            "checked": 0,
            "p_used": p_used,
            "regime_ok": regime_ok,
        }
    cap = 2 * gamma * math.exp(-2.0 / gamma - 1.0) * math.sqrt(n * logn / p_used)
    cap = max(1, min(n, int(cap)))
    scale = gamma * math.sqrt(n * p_used * logn)
    gen = stream(seed, "density")

    def ratio(vertices):
        vs = set(vertices)
        if not vs:
            return 0.0
        e = sum(1 for u in vs for w in g.adjacency[u] if u < w and w in vs)
        return e / (len(vs) * math.sqrt(n * p_used * logn))

    worst = 0.0
    checked = 0
    # adversarial: min-degree peeling order; densest suffixes of every size <= cap
    order = []
    deg = list(g.degrees())
    alive = set(range(n))
    import heapq

    heap = [(deg[v], v) for v in range(n)]
    heapq.heapify(heap)
    while heap:
        d, v = heapq.heappop(heap)
        if v not in alive or d != deg[v]:
            continue
        alive.discard(v)
        order.append(v)
        for w in g.adjacency[v]:
            if w in alive:
                deg[w] -= 1
                heapq.heappush(heap, (deg[w], w))
    core_order = list(reversed(order))  # densest end first
    for size in range(1, cap + 1):
        worst = max(worst, ratio(core_order[:size]))
        checked += 1
    for _ in range(samples):
        size = int(gen.integers(1, cap + 1))
        pick = gen.choice(n, size=size, replace=False)
        worst = max(worst, ratio(int(v) for v in pick))
        checked += 1
    return {
        "max_ratio": worst,
        "exceeded": worst > gamma,
        "size_cap": cap,
        "checked": checked,
        "p_used": p_used,
        "regime_ok": regime_ok,
    }


# -- experiment harness -------------------------------------------------------

ALL_STAGES = ("degree", "s_set", "components", "pack")


def _component_probe(n: int, seed: int) -> int:
    """Cycle count of an inner pairing joined with a random perfect matching."""
    half = n // 2
    a = list(range(half))
    b = list(range(half, 2 * half))
    m_edges = [(a[2 * i], a[2 * i + 1]) for i in range(half // 2)]
    m_edges += [(b[2 * i], b[2 * i + 1]) for i in range(half // 2)]
    m = Matching.of(m_edges)
    ext = extend_to_perfect(Matching.of([]), a, b, seed)
    _, stats = assemble_path_system(m, ext, seed)
    return stats.cycles_closed


def run_experiment(
    grid: Iterable[tuple[int, float]],
    trials: int,
    config: PackingConfig,
    stages: Iterable[str] = ALL_STAGES,
) -> dict:
    """Monte-Carlo harness over a grid of (n, p) points.

    Per seed: minimum-degree window membership, low-degree set size and
    separation, component-count probe, and the full pack outcome; the
    aggregate reports rates per grid point.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("grid must be nonempty")
    stage_set = set(stages)
    unknown = stage_set - set(ALL_STAGES)
    if unknown:
        raise ConfigError(f"unknown stages: {sorted(unknown)}")
    points = []
    for pi, (n, p) in enumerate(grid):
        rows = {
            "n": n,
            "p": p,
            "trials": trials,
        }
        delta_in_window = 0
        dq_ok = None
        s_sizes = []
        s_small = 0
        separation_bad = 0
        comp_counts = []
        comp_ok = 0
        outcomes = {"full": 0, "partial": 0, "failed": 0}
        timings = []
        logn = math.log(n)
        lo = n * p - 2 * math.sqrt(n * p * logn)
        hi = n * p - 0.5 * math.sqrt(n * p * logn)
        if "degree" in stage_set and 0 < p < 1:
            dq = delta_quantile(n, p)
            dq_ok = dq <= hi
        for t in range(trials):
            st = int(stream(config.seed, "exp", pi, t).integers(0, 2 ** 63 - 1))
            if "degree" in stage_set:
                gt = gen_gnp(n, p, st)
                if lo <= gt.min_degree() <= hi:
                    delta_in_window += 1
            if "s_set" in stage_set and 0 < p < 1:
                try:
                    probs0, _ = _chain_probs(n, p, config, 1)
                    g1s, g2s = expose_two_round(n, probs0, st)
                    exp_out = build_g1_and_s(g1s, g2s, n, p, config.alpha, probs0)
                    s_sizes.append(len(exp_out.s_set))
                    if len(exp_out.s_set) <= n ** 0.1:
                        s_small += 1
                    if short_path_between_s(exp_out.g1, exp_out.s_set):
                        separation_bad += 1
                except ConfigError:
                    pass
            if "components" in stage_set:
                cc = _component_probe(n, st)
                comp_counts.append(cc)
                if cc <= 5 * math.sqrt(n):
                    comp_ok += 1
            if "pack" in stage_set:
                rep = pack(n, p, dataclasses.replace(config, seed=st))
                outcomes[rep.outcome] += 1
                timings.append(rep.timing_ms)
        if trials:
            rows["delta_in_window_rate"] = delta_in_window / trials
            rows["delta_quantile_bound_ok"] = dq_ok
            if s_sizes:
                rows["s_size_mean"] = sum(s_sizes) / len(s_sizes)
                rows["s_size_max"] = max(s_sizes)
                rows["s_small_rate"] = s_small / len(s_sizes)
                rows["s_separation_violation_rate"] = separation_bad / len(s_sizes)
            if comp_counts:
                rows["cycles_closed_max"] = max(comp_counts)
                rows["cycles_closed_mean"] = sum(comp_counts) / len(comp_counts)
                rows["cycles_closed_ok_rate"] = comp_ok / trials
            if "pack" in stage_set:
                rows["pack_outcomes"] = outcomes
                rows["mean_timing_ms"] = sum(timings) / len(timings)
        points.append(rows)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "trials": trials,
        "seed": config.seed,
        "stages": sorted(stage_set),
        "config": config.to_dict(),
        "points": points,
    }
