"""hampack: edge-disjoint Hamilton cycle packing in sparse random graphs."""

from .binomial import BinomialSpec, TailBound, binom_pmf_cdf, chernoff_bound, delta_quantile
from .exposure import (
    ConfigError,
    ExposureOutcome,
    LayerKey,
    SplitProbabilities,
    build_g1_and_s,
    expose_two_round,
    sample_booster_layer,
    single_round_fallback,
    split_probabilities,
)
from .factors import (
    BisectionSchedule,
    DegreeWindow,
    KFactorOutcome,
    RegularSubgraph,
    TrimResult,
    bal_deficiency,
    bisection_schedule,
    build_level_regulars,
    extract_k_factor,
    trim_balanced,
)
from .graph import (
    BipartitePair,
    Graph,
    edge_stats,
    gen_bipartite_gnnp,
    gen_gnp,
    graph_minus,
    graph_union,
    read_edgelist,
    write_edgelist,
)
from .matchings import (
    ComponentStats,
    Matching,
    PathSystem,
    PerfectExtension,
    assemble_path_system,
    build_inner_matchings,
    decompose_regular,
    extend_to_perfect,
    random_ordered_decomposition,
)
from .pipeline import (
    PackingConfig,
    PackingReport,
    VerificationResult,
    check_sparse_density,
    pack,
    report_parse,
    report_serialize,
    run_experiment,
    verify_packing,
)
from .posa import (
    ExpanderParams,
    MergeRoundResult,
    MergeState,
    PathOrderKey,
    TrichotomyOutcome,
    check_expander,
    compare_path_systems,
    hamilton_oracle_small,
    merge_round,
    normalize_extremal,
    posa_trichotomy,
)

__version__ = "0.1.0"
