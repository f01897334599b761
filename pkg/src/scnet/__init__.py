"""Reachability-based robustness analysis of multi-tier supply-chain networks."""

__version__ = "0.1.0"

from .attack import (
    AttackPlan,
    AttackStrategy,
    EnsembleResult,
    ExperimentConfig,
    MetricCurve,
    make_attack_order,
    run_ensemble,
    run_removal,
)
from .centrality import (
    CentralityScores,
    DegreeStats,
    Variant,
    aggregate_centrality,
    degree_stats,
    fit_discrete_powerlaw,
    molloy_reed_fc,
    pagerank,
    unit_employees,
)
from .errors import DataError
from .graph import (
    FirmAttrs,
    Metrics,
    ReachabilityBaseline,
    SupplyGraph,
    assign_tiers,
    build_graph,
    compute_metrics,
    identify_terminal_suppliers,
    reachability_baseline,
    truncate_to_tiers,
)
from .multiscale import ImputedAttrs, Scale, ScaleMapping, aggregate, impute_attributes
