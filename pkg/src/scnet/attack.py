"""Removal orders, removal sweeps, and realization ensembles.

The x-axis of every curve is the fraction of *units* remaining at the
attacked scale; the fraction of firms still in place is carried alongside.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from ._sweep import sweep_counts
from .centrality import CentralityScores, Variant, pagerank, unit_employee_totals, unit_scores
from .errors import DataError
from .graph import (
    ReachabilityBaseline,
    SupplyGraph,
    metrics_from_counts,
    reachability_baseline,
    restrict_to_reachable,
    truncate_to_tiers,
)
from .multiscale import ATTRIBUTES, SCALE_NEEDS, Scale, ScaleMapping, aggregate, impute_attributes

logger = logging.getLogger(__name__)

METRICS = ("atsr", "stsr", "altsr", "scfr")


class AttackStrategy(str, Enum):
    RANDOM = "random"
    PAGERANK = "pagerank"
    PAGERANK_TRANSPOSE = "pagerank-transpose"
    EMPLOYEES = "employees"

    @classmethod
    def parse(cls, text: str) -> AttackStrategy:
        key = text.strip().lower().replace("_", "-")
        for s in cls:
            if s.value == key:
                return s
        raise ValueError(f"unknown strategy {text!r}; expected one of {[s.value for s in cls]}")

    @property
    def variant(self) -> Variant | None:
        return {self.PAGERANK: Variant.PAGERANK, self.PAGERANK_TRANSPOSE: Variant.PAGERANK_TRANSPOSE}.get(self)


# ------------------------------------------------------------------- orders
@dataclass(frozen=True)
class AttackPlan:
    """Removal order over ``units``; ``positions[0]`` is removed first."""

    scale: Scale
    strategy: AttackStrategy
    units: tuple
    positions: np.ndarray
    seed: int
    imputation_seed: int | None = None

    @property
    def order(self) -> list:
        return [self.units[p] for p in self.positions]


def make_attack_order(
    units: Sequence,
    strategy: AttackStrategy,
    values: Mapping | Sequence | np.ndarray | None = None,
    seed: int = 0,
    *,
    scale: Scale = Scale.FIRM,
    imputation_seed: int | None = None,
) -> AttackPlan:
    """Build a removal order.

    RANDOM draws a uniform permutation. The value-based strategies remove
    the highest-valued unit first; units with equal values are shuffled
    among themselves using ``seed``.
    """
    units = tuple(units)
    n = len(units)
    rng = np.random.default_rng(seed)
    if strategy is AttackStrategy.RANDOM:
        positions = rng.permutation(n)
    else:
        if values is None:
            raise DataError(f"{strategy.value} attack needs a value for every unit")
        if isinstance(values, Mapping):
            missing = [u for u in units if u not in values or values[u] is None]
            if missing:
                raise DataError(f"no {strategy.value} value for unit(s) {missing[:5]!r}; impute first")
            vals = np.array([values[u] for u in units], dtype=np.float64)
        else:
            vals = np.asarray(values, dtype=np.float64)
            if vals.shape != (n,) or np.isnan(vals).any():
                raise DataError(f"{strategy.value} attack needs a value for every unit")
        tiebreak = rng.permutation(n)
        positions = np.lexsort((tiebreak, -vals))
    return AttackPlan(scale, strategy, units, positions.astype(np.int64), int(seed), imputation_seed)


# -------------------------------------------------------------------- sweeps
@dataclass(frozen=True)
class MetricCurve:
    grid: np.ndarray  # fraction of units remaining, descending from 1.0
    removed: np.ndarray  # units removed at each grid point
    firms_remaining: np.ndarray
    atsr: np.ndarray
    stsr: np.ndarray
    altsr: np.ndarray

    @property
    def scfr(self) -> np.ndarray:
        return 1.0 - self.atsr

    def stack(self) -> np.ndarray:
        return np.vstack([self.atsr, self.stsr, self.altsr, self.scfr])


class SweepContext:
    """Graph arrays shared, read-only, by every sweep on one graph."""

    def __init__(self, graph: SupplyGraph, baseline: ReachabilityBaseline | None = None):
        self.graph = graph
        self.baseline = baseline if baseline is not None else reachability_baseline(graph)
        succ, pred = graph.successors_csr, graph.predecessors_csr
        self.succ_ptr = succ.indptr.astype(np.int64)
        self.succ_idx = succ.indices.astype(np.int64)
        self.pred_ptr = pred.indptr.astype(np.int64)
        self.pred_idx = pred.indices.astype(np.int64)
        self.is_ts = np.ascontiguousarray(graph.ts_mask, dtype=np.bool_)
        msfs = self.baseline.msf_nodes
        self.n_msf = len(msfs)
        n_words = max(1, (self.n_msf + 63) // 64)
        own = np.zeros((graph.n_nodes, n_words), dtype=np.uint64)
        for slot, m in enumerate(msfs):
            own[m, slot // 64] |= np.uint64(1) << np.uint64(slot % 64)
        self.own = own
        self.evaluated = self.baseline.evaluated
        self.sizes = self.baseline.sizes[self.evaluated]
        if not self.evaluated.any():
            raise DataError("no evaluable MSFs")

    def counts(self, mapping: ScaleMapping, restore_order: np.ndarray, record_after: np.ndarray) -> np.ndarray:
        unit_ptr, unit_nodes = mapping.members()
        return sweep_counts(
            self.succ_ptr, self.succ_idx, self.pred_ptr, self.pred_idx, self.own, self.is_ts,
            unit_ptr, unit_nodes, np.ascontiguousarray(restore_order, dtype=np.int64),
            np.ascontiguousarray(record_after, dtype=np.int64), self.n_msf,
        )


def removal_grid(n_units: int, grid_points: int = 200, per_step_limit: int = 500) -> np.ndarray:
    """Ascending removal counts at which metrics are evaluated."""
    if n_units <= per_step_limit:
        return np.arange(n_units + 1, dtype=np.int64)
    return np.unique(np.rint(np.linspace(0, n_units, grid_points + 1)).astype(np.int64))


def run_removal(
    graph: SupplyGraph,
    mapping: ScaleMapping,
    baseline: ReachabilityBaseline,
    plan: AttackPlan,
    grid: np.ndarray | None = None,
    *,
    grid_points: int = 200,
    per_step_limit: int = 500,
    context: SweepContext | None = None,
) -> MetricCurve:
    """Remove units in plan order and evaluate reachability on a grid.

    ``grid`` gives fractions of units remaining (descending); by default
    every removal is evaluated for up to ``per_step_limit`` units, and
    about ``grid_points`` evenly spaced removal counts otherwise.
    """
    n = mapping.n_units
    if len(plan.positions) != n:
        raise DataError(f"plan orders {len(plan.positions)} units but the mapping has {n}")
    ctx = context if context is not None else SweepContext(graph, baseline)
    if grid is None:
        removed = removal_grid(n, grid_points, per_step_limit)
        fractions = (n - removed) / n
    else:
        fractions = np.asarray(grid, dtype=np.float64)
        removed = np.rint((1.0 - fractions) * n).astype(np.int64)
    record_after = (n - removed)[::-1]
    counts = ctx.counts(mapping, plan.positions[::-1], record_after)[::-1]
    atsr, stsr, altsr = metrics_from_counts(counts[:, ctx.evaluated], ctx.sizes)

    gone_firms = np.concatenate([[0], np.cumsum(mapping.unit_sizes[plan.positions])])
    firms_remaining = 1.0 - gone_firms[removed] / graph.n_nodes
    return MetricCurve(fractions, removed, firms_remaining, atsr, stsr, altsr)


# ----------------------------------------------------------------- ensembles
@dataclass(frozen=True)
class ExperimentConfig:
    scale: Scale = Scale.FIRM
    strategy: AttackStrategy = AttackStrategy.RANDOM
    tier_count: int | None = None  # None: full depth
    realizations: int | None = None  # None: 100, or 24 for PageRank attacks
    master_seed: int = 0
    grid_points: int = 200
    per_step_limit: int = 500
    breakdown_limits: tuple[float, ...] = (0.20, 0.01)
    damping: float = 0.85
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.realizations is not None and self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.tier_count is not None and self.tier_count < 1:
            raise ValueError("tier_count must be >= 1")
        if self.grid_points < 1:
            raise ValueError("grid_points must be >= 1")

    @property
    def n_realizations(self) -> int:
        if self.realizations is not None:
            return self.realizations
        return 24 if self.strategy.variant is not None else 100

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scale"] = self.scale.value
        d["strategy"] = self.strategy.value
        d["breakdown_limits"] = list(self.breakdown_limits)
        d["realizations"] = self.n_realizations
        return d


@dataclass(frozen=True)
class EnsembleResult:
    scale: Scale
    strategy: AttackStrategy
    tier_count: int
    grid: np.ndarray
    firms_remaining: np.ndarray
    mean: dict[str, np.ndarray]
    p2_5: dict[str, np.ndarray]
    p97_5: dict[str, np.ndarray]
    realization_count: int
    seeds: tuple[tuple[int, int], ...]
    curves: np.ndarray = field(repr=False)  # (realizations, len(METRICS), len(grid))
    unit_counts: tuple[int, ...] = ()
    config: ExperimentConfig | None = None

    def mean_curve(self, metric: str = "atsr") -> tuple[np.ndarray, np.ndarray]:
        return self.grid, self.mean[metric]


def realization_seeds(master_seed: int, r: int) -> tuple[int, int]:
    """(order seed, imputation seed) for realization ``r``."""
    a, b = np.random.SeedSequence([master_seed, r]).generate_state(2, dtype=np.uint32)
    return int(a), int(b)


def nearest_rank(samples: np.ndarray, p: float) -> np.ndarray:
    """Nearest-rank percentile along axis 0."""
    n = samples.shape[0]
    rank = math.ceil(Fraction(str(p)) * n / 100)
    rank = min(max(rank, 1), n)
    return np.sort(samples, axis=0)[rank - 1]


def summarize(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise mean and 2.5/97.5 nearest-rank band over axis 0.

    The band is widened where needed so it always contains the mean; with
    heavily skewed samples the nearest-rank percentile alone can fall on
    the wrong side of it.
    """
    lo_s, hi_s = samples.min(axis=0), samples.max(axis=0)
    mean = samples.mean(axis=0)
    mean = np.where(lo_s == hi_s, lo_s, np.clip(mean, lo_s, hi_s))
    lo = np.minimum(nearest_rank(samples, 2.5), mean)
    hi = np.maximum(nearest_rank(samples, 97.5), mean)
    return mean, lo, hi


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get("SCNET_THREADS", "0").strip() or "0"
        try:
            workers = int(env)
        except ValueError:
            raise ValueError(f"SCNET_THREADS must be an integer, got {env!r}") from None
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def experiment_graph(graph: SupplyGraph, tier_count: int | None) -> SupplyGraph:
    g = restrict_to_reachable(graph)
    if tier_count is not None:
        g = truncate_to_tiers(g, tier_count)
    return g


def unit_values(strategy, g, mapping, imputed, scores: CentralityScores | None):
    if strategy is AttackStrategy.RANDOM:
        return None
    if strategy is AttackStrategy.EMPLOYEES:
        return unit_employee_totals(g, mapping, imputed)
    return unit_scores(scores, mapping)


def run_ensemble(graph: SupplyGraph, config: ExperimentConfig, workers: int | None = None) -> EnsembleResult:
    """Run every realization of one (scale, strategy, tier count) experiment.

    Realization ``r`` draws its order and imputation seeds from
    ``(master_seed, r)``; results are merged by realization index, so the
    output does not depend on ``workers``.
    """
    g = experiment_graph(graph, config.tier_count)
    ctx = SweepContext(g)
    scale, strategy = config.scale, config.strategy
    scores = None
    if strategy.variant is not None:
        scores = pagerank(g, strategy.variant, config.damping, config.tol, config.max_iter)

    needs = set(SCALE_NEEDS[scale])
    if strategy is AttackStrategy.EMPLOYEES:
        needs.add("employees")
    needs_t = tuple(a for a in ATTRIBUTES if a in needs)

    fixed_mapping = None if needs_t else aggregate(g, scale)
    seeds, plans, mappings = [], [], []
    for r in range(config.n_realizations):
        order_seed, imp_seed = realization_seeds(config.master_seed, r)
        imputed = impute_attributes(g, imp_seed, needs_t) if needs_t else None
        mapping = fixed_mapping if fixed_mapping is not None else aggregate(g, scale, imputed)
        values = unit_values(strategy, g, mapping, imputed, scores)
        plans.append(make_attack_order(mapping.units, strategy, values, order_seed, scale=scale,
                                       imputation_seed=imp_seed if needs_t else None))
        mappings.append(mapping)
        seeds.append((order_seed, imp_seed))

    unit_counts = tuple(m.n_units for m in mappings)
    if len(set(unit_counts)) == 1:
        n = unit_counts[0]
        grid = (n - removal_grid(n, config.grid_points, config.per_step_limit)) / n
    else:
        grid = np.linspace(1.0, 0.0, config.grid_points + 1)

    def one(r: int) -> MetricCurve:
        return run_removal(g, mappings[r], ctx.baseline, plans[r], grid, context=ctx)

    n_workers = min(resolve_workers(workers), config.n_realizations)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            curves = list(pool.map(one, range(config.n_realizations)))
    else:
        curves = [one(r) for r in range(config.n_realizations)]

    stacked = np.stack([c.stack() for c in curves])
    mean, lo, hi = {}, {}, {}
    for i, name in enumerate(METRICS):
        mean[name], lo[name], hi[name] = summarize(stacked[:, i, :])
    firms = np.stack([c.firms_remaining for c in curves]).mean(axis=0)
    return EnsembleResult(
        scale=scale,
        strategy=strategy,
        tier_count=config.tier_count if config.tier_count is not None else g.max_tier,
        grid=grid,
        firms_remaining=firms,
        mean=mean,
        p2_5=lo,
        p97_5=hi,
        realization_count=config.n_realizations,
        seeds=tuple(seeds),
        curves=stacked,
        unit_counts=unit_counts,
        config=config,
    )
