"""Tier convergence, breakdown thresholds and fragmentation thresholds."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .attack import (
    AttackStrategy,
    EnsembleResult,
    MetricCurve,
    make_attack_order,
    realization_seeds,
    summarize,
    unit_values,
)
from .centrality import pagerank
from .errors import DataError
from .graph import SupplyGraph
from .multiscale import ATTRIBUTES, SCALE_NEEDS, Scale, ScaleMapping, aggregate, impute_attributes

logger = logging.getLogger(__name__)

STEP = 0.005


def _xy(curve) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(curve, EnsembleResult):
        return curve.grid, curve.mean["atsr"]
    if isinstance(curve, MetricCurve):
        return curve.grid, curve.atsr
    x, y = curve
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)


def on_shared_grid(curve, step: float = STEP) -> np.ndarray:
    """Linear interpolation of a fraction-remaining curve onto ``0, step, ..., 1``."""
    x, y = _xy(curve)
    order = np.argsort(x, kind="stable")
    shared = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    return np.interp(shared, x[order], y[order])


def uniform_distance(curve_a, curve_b, step: float = STEP) -> float:
    """Sup-norm distance between two curves on the shared 0.005 grid.

    Curves may be :class:`EnsembleResult` (mean ATSR), :class:`MetricCurve`
    (ATSR) or plain ``(fractions, values)`` pairs.
    """
    return float(np.max(np.abs(on_shared_grid(curve_a, step) - on_shared_grid(curve_b, step))))


def curve_area(curve) -> float:
    """Trapezoid area under an ATSR curve over fraction remaining."""
    x, y = _xy(curve)
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


# ------------------------------------------------------------- convergence
@dataclass(frozen=True)
class Convergence:
    recommended_tier: int
    distances: dict[int, float]
    eps: float
    t_max: int
    unconverged: bool = False


def recommend_tier(distances: Mapping[int, float] | Sequence[float], eps: float = 0.05) -> Convergence:
    """First tier count whose distance to the deepest curve is within ``eps``.

    A sequence is read as ``d(1), d(2), ...``. When nothing below ``t_max``
    qualifies the answer is ``t_max`` and ``unconverged`` is set.
    """
    if not isinstance(distances, Mapping):
        distances = {t + 1: float(d) for t, d in enumerate(distances)}
    tiers = sorted(distances)
    t_max = tiers[-1]
    for t in tiers[:-1]:
        if distances[t] <= eps:
            return Convergence(t, dict(distances), eps, t_max)
    return Convergence(t_max, dict(distances), eps, t_max, unconverged=True)


def convergence_tiers(curves_by_tier: Mapping[int, object], eps: float = 0.05) -> Convergence:
    """Compare each tier's mean ATSR curve with the deepest one."""
    if not curves_by_tier:
        raise ValueError("no curves given")
    t_max = max(curves_by_tier)
    ref = curves_by_tier[t_max]
    dist = {t: (0.0 if t == t_max else uniform_distance(curves_by_tier[t], ref))
            for t in sorted(curves_by_tier)}
    return recommend_tier(dist, eps)


@dataclass(frozen=True)
class ConvergenceRow:
    scale: Scale
    strategy: AttackStrategy
    result: Convergence


@dataclass
class ConvergenceReport:
    eps: float
    t_max: int
    rows: list[ConvergenceRow] = field(default_factory=list)


# --------------------------------------------------------------- breakdown
@dataclass(frozen=True)
class BreakdownThreshold:
    limit: float
    remaining: float
    reached: bool

    @property
    def affected(self) -> float:
        return 1.0 - self.remaining


def breakdown_threshold(curve, limit: float) -> BreakdownThreshold:
    """Largest fraction remaining at which mean ATSR is below ``limit``.

    Answers are grid values; nothing is interpolated. If ATSR never drops
    below the limit the result has ``remaining=0`` and ``reached=False``.
    """
    x, y = _xy(curve)
    hit = y < limit
    if not hit.any():
        return BreakdownThreshold(limit, 0.0, False)
    return BreakdownThreshold(limit, float(x[hit].max()), True)


@dataclass(frozen=True)
class BreakdownRow:
    scale: Scale
    strategy: AttackStrategy
    threshold: BreakdownThreshold


@dataclass
class BreakdownReport:
    rows: list[BreakdownRow] = field(default_factory=list)

    def add(self, result: EnsembleResult, limits: Sequence[float]) -> None:
        for limit in limits:
            self.rows.append(BreakdownRow(result.scale, result.strategy, breakdown_threshold(result, limit)))


# ----------------------------------------------------------- fragmentation
@dataclass(frozen=True)
class FragmentationReport:
    """Where the surviving graph's mean undirected degree first drops below 1."""

    scale: Scale
    order_source: AttackStrategy
    realizations: int
    remaining: float
    remaining_p2_5: float
    remaining_p97_5: float
    firms_remaining: float
    per_realization: tuple[float, ...]
    pre_fragmented: bool = False
    criterion: str = "average degree < 1"

    @property
    def affected(self) -> float:
        return 1.0 - self.remaining


def _crossing(edges: np.ndarray, n_firms: int, firm_step: np.ndarray, n_units: int) -> tuple[int, int]:
    """Removal count at the first sub-unit mean degree, and firms left then."""
    if len(edges):
        die = np.minimum(firm_step[edges[:, 0]], firm_step[edges[:, 1]])
        edges_left = len(edges) - np.cumsum(np.bincount(die, minlength=n_units + 1))
    else:
        edges_left = np.zeros(n_units + 1, dtype=np.int64)
    firms_left = n_firms - np.cumsum(np.bincount(firm_step, minlength=n_units + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        avg = np.where(firms_left > 0, 2.0 * edges_left / np.maximum(firms_left, 1), 0.0)
    k = int(np.argmax(avg < 1.0))
    return k, int(firms_left[k])


def fragmentation_threshold(
    graph: SupplyGraph,
    mapping: ScaleMapping | Scale = Scale.FIRM,
    order_source: AttackStrategy = AttackStrategy.RANDOM,
    realizations: int = 100,
    master_seed: int = 0,
) -> FragmentationReport:
    """Remove units until the mean degree of the surviving simple graph is below 1.

    ``graph`` is analysed as given; pass the experiment graph (reachable,
    truncated) when that is what should be measured. With a :class:`Scale`
    instead of a fixed mapping, missing attributes are re-imputed in every
    realization. Targeted ``order_source`` values are accepted but the
    standard report uses random removal only.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    edges = graph.simple_undirected_edges
    n = graph.n_nodes
    if n == 0:
        raise DataError("fragmentation of an empty graph")
    scale = mapping.scale if isinstance(mapping, ScaleMapping) else mapping

    needs = set() if isinstance(mapping, ScaleMapping) else set(SCALE_NEEDS[scale])
    if order_source is AttackStrategy.EMPLOYEES:
        needs.add("employees")
    needs_t = tuple(a for a in ATTRIBUTES if a in needs)
    scores = pagerank(graph, order_source.variant) if order_source.variant is not None else None

    initial_avg = 2.0 * len(edges) / n
    if initial_avg < 1.0:
        logger.warning("graph is already fragmented (mean degree %.3f)", initial_avg)
        return FragmentationReport(scale, order_source, realizations, 1.0, 1.0, 1.0, 1.0,
                                   (1.0,) * realizations, pre_fragmented=True)

    remaining, firms = [], []
    for r in range(realizations):
        order_seed, imp_seed = realization_seeds(master_seed, r)
        imputed = impute_attributes(graph, imp_seed, needs_t) if needs_t else None
        m = mapping if isinstance(mapping, ScaleMapping) else aggregate(graph, scale, imputed)
        values = unit_values(order_source, graph, m, imputed, scores)
        plan = make_attack_order(m.units, order_source, values, order_seed, scale=scale)
        step_of_unit = np.empty(m.n_units, dtype=np.int64)
        step_of_unit[plan.positions] = np.arange(1, m.n_units + 1)
        k, left = _crossing(edges, n, step_of_unit[m.unit_of], m.n_units)
        remaining.append((m.n_units - k) / m.n_units)
        firms.append(left / n)

    samples = np.array(remaining)[:, None]
    mean, lo, hi = summarize(samples)
    return FragmentationReport(
        scale, order_source, realizations,
        float(mean[0]), float(lo[0]), float(hi[0]), float(np.mean(firms)),
        tuple(remaining),
    )
