"""PageRank, unit-level score aggregation, and degree statistics.

PageRank on the dependency graph sends mass from customers to suppliers, so
the top firms are the ones most relied on by their customers; running it on
the transpose reverses that. Degree statistics use the undirected simple
graph, which is what the Erdos-Renyi and Molloy-Reed arguments assume.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .errors import DataError
from .graph import SupplyGraph
from .multiscale import ImputedAttrs, ScaleMapping, raw_attribute

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    PAGERANK = "pagerank"
    PAGERANK_TRANSPOSE = "pagerank-transpose"


@dataclass(frozen=True)
class CentralityScores:
    variant: Variant
    ids: tuple[str, ...]
    values: np.ndarray
    damping: float
    iterations_used: int
    converged: bool

    @property
    def score_of(self) -> dict[str, float]:
        return dict(zip(self.ids, self.values.tolist()))


def pagerank(
    graph: SupplyGraph,
    variant: Variant = Variant.PAGERANK,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> CentralityScores:
    """Power-iteration PageRank with uniform teleportation.

    Mass sitting on dangling nodes is spread uniformly over all nodes.
    Iteration stops once the L1 change drops below ``tol``; hitting
    ``max_iter`` first is reported through ``converged=False``.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must lie in (0, 1), got {damping}")
    n = graph.n_nodes
    if n == 0:
        raise DataError("pagerank of an empty graph")
    adj = graph.successors_csr if variant is Variant.PAGERANK else graph.predecessors_csr
    out_deg = np.diff(adj.indptr).astype(np.float64)
    dangling = out_deg == 0
    inv_out = np.zeros(n)
    inv_out[~dangling] = 1.0 / out_deg[~dangling]
    flow = adj.astype(np.float64).T.tocsr()

    x = np.full(n, 1.0 / n)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        nxt = damping * (flow @ (x * inv_out))
        nxt += (damping * x[dangling].sum() + (1.0 - damping)) / n
        nxt /= nxt.sum()
        delta = np.abs(nxt - x).sum()
        x = nxt
        if delta < tol:
            converged = True
            break
    if not converged:
        logger.warning("pagerank did not converge in %d iterations", max_iter)
    return CentralityScores(variant, graph.ids, x, damping, it, converged)


def unit_scores(scores: CentralityScores, mapping: ScaleMapping) -> np.ndarray:
    return np.bincount(mapping.unit_of, weights=scores.values, minlength=mapping.n_units)


def aggregate_centrality(scores: CentralityScores, mapping: ScaleMapping) -> dict:
    """Unit score = sum of its member firms' scores."""
    return dict(zip(mapping.units, unit_scores(scores, mapping).tolist()))


def unit_employee_totals(graph: SupplyGraph, mapping: ScaleMapping, imputed: ImputedAttrs | None) -> np.ndarray:
    if imputed is not None and imputed.employees is not None:
        emp = imputed.employees
    else:
        emp = raw_attribute(graph, "employees")
        if any(v is None for v in emp):
            raise DataError("employee counts are incomplete; impute first")
        emp = emp.astype(np.int64)
    totals = np.zeros(mapping.n_units, dtype=np.int64)
    np.add.at(totals, mapping.unit_of, np.asarray(emp, dtype=np.int64))
    return totals


def unit_employees(graph: SupplyGraph, mapping: ScaleMapping, imputed: ImputedAttrs | None) -> dict:
    if mapping.n_units == 0:
        return {}
    return dict(zip(mapping.units, unit_employee_totals(graph, mapping, imputed).tolist()))


# ------------------------------------------------------------ degree statistics
class PowerLawFit(NamedTuple):
    gamma: float
    xmin: int
    n_tail: int
    ks: float


def _mle_gamma(log_sum: float, n: int, xmin: int) -> float:
    def nll(g):
        return g * log_sum + n * np.log(special.zeta(g, xmin))

    res = optimize.minimize_scalar(nll, bounds=(1.0 + 1e-6, 20.0), method="bounded",
                                   options={"xatol": 1e-8})
    return float(res.x)


def fit_discrete_powerlaw(samples, min_tail: int = 50) -> PowerLawFit | None:
    """Discrete maximum-likelihood power-law fit with KS-selected ``xmin``.

    Every distinct value leaving at least ``min_tail`` samples in the tail
    is tried as ``xmin``; the one minimising the Kolmogorov-Smirnov
    distance between the empirical and fitted tail CDFs wins. Returns
    ``None`` for degenerate input (fewer than two distinct values).
    """
    x = np.sort(np.asarray(samples, dtype=np.int64))
    x = x[x >= 1]
    if x.size < 2 or x[0] == x[-1]:
        return None
    min_tail = min(min_tail, x.size)
    uniq = np.unique(x)
    best: PowerLawFit | None = None
    for xmin in uniq[:-1]:
        tail = x[np.searchsorted(x, xmin):]
        n = tail.size
        if n < min_tail:
            break
        gamma = _mle_gamma(float(np.log(tail).sum()), n, int(xmin))
        vals, counts = np.unique(tail, return_counts=True)
        emp = np.cumsum(counts) / n
        model = 1.0 - special.zeta(gamma, vals + 1.0) / special.zeta(gamma, float(xmin))
        ks = float(np.max(np.abs(emp - model)))
        if best is None or ks < best.ks:
            best = PowerLawFit(gamma, int(xmin), n, ks)
    return best


@dataclass(frozen=True)
class DegreeStats:
    mean_degree: float
    second_moment: float
    kappa: float
    gamma: float | None
    xmin: int | None
    n_nodes: int
    degree_kind: str = "total degree, undirected simple graph"

    @property
    def fitted(self) -> bool:
        return self.gamma is not None


def undirected_degrees(graph: SupplyGraph) -> np.ndarray:
    e = graph.simple_undirected_edges
    return np.bincount(e.ravel(), minlength=graph.n_nodes)


def degree_stats(graph: SupplyGraph, fit: bool = True) -> DegreeStats:
    """Degree moments, ``kappa = <k^2>/<k>``, and a power-law exponent.

    The exponent is fitted only when at least ten nodes have degree >= 1 and
    the degrees are not all equal; otherwise ``gamma`` is ``None``.
    """
    deg = undirected_degrees(graph).astype(np.float64)
    if deg.size == 0:
        raise DataError("degree statistics of an empty graph")
    k1 = float(deg.mean())
    k2 = float((deg ** 2).mean())
    kappa = k2 / k1 if k1 > 0 else 0.0
    gamma = xmin = None
    positive = deg[deg >= 1]
    if fit and positive.size >= 10:
        res = fit_discrete_powerlaw(positive.astype(np.int64))
        if res is not None:
            gamma, xmin = res.gamma, res.xmin
    return DegreeStats(k1, k2, kappa, gamma, xmin, graph.n_nodes)


class CriticalFraction(NamedTuple):
    fc: float
    subcritical: bool


def molloy_reed_fc(stats: DegreeStats | float) -> CriticalFraction:
    """Random-removal critical fraction ``1 - 1/(kappa - 1)``; zero when ``kappa <= 2``."""
    kappa = stats.kappa if isinstance(stats, DegreeStats) else float(stats)
    if kappa <= 2.0:
        return CriticalFraction(0.0, kappa <= 1.0)
    return CriticalFraction(1.0 - 1.0 / (kappa - 1.0), False)
