"""Directed supply-chain dependency graph.

Edges point from customer to supplier ("depends on"), so everything a
medical supply firm (MSF) needs is found by a forward traversal. Terminal
suppliers (TSs) are the members of sink strongly connected components: a
firm with no suppliers is a singleton sink, and a supply loop with no exit
makes every loop member a TS.

Self-loops and duplicate edges are kept for the census but play no part in
tiering, reachability or degree statistics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import DataError

logger = logging.getLogger(__name__)

UNREACHABLE = -1


@dataclass(frozen=True)
class FirmAttrs:
    """Attributes of one firm. ``None`` marks an unknown value."""

    firm_id: str
    country: str | None = None
    industry: str | None = None
    employees: int | None = None
    is_msf: bool = False
    name: str | None = None

    def __post_init__(self):
        if self.employees is not None and self.employees < 0:
            raise DataError(f"firm {self.firm_id!r}: negative employee count {self.employees}")


def _gather(indptr: np.ndarray, indices: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Concatenate the CSR rows ``rows`` without a Python loop."""
    starts = indptr[rows]
    lengths = indptr[rows + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths)
    return indices[offsets + np.arange(total)]


class SupplyGraph:
    """Immutable dependency graph with derived MSF/TS/tier information.

    Nodes are addressed by position (``0..n-1``) internally and by
    ``firm_id`` externally. ``edges`` is an ``(E, 2)`` array of
    ``(customer, supplier)`` positions, deduplicated, self-loops included.
    """

    def __init__(self, attrs: Sequence[FirmAttrs], edges: np.ndarray):
        self.attrs: tuple[FirmAttrs, ...] = tuple(attrs)
        self.ids: tuple[str, ...] = tuple(a.firm_id for a in self.attrs)
        self.index: dict[str, int] = {fid: i for i, fid in enumerate(self.ids)}
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        edges.setflags(write=False)
        self.edges = edges
        self.msf_mask = np.fromiter((a.is_msf for a in self.attrs), dtype=bool, count=len(self.attrs))
        self.msf_mask.setflags(write=False)

    # ------------------------------------------------------------------ size
    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_self_loops(self) -> int:
        return int(np.count_nonzero(self.edges[:, 0] == self.edges[:, 1]))

    def __repr__(self) -> str:
        return (f"SupplyGraph(nodes={self.n_nodes}, edges={self.n_edges}, "
                f"msfs={len(self.msf_nodes)}, tss={int(self.ts_mask.sum())})")

    # ------------------------------------------------------- adjacency (CSR)
    @cached_property
    def analytic_edges(self) -> np.ndarray:
        """Edges used by every analysis: self-loops dropped."""
        e = self.edges
        return e[e[:, 0] != e[:, 1]]

    def _csr(self, src: np.ndarray, dst: np.ndarray) -> sparse.csr_matrix:
        n = self.n_nodes
        m = sparse.csr_matrix(
            (np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n)
        )
        m.sum_duplicates()
        m.sort_indices()
        return m

    @cached_property
    def successors_csr(self) -> sparse.csr_matrix:
        e = self.analytic_edges
        return self._csr(e[:, 0], e[:, 1])

    @cached_property
    def predecessors_csr(self) -> sparse.csr_matrix:
        e = self.analytic_edges
        return self._csr(e[:, 1], e[:, 0])

    def successors(self, firm_id: str) -> list[str]:
        csr = self.successors_csr
        i = self.index[firm_id]
        return [self.ids[j] for j in csr.indices[csr.indptr[i]:csr.indptr[i + 1]]]

    # ---------------------------------------------------------- derived sets
    @cached_property
    def scc_labels(self) -> np.ndarray:
        _, labels = csgraph.connected_components(self.successors_csr, directed=True, connection="strong")
        return labels

    @cached_property
    def scc_sizes(self) -> np.ndarray:
        """Size of the strongly connected component containing each node."""
        labels = self.scc_labels
        return np.bincount(labels)[labels]

    @cached_property
    def ts_mask(self) -> np.ndarray:
        labels = self.scc_labels
        e = self.analytic_edges
        leaving = labels[e[:, 0]] != labels[e[:, 1]]
        not_sink = np.zeros(labels.max() + 1 if len(labels) else 0, dtype=bool)
        not_sink[labels[e[leaving, 0]]] = True
        mask = ~not_sink[labels]
        mask.setflags(write=False)
        return mask

    @cached_property
    def tiers(self) -> np.ndarray:
        """Shortest dependency-path distance from the MSF set (``UNREACHABLE`` = -1)."""
        n = self.n_nodes
        tiers = np.full(n, UNREACHABLE, dtype=np.int64)
        frontier = np.flatnonzero(self.msf_mask)
        if frontier.size == 0:
            logger.warning("graph has no MSFs; every node is unreachable")
        tiers[frontier] = 0
        csr = self.successors_csr
        t = 0
        while frontier.size:
            t += 1
            nbrs = _gather(csr.indptr, csr.indices, frontier)
            nbrs = np.unique(nbrs[tiers[nbrs] == UNREACHABLE])
            tiers[nbrs] = t
            frontier = nbrs
        tiers.setflags(write=False)
        return tiers

    @property
    def msf_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.msf_mask)

    @property
    def msf_set(self) -> frozenset[str]:
        return frozenset(self.ids[i] for i in self.msf_nodes)

    @property
    def ts_set(self) -> frozenset[str]:
        return frozenset(self.ids[i] for i in np.flatnonzero(self.ts_mask))

    @property
    def tier_of(self) -> dict[str, float]:
        return {fid: (math.inf if t == UNREACHABLE else int(t)) for fid, t in zip(self.ids, self.tiers)}

    @property
    def max_tier(self) -> int:
        finite = self.tiers[self.tiers != UNREACHABLE]
        return int(finite.max()) if finite.size else UNREACHABLE

    @cached_property
    def simple_undirected_edges(self) -> np.ndarray:
        """Unique unordered ``(u, v)`` pairs with ``u < v``."""
        e = self.analytic_edges
        if len(e) == 0:
            return np.empty((0, 2), dtype=np.int64)
        pairs = np.sort(e, axis=1)
        return np.unique(pairs, axis=0)

    # ---------------------------------------------------------- derivations
    def subgraph(self, keep: np.ndarray) -> SupplyGraph:
        """Induced subgraph on the boolean node mask ``keep`` (node order kept)."""
        keep = np.asarray(keep, dtype=bool)
        new_pos = np.cumsum(keep) - 1
        e = self.edges
        inside = keep[e[:, 0]] & keep[e[:, 1]]
        attrs = [a for a, k in zip(self.attrs, keep) if k]
        return SupplyGraph(attrs, new_pos[e[inside]])

    def reversed(self) -> SupplyGraph:
        """Same nodes, every edge flipped."""
        return SupplyGraph(self.attrs, self.edges[:, ::-1])

    def edge_list(self) -> list[tuple[str, str]]:
        return [(self.ids[u], self.ids[v]) for u, v in self.edges]


def build_graph(
    edge_records: Iterable[tuple[str, str]],
    node_records: Iterable[FirmAttrs] = (),
    *,
    allow_empty: bool = False,
) -> SupplyGraph:
    """Build a :class:`SupplyGraph` from ``(customer_id, supplier_id)`` pairs.

    Endpoints missing from ``node_records`` are created with unknown
    attributes. Duplicate edges collapse; a firm listed twice must carry
    identical attributes. An empty edge set is rejected unless
    ``allow_empty`` is set.
    """
    attrs: dict[str, FirmAttrs] = {}
    for rec in node_records:
        prev = attrs.get(rec.firm_id)
        if prev is not None and prev != rec:
            raise DataError(f"duplicate firm_id with conflicting attributes: {rec.firm_id!r}")
        attrs[rec.firm_id] = rec

    pairs = [(str(c), str(s)) for c, s in edge_records]
    if not pairs and not allow_empty:
        raise DataError("empty graph")
    for c, s in pairs:
        for fid in (c, s):
            if fid not in attrs:
                attrs[fid] = FirmAttrs(fid)
    if not attrs:
        raise DataError("empty graph")

    index = {fid: i for i, fid in enumerate(attrs)}
    if pairs:
        raw = np.array([(index[c], index[s]) for c, s in pairs], dtype=np.int64)
        _, first = np.unique(raw, axis=0, return_index=True)
        edges = raw[np.sort(first)]
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    return SupplyGraph(list(attrs.values()), edges)


def identify_terminal_suppliers(graph: SupplyGraph) -> set[str]:
    """Union of all sink SCCs of the condensation."""
    return set(graph.ts_set)


def assign_tiers(graph: SupplyGraph) -> dict[str, float]:
    """Tier of every firm; ``math.inf`` for firms no MSF depends on."""
    if not graph.msf_mask.any():
        raise DataError("cannot assign tiers: graph has no MSFs")
    return graph.tier_of


def restrict_to_reachable(graph: SupplyGraph) -> SupplyGraph:
    keep = graph.tiers != UNREACHABLE
    if keep.all():
        return graph
    logger.info("dropping %d firms not reachable from any MSF", int((~keep).sum()))
    return graph.subgraph(keep)


def truncate_to_tiers(graph: SupplyGraph, k: int) -> SupplyGraph:
    """Induced subgraph on firms with tier ``<= k``; TSs recomputed on the cut graph."""
    if k < 1:
        raise DataError(f"tier count must be >= 1, got {k}")
    tiers = graph.tiers
    keep = (tiers != UNREACHABLE) & (tiers <= k)
    if keep.all():
        return graph
    return graph.subgraph(keep)


# ---------------------------------------------------------------- reachability
@dataclass(frozen=True)
class ReachabilityBaseline:
    """TSs each MSF reaches in the intact graph.

    ``targets[i]`` holds node positions for MSF ``msf_nodes[i]``. An MSF is
    only evaluated when that set is non-empty.
    """

    graph_ids: tuple[str, ...]
    msf_nodes: np.ndarray
    targets: tuple[np.ndarray, ...]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(t) for t in self.targets], dtype=np.int64)

    @property
    def evaluated(self) -> np.ndarray:
        return self.sizes > 0

    @property
    def evaluated_msfs(self) -> list[str]:
        return [self.graph_ids[m] for m, ok in zip(self.msf_nodes, self.evaluated) if ok]

    def baseline_of(self, firm_id: str) -> frozenset[str]:
        pos = self.graph_ids.index(firm_id)
        (slot,) = np.flatnonzero(self.msf_nodes == pos)
        return frozenset(self.graph_ids[t] for t in self.targets[slot])


def _reach_from(csr: sparse.csr_matrix, source: int, self_reachable: bool) -> np.ndarray:
    """Nodes reachable from ``source`` by a path of at least one edge."""
    order = csgraph.breadth_first_order(csr, source, directed=True, return_predecessors=False)
    if not self_reachable:
        order = order[order != source]
    return order


_warned: set[tuple[int, int, int]] = set()


def reachability_baseline(graph: SupplyGraph) -> ReachabilityBaseline:
    csr = graph.successors_csr
    ts = graph.ts_mask
    msfs = graph.msf_nodes
    targets = []
    for m in msfs:
        reach = _reach_from(csr, int(m), bool(graph.scc_sizes[m] > 1))
        targets.append(np.sort(reach[ts[reach]]))
    base = ReachabilityBaseline(graph.ids, msfs, tuple(targets))
    skipped = int((~base.evaluated).sum())
    if skipped:
        key = (graph.n_nodes, graph.n_edges, skipped)
        # ensembles rebuild baselines many times; say it once per graph shape
        log = logger.info if key in _warned else logger.warning
        _warned.add(key)
        log("%d MSF(s) reach no terminal supplier and are not evaluated", skipped)
    return base


class Metrics(NamedTuple):
    atsr: float
    stsr: float
    altsr: float

    @property
    def scfr(self) -> float:
        return 1.0 - self.atsr


def metrics_from_counts(counts: np.ndarray, sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduce reached-TS counts to (ATSR, STSR, ALTSR).

    ``counts`` has shape ``(..., M)`` over evaluated MSFs only; ``sizes``
    holds their baseline TS counts. Every code path that reports metrics
    goes through here so that results agree to the last bit.
    """
    counts = np.asarray(counts, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise DataError("no evaluable MSFs")
    atsr = (counts / sizes).mean(axis=-1)
    stsr = (counts > 0).mean(axis=-1)
    altsr = (counts == sizes).mean(axis=-1)
    return atsr, stsr, altsr


def compute_metrics(graph: SupplyGraph, removed: Iterable[str], baseline: ReachabilityBaseline) -> Metrics:
    """ATSR, STSR and ALTSR after deleting the firms in ``removed``.

    A removed MSF stays in the average with a reachable fraction of 0.
    """
    gone = np.zeros(graph.n_nodes, dtype=bool)
    for fid in removed:
        gone[graph.index[fid]] = True
    alive = (~gone).astype(np.int8)
    csr = graph.successors_csr
    surviving = sparse.diags(alive) @ csr @ sparse.diags(alive)
    surviving = sparse.csr_matrix(surviving)
    surviving.eliminate_zeros()
    pred = graph.predecessors_csr

    evaluated = baseline.evaluated
    counts = np.zeros(int(evaluated.sum()), dtype=np.int64)
    for slot, (m, tgt) in enumerate(zip(baseline.msf_nodes[evaluated],
                                        (t for t, ok in zip(baseline.targets, evaluated) if ok))):
        if gone[m]:
            continue
        order = csgraph.breadth_first_order(surviving, int(m), directed=True, return_predecessors=False)
        reached = np.zeros(graph.n_nodes, dtype=bool)
        reached[order] = True
        preds = pred.indices[pred.indptr[m]:pred.indptr[m + 1]]
        reached[m] = bool(np.any(reached[preds] & ~gone[preds]))
        counts[slot] = int(np.count_nonzero(reached[tgt] & ~gone[tgt]))
    atsr, stsr, altsr = metrics_from_counts(counts[None, :], baseline.sizes[evaluated])
    return Metrics(float(atsr[0]), float(stsr[0]), float(altsr[0]))
