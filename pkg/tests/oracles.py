"""Independent brute-force references used by the tests.

Nothing here touches scipy.sparse or the sweep kernel: reachability is a
dense Warshall closure, PageRank is a direct linear solve.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction

import numpy as np


def adjacency(n, edges):
    a = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        if u != v:
            a[u, v] = True
    return a


def closure(a):
    """Paths of length >= 1 (Warshall)."""
    r = a.copy()
    for k in range(len(r)):
        r |= np.outer(r[:, k], r[k, :])
    return r


def terminal_suppliers(n, edges):
    r = closure(adjacency(n, edges))
    ts = set()
    for v in range(n):
        if all(r[u, v] for u in range(n) if r[v, u] and u != v):
            ts.add(v)
    return ts


def tiers(n, edges, msfs):
    succ = [[] for _ in range(n)]
    for u, v in edges:
        if u != v:
            succ[u].append(v)
    dist = {m: 0 for m in msfs}
    q = deque(msfs)
    while q:
        u = q.popleft()
        for v in succ[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def metrics(n, edges, msfs, removed):
    """Exact (atsr, stsr, altsr) as Fractions, or None with no evaluable MSF."""
    full = closure(adjacency(n, edges))
    ts = terminal_suppliers(n, edges)
    alive = [v not in removed for v in range(n)]
    live_edges = [(u, v) for u, v in edges if alive[u] and alive[v]]
    live = closure(adjacency(n, live_edges))
    fracs = []
    for m in msfs:
        base = [t for t in ts if full[m, t]]
        if not base:
            continue
        if m in removed:
            fracs.append(Fraction(0))
            continue
        hit = sum(1 for t in base if alive[t] and live[m, t])
        fracs.append(Fraction(hit, len(base)))
    if not fracs:
        return None
    k = len(fracs)
    return (sum(fracs) / k, Fraction(sum(f > 0 for f in fracs), k), Fraction(sum(f == 1 for f in fracs), k))


def pagerank_dense(n, edges, damping=0.85):
    """Solve x = d (P^T x + dangling share) + (1-d)/n with sum(x) = 1 directly."""
    a = adjacency(n, edges).astype(float)
    out = a.sum(axis=1)
    m = np.zeros((n, n))
    for u in range(n):
        if out[u] > 0:
            m[:, u] = a[u] / out[u]
        else:
            m[:, u] = 1.0 / n
    lhs = np.eye(n) - damping * m
    rhs = np.full(n, (1.0 - damping) / n)
    x = np.linalg.solve(lhs, rhs)
    return x / x.sum()
