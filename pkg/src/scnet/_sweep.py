"""Incremental reachability kernel for removal sweeps.

A sweep is replayed backwards: units are restored in reverse removal order,
so reachability only ever grows. Each node carries a bitset of the MSFs
that reach it through at least one edge; restoring a node pulls bits from
its live customers and pushes any gain downstream. Every (node, MSF) bit
is set at most once per sweep.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _gain(bits, own, is_ts, counts, dst, src, n_words):
    changed = False
    for j in range(n_words):
        new = (bits[src, j] | own[src, j]) & ~bits[dst, j]
        if new != np.uint64(0):
            bits[dst, j] |= new
            changed = True
            if is_ts[dst]:
                b = j * 64
                t = new
                while t != np.uint64(0):
                    if t & np.uint64(1):
                        counts[b] += 1
                    t >>= np.uint64(1)
                    b += 1
    return changed


@njit(cache=True, nogil=True)
def sweep_counts(succ_ptr, succ_idx, pred_ptr, pred_idx, own, is_ts,
                 unit_ptr, unit_nodes, restore_order, record_after, n_msf):
    """Reached-TS counts per MSF at each snapshot.

    ``restore_order`` lists unit positions in the order they come back;
    ``record_after`` is an ascending array of restored-unit counts at
    which to snapshot. Returns an ``(len(record_after), n_msf)`` array.
    """
    n = is_ts.shape[0]
    n_words = own.shape[1]
    bits = np.zeros((n, n_words), dtype=np.uint64)
    present = np.zeros(n, dtype=np.bool_)
    in_stack = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    counts = np.zeros(n_msf, dtype=np.int64)
    out = np.zeros((record_after.shape[0], n_msf), dtype=np.int64)

    rec = 0
    while rec < record_after.shape[0] and record_after[rec] == 0:
        out[rec, :] = counts
        rec += 1

    for step in range(restore_order.shape[0]):
        u = restore_order[step]
        lo = unit_ptr[u]
        hi = unit_ptr[u + 1]
        for k in range(lo, hi):
            present[unit_nodes[k]] = True
        top = 0
        for k in range(lo, hi):
            v = unit_nodes[k]
            for e in range(pred_ptr[v], pred_ptr[v + 1]):
                p = pred_idx[e]
                if present[p]:
                    _gain(bits, own, is_ts, counts, v, p, n_words)
            if not in_stack[v]:
                in_stack[v] = True
                stack[top] = v
                top += 1
        while top > 0:
            top -= 1
            x = stack[top]
            in_stack[x] = False
            for e in range(succ_ptr[x], succ_ptr[x + 1]):
                w = succ_idx[e]
                if present[w] and _gain(bits, own, is_ts, counts, w, x, n_words):
                    if not in_stack[w]:
                        in_stack[w] = True
                        stack[top] = w
                        top += 1

        restored = step + 1
        while rec < record_after.shape[0] and record_after[rec] == restored:
            out[rec, :] = counts
            rec += 1
    return out
