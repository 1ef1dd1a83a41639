"""Compiled kernels for composite-graph construction and search.

Everything here operates on flat numpy arrays so numba can compile it:
features (count, m) float64, attrs (count, n) int64, per-level adjacency
(count, cap) int32 with a parallel degree vector. Distances are computed
inline (same arithmetic as hybridann.metrics, which remains the
independent reference path used by the exact oracles).

Determinism: all heap and selection comparisons are lexicographic on
(distance, id), so identical inputs produce identical graphs and search
results bit for bit.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

F_L2 = 0
F_IP = 1

A_MANHATTAN = 0
A_HAMMING = 1
A_NONE = 2  # feature-only graphs: attribute term dropped entirely


@njit(cache=True, nogil=True)
def _dist_q(feats, attrs, qf, qa, j, w, bias, fkind, akind):
    """Fused distance from an external (query) vector pair to node j."""
    m = qf.shape[0]
    if fkind == F_IP:
        acc = 0.0
        for t in range(m):
            acc += feats[j, t] * qf[t]
        g = 1.0 - acc
    else:
        acc = 0.0
        for t in range(m):
            d = feats[j, t] - qf[t]
            acc += d * d
        g = math.sqrt(acc)
    if akind == A_NONE:
        return w * g
    e = 0
    if akind == A_MANHATTAN:
        for t in range(qa.shape[0]):
            diff = attrs[j, t] - qa[t]
            e += diff if diff >= 0 else -diff
    else:
        for t in range(qa.shape[0]):
            if attrs[j, t] != qa[t]:
                e += 1
    if e == 0:
        return w * g
    return w * g + bias - 1.0 / math.log10(e + 1.0)


@njit(cache=True, nogil=True)
def _dist_pp(feats, attrs, i, j, w, bias, fkind, akind):
    """Fused distance between stored nodes i and j."""
    m = feats.shape[1]
    if fkind == F_IP:
        acc = 0.0
        for t in range(m):
            acc += feats[j, t] * feats[i, t]
        g = 1.0 - acc
    else:
        acc = 0.0
        for t in range(m):
            d = feats[j, t] - feats[i, t]
            acc += d * d
        g = math.sqrt(acc)
    if akind == A_NONE:
        return w * g
    e = 0
    if akind == A_MANHATTAN:
        for t in range(attrs.shape[1]):
            diff = attrs[j, t] - attrs[i, t]
            e += diff if diff >= 0 else -diff
    else:
        for t in range(attrs.shape[1]):
            if attrs[j, t] != attrs[i, t]:
                e += 1
    if e == 0:
        return w * g
    return w * g + bias - 1.0 / math.log10(e + 1.0)


# -- binary heaps on parallel (dist, id) arrays, (dist, id) lexicographic --


@njit(cache=True, nogil=True)
def _minheap_push(hd, hi, size, d, i):
    hd[size] = d
    hi[size] = i
    c = size
    while c > 0:
        p = (c - 1) >> 1
        if hd[p] > hd[c] or (hd[p] == hd[c] and hi[p] > hi[c]):
            hd[p], hd[c] = hd[c], hd[p]
            hi[p], hi[c] = hi[c], hi[p]
            c = p
        else:
            break
    return size + 1


@njit(cache=True, nogil=True)
def _minheap_pop(hd, hi, size):
    d = hd[0]
    i = hi[0]
    size -= 1
    hd[0] = hd[size]
    hi[0] = hi[size]
    c = 0
    while True:
        l = 2 * c + 1
        r = l + 1
        s = c
        if l < size and (hd[l] < hd[s] or (hd[l] == hd[s] and hi[l] < hi[s])):
            s = l
        if r < size and (hd[r] < hd[s] or (hd[r] == hd[s] and hi[r] < hi[s])):
            s = r
        if s == c:
            break
        hd[s], hd[c] = hd[c], hd[s]
        hi[s], hi[c] = hi[c], hi[s]
        c = s
    return d, i, size


@njit(cache=True, nogil=True)
def _maxheap_push(hd, hi, size, d, i):
    hd[size] = d
    hi[size] = i
    c = size
    while c > 0:
        p = (c - 1) >> 1
        if hd[p] < hd[c] or (hd[p] == hd[c] and hi[p] < hi[c]):
            hd[p], hd[c] = hd[c], hd[p]
            hi[p], hi[c] = hi[c], hi[p]
            c = p
        else:
            break
    return size + 1


@njit(cache=True, nogil=True)
def _maxheap_pop(hd, hi, size):
    d = hd[0]
    i = hi[0]
    size -= 1
    hd[0] = hd[size]
    hi[0] = hi[size]
    c = 0
    while True:
        l = 2 * c + 1
        r = l + 1
        s = c
        if l < size and (hd[l] > hd[s] or (hd[l] == hd[s] and hi[l] > hi[s])):
            s = l
        if r < size and (hd[r] > hd[s] or (hd[r] == hd[s] and hi[r] > hi[s])):
            s = r
        if s == c:
            break
        hd[s], hd[c] = hd[c], hd[s]
        hi[s], hi[c] = hi[c], hi[s]
        c = s
    return d, i, size


@njit(cache=True, nogil=True)
def _greedy_layer(feats, attrs, adj, deg, qf, qa, cur, cur_d, w, bias, fkind, akind):
    """Steepest-descent walk on one layer; returns the local minimum."""
    while True:
        best = cur
        best_d = cur_d
        for t in range(deg[cur]):
            nb = adj[cur, t]
            nd = _dist_q(feats, attrs, qf, qa, nb, w, bias, fkind, akind)
            if nd < best_d or (nd == best_d and nb < best):
                best_d = nd
                best = nb
        if best == cur:
            return cur, cur_d
        cur = best
        cur_d = best_d


@njit(cache=True, nogil=True)
def _beam_search(
    feats, attrs, adj, deg, qf, qa, ep, ep_d, ef,
    w, bias, fkind, akind, visited, stamp, cd, ci, rd, ri,
):
    """Best-first search of one layer keeping the ef closest nodes.

    cd/ci and rd/ri are caller-provided heap buffers (candidates / result
    set); visited is a stamp array so it never needs clearing. Returns
    the result-heap size; the heap itself holds the ef best (dist, id).
    """
    ncand = 0
    nres = 0
    visited[ep] = stamp
    ncand = _minheap_push(cd, ci, ncand, ep_d, ep)
    nres = _maxheap_push(rd, ri, nres, ep_d, ep)
    while ncand > 0:
        d, c, ncand = _minheap_pop(cd, ci, ncand)
        if nres >= ef and d > rd[0]:
            break
        for t in range(deg[c]):
            nb = adj[c, t]
            if visited[nb] == stamp:
                continue
            visited[nb] = stamp
            nd = _dist_q(feats, attrs, qf, qa, nb, w, bias, fkind, akind)
            if nres < ef:
                ncand = _minheap_push(cd, ci, ncand, nd, nb)
                nres = _maxheap_push(rd, ri, nres, nd, nb)
            elif nd < rd[0] or (nd == rd[0] and nb < ri[0]):
                ncand = _minheap_push(cd, ci, ncand, nd, nb)
                _, _, nres = _maxheap_pop(rd, ri, nres)
                nres = _maxheap_push(rd, ri, nres, nd, nb)
    return nres


@njit(cache=True, nogil=True)
def _drain_sorted(rd, ri, nres, out_d, out_i):
    """Empty a max-heap into out arrays sorted ascending by (dist, id)."""
    total = nres
    while nres > 0:
        d, i, nres = _maxheap_pop(rd, ri, nres)
        out_d[nres] = d
        out_i[nres] = i
    return total


@njit(cache=True, nogil=True)
def _select_heuristic(feats, attrs, cand_d, cand_i, cnt, limit, w, bias, fkind, akind, out_i):
    """Diversity-aware neighbor selection.

    Candidates arrive sorted ascending by distance to the base point.
    A candidate is kept only when it is closer to the base point than to
    every neighbor already kept, which spends list slots on distinct
    directions (and, under the fused metric, on distinct attribute
    clusters) instead of piling into one tight cluster.
    """
    nsel = 0
    for t in range(cnt):
        if nsel == limit:
            break
        dq = cand_d[t]
        e = cand_i[t]
        keep = True
        for r in range(nsel):
            dr = _dist_pp(feats, attrs, e, out_i[r], w, bias, fkind, akind)
            if dr < dq:
                keep = False
                break
        if keep:
            out_i[nsel] = e
            nsel += 1
    return nsel


@njit(cache=True, nogil=True)
def _sort_pairs(d, i, cnt):
    """In-place insertion sort of (d, i) pairs by (d, i) ascending."""
    for a in range(1, cnt):
        dv = d[a]
        iv = i[a]
        b = a - 1
        while b >= 0 and (d[b] > dv or (d[b] == dv and i[b] > iv)):
            d[b + 1] = d[b]
            i[b + 1] = i[b]
            b -= 1
        d[b + 1] = dv
        i[b + 1] = iv


@njit(cache=True, nogil=True)
def _link_with_prune(
    feats, attrs, adj, deg, j, new, cap, w, bias, fkind, akind, tmp_d, tmp_i, sel
):
    """Add edge j -> new; on overflow re-select j's list with the heuristic."""
    dj = deg[j]
    if dj < cap:
        adj[j, dj] = new
        deg[j] = dj + 1
        return
    cnt = 0
    for t in range(dj):
        nb = adj[j, t]
        tmp_d[cnt] = _dist_pp(feats, attrs, j, nb, w, bias, fkind, akind)
        tmp_i[cnt] = nb
        cnt += 1
    tmp_d[cnt] = _dist_pp(feats, attrs, j, new, w, bias, fkind, akind)
    tmp_i[cnt] = new
    cnt += 1
    _sort_pairs(tmp_d, tmp_i, cnt)
    nsel = _select_heuristic(
        feats, attrs, tmp_d, tmp_i, cnt, cap, w, bias, fkind, akind, sel
    )
    for t in range(nsel):
        adj[j, t] = sel[t]
    deg[j] = nsel


@njit(cache=True, nogil=True)
def build_graph(feats, attrs, levels, M, efc, w, bias, fkind, akind):
    """Insert all points in id order; returns the adjacency structure.

    Returns (adj0, deg0, adj_upper, deg_upper, entry, max_level) where
    adj0 is (n, 2M) for the base layer and adj_upper is
    (max_level, n, M) for layers 1..max_level.
    """
    n = feats.shape[0]
    cap0 = 2 * M
    max_level = 0
    for t in range(n):
        if levels[t] > max_level:
            max_level = int(levels[t])
    adj0 = np.full((n, cap0), -1, dtype=np.int32)
    deg0 = np.zeros(n, dtype=np.int32)
    adj_upper = np.full((max_level, n, M), -1, dtype=np.int32)
    deg_upper = np.zeros((max_level, n), dtype=np.int32)

    visited = np.zeros(n, dtype=np.int64)
    stamp = 0
    cd = np.empty(n + 2, dtype=np.float64)
    ci = np.empty(n + 2, dtype=np.int64)
    rd = np.empty(efc + 2, dtype=np.float64)
    ri = np.empty(efc + 2, dtype=np.int64)
    beam_d = np.empty(efc + 2, dtype=np.float64)
    beam_i = np.empty(efc + 2, dtype=np.int64)
    sel = np.empty(cap0 + 2, dtype=np.int64)
    tmp_d = np.empty(cap0 + 2, dtype=np.float64)
    tmp_i = np.empty(cap0 + 2, dtype=np.int64)
    sel2 = np.empty(cap0 + 2, dtype=np.int64)

    entry = 0
    entry_level = int(levels[0])

    for i in range(1, n):
        lvl = int(levels[i])
        qf = feats[i]
        qa = attrs[i]
        cur = entry
        cur_d = _dist_q(feats, attrs, qf, qa, cur, w, bias, fkind, akind)
        lv = entry_level
        while lv > lvl:
            cur, cur_d = _greedy_layer(
                feats, attrs, adj_upper[lv - 1], deg_upper[lv - 1],
                qf, qa, cur, cur_d, w, bias, fkind, akind,
            )
            lv -= 1
        start = lvl if lvl < entry_level else entry_level
        for lev in range(start, -1, -1):
            stamp += 1
            if lev == 0:
                nres = _beam_search(
                    feats, attrs, adj0, deg0, qf, qa, cur, cur_d, efc,
                    w, bias, fkind, akind, visited, stamp, cd, ci, rd, ri,
                )
            else:
                nres = _beam_search(
                    feats, attrs, adj_upper[lev - 1], deg_upper[lev - 1],
                    qf, qa, cur, cur_d, efc,
                    w, bias, fkind, akind, visited, stamp, cd, ci, rd, ri,
                )
            cnt = _drain_sorted(rd, ri, nres, beam_d, beam_i)
            nsel = _select_heuristic(
                feats, attrs, beam_d, beam_i, cnt, M, w, bias, fkind, akind, sel
            )
            cap = cap0 if lev == 0 else M
            if lev == 0:
                for t in range(nsel):
                    adj0[i, t] = sel[t]
                deg0[i] = nsel
                for t in range(nsel):
                    _link_with_prune(
                        feats, attrs, adj0, deg0, sel[t], i, cap,
                        w, bias, fkind, akind, tmp_d, tmp_i, sel2,
                    )
            else:
                for t in range(nsel):
                    adj_upper[lev - 1, i, t] = sel[t]
                deg_upper[lev - 1, i] = nsel
                for t in range(nsel):
                    _link_with_prune(
                        feats, attrs, adj_upper[lev - 1], deg_upper[lev - 1],
                        sel[t], i, cap,
                        w, bias, fkind, akind, tmp_d, tmp_i, sel2,
                    )
            cur = beam_i[0]
            cur_d = beam_d[0]
        if lvl > entry_level:
            entry = i
            entry_level = lvl
    return adj0, deg0, adj_upper, deg_upper, entry, entry_level


@njit(cache=True, nogil=True)
def search_graph(
    feats, attrs, adj0, deg0, adj_upper, deg_upper, entry, max_level,
    qf, qa, k, ef, w, bias, fkind, akind,
):
    """Greedy descent through the upper layers, then an ef-wide beam at
    the base layer; returns the k best (ids, dists) ascending."""
    n = feats.shape[0]
    visited = np.zeros(n, dtype=np.int64)
    cd = np.empty(n + 2, dtype=np.float64)
    ci = np.empty(n + 2, dtype=np.int64)
    rd = np.empty(ef + 2, dtype=np.float64)
    ri = np.empty(ef + 2, dtype=np.int64)
    cur = entry
    cur_d = _dist_q(feats, attrs, qf, qa, cur, w, bias, fkind, akind)
    for lv in range(max_level, 0, -1):
        cur, cur_d = _greedy_layer(
            feats, attrs, adj_upper[lv - 1], deg_upper[lv - 1],
            qf, qa, cur, cur_d, w, bias, fkind, akind,
        )
    nres = _beam_search(
        feats, attrs, adj0, deg0, qf, qa, cur, cur_d, ef,
        w, bias, fkind, akind, visited, 1, cd, ci, rd, ri,
    )
    out_d = np.empty(nres, dtype=np.float64)
    out_i = np.empty(nres, dtype=np.int64)
    _drain_sorted(rd, ri, nres, out_d, out_i)
    kk = k if k < nres else nres
    return out_i[:kk].copy(), out_d[:kk].copy()
