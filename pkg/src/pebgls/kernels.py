"""Compiled inner loops for tour evaluation, 2-opt descent and penalization.

Everything here works on plain numpy arrays owned by exactly one worker, so
the kernels run with the GIL released. Distances come either from a
triangular int32 memo (small instances) or straight from coordinates.
Penalties live in a triangular int32 array for small instances and in a
typed dict keyed by the packed city pair above the memo cap.
"""
from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict

# edge weight kind codes (mirrors tsplib.KIND_CODES)
KIND_EUC_2D = 0
KIND_CEIL_2D = 1
KIND_ATT = 2


def new_penalty_map():
    """Empty typed dict for sparse penalty storage (packed pair -> count)."""
    return Dict.empty(key_type=types.int64, value_type=types.int64)


@njit(cache=True, nogil=True, inline="always")
def _coord_cost(coords, kind, a, b):
    xd = coords[a, 0] - coords[b, 0]
    yd = coords[a, 1] - coords[b, 1]
    if kind == KIND_EUC_2D:
        return np.int64(np.sqrt(xd * xd + yd * yd) + 0.5)
    elif kind == KIND_CEIL_2D:
        return np.int64(np.ceil(np.sqrt(xd * xd + yd * yd)))
    else:
        r = np.sqrt((xd * xd + yd * yd) / 10.0)
        t = np.int64(r + 0.5)
        if t < r:
            return t + 1
        return t


@njit(cache=True, nogil=True, inline="always")
def _tri_index(a, b):
    # requires a > b
    return np.int64(a) * (np.int64(a) - 1) // 2 + np.int64(b)


@njit(cache=True, nogil=True, inline="always")
def _cost(coords, kind, tri, a, b):
    if tri.size > 0:
        if a > b:
            return np.int64(tri[_tri_index(a, b)])
        return np.int64(tri[_tri_index(b, a)])
    return _coord_cost(coords, kind, a, b)


@njit(cache=True, nogil=True, inline="always")
def _pair_key(a, b):
    if a > b:
        return (np.int64(a) << 32) | np.int64(b)
    return (np.int64(b) << 32) | np.int64(a)


@njit(cache=True, nogil=True, inline="always")
def _pen_get(pen_tri, pen_map, a, b):
    if pen_tri.size > 0:
        if a > b:
            return np.int64(pen_tri[_tri_index(a, b)])
        return np.int64(pen_tri[_tri_index(b, a)])
    return pen_map.get(_pair_key(a, b), np.int64(0))


@njit(cache=True, nogil=True, inline="always")
def _pen_inc(pen_tri, pen_map, a, b):
    if pen_tri.size > 0:
        if a > b:
            pen_tri[_tri_index(a, b)] += 1
        else:
            pen_tri[_tri_index(b, a)] += 1
    else:
        key = _pair_key(a, b)
        pen_map[key] = pen_map.get(key, np.int64(0)) + 1


@njit(cache=True, nogil=True)
def build_cost_triangle(coords, kind):
    n = coords.shape[0]
    tri = np.empty(n * (n - 1) // 2, dtype=np.int32)
    for a in range(1, n):
        base = a * (a - 1) // 2
        for b in range(a):
            tri[base + b] = _coord_cost(coords, kind, a, b)
    return tri


@njit(cache=True, nogil=True)
def build_neighbor_lists(coords, kind, tri, k):
    """k nearest cities per city, ascending (cost, index)."""
    n = coords.shape[0]
    kk = min(k, n - 1)
    nl = np.empty((n, kk), dtype=np.int32)
    cand_cost = np.empty(kk, dtype=np.int64)
    cand_city = np.empty(kk, dtype=np.int32)
    for c in range(n):
        filled = 0
        for x in range(n):
            if x == c:
                continue
            d = _cost(coords, kind, tri, c, x)
            if filled == kk and (d > cand_cost[filled - 1] or
                                 (d == cand_cost[filled - 1] and x > cand_city[filled - 1])):
                continue
            # insertion position by (cost, index)
            i = filled if filled < kk else kk - 1
            while i > 0 and (cand_cost[i - 1] > d or
                             (cand_cost[i - 1] == d and cand_city[i - 1] > x)):
                cand_cost[i] = cand_cost[i - 1]
                cand_city[i] = cand_city[i - 1]
                i -= 1
            cand_cost[i] = d
            cand_city[i] = x
            if filled < kk:
                filled += 1
        nl[c, :] = cand_city[:kk]
    return nl


@njit(cache=True, nogil=True)
def tour_cost(order, coords, kind, tri):
    n = order.shape[0]
    total = np.int64(0)
    for i in range(n):
        a = order[i]
        b = order[(i + 1) % n]
        total += _cost(coords, kind, tri, a, b)
    return total


@njit(cache=True, nogil=True)
def move_delta(order, pos, i, j, coords, kind, tri, pen_tri, pen_map, lam):
    """Cost and guide-cost change of the 2-opt move cutting tour edges i and j."""
    n = order.shape[0]
    a = order[i]
    an = order[(i + 1) % n]
    b = order[j]
    bn = order[(j + 1) % n]
    dg = (_cost(coords, kind, tri, a, b) + _cost(coords, kind, tri, an, bn)
          - _cost(coords, kind, tri, a, an) - _cost(coords, kind, tri, b, bn))
    dp = (_pen_get(pen_tri, pen_map, a, b) + _pen_get(pen_tri, pen_map, an, bn)
          - _pen_get(pen_tri, pen_map, a, an) - _pen_get(pen_tri, pen_map, b, bn))
    return dg, dg + lam * dp


@njit(cache=True, nogil=True)
def apply_move(order, pos, i, j):
    """Reverse the segment between cut positions i and j (shorter arc)."""
    n = order.shape[0]
    if i > j:
        i, j = j, i
    inner = j - i
    if inner <= n - inner:
        lo = i + 1
        hi = j
        while lo < hi:
            a = order[lo]
            b = order[hi]
            order[lo] = b
            order[hi] = a
            pos[b] = lo
            pos[a] = hi
            lo += 1
            hi -= 1
    else:
        lo = j + 1
        hi = i + n
        while lo < hi:
            li = lo % n
            hi_i = hi % n
            a = order[li]
            b = order[hi_i]
            order[li] = b
            order[hi_i] = a
            pos[b] = li
            pos[a] = hi_i
            lo += 1
            hi -= 1


@njit(cache=True, nogil=True)
def _try_city(c, order, pos, bits, nl, coords, kind, tri, pen_tri, pen_map, lam):
    """First improving 2-opt move around city c in fixed scan order.

    Returns (applied, cost_delta). On success the move is applied and the
    four endpoint bits are set.
    """
    n = order.shape[0]
    k = nl.shape[1]
    pc = pos[c]
    cn = order[(pc + 1) % n]
    cp = order[(pc - 1) % n]
    d_c_cn = _cost(coords, kind, tri, c, cn)
    d_cp_c = _cost(coords, kind, tri, cp, c)
    for t in range(k):
        x = nl[c, t]
        if x == c:
            continue
        d_c_x = _cost(coords, kind, tri, c, x)
        # forward: drop (c,cn) and (x,xn), add (c,x) and (cn,xn)
        if x != cn:
            xn = order[(pos[x] + 1) % n]
            if xn != c:
                dg = (d_c_x + _cost(coords, kind, tri, cn, xn)
                      - d_c_cn - _cost(coords, kind, tri, x, xn))
                dh = np.float64(dg)
                if lam > 0.0:
                    dh += lam * (_pen_get(pen_tri, pen_map, c, x)
                                 + _pen_get(pen_tri, pen_map, cn, xn)
                                 - _pen_get(pen_tri, pen_map, c, cn)
                                 - _pen_get(pen_tri, pen_map, x, xn))
                if dh < 0.0:
                    apply_move(order, pos, pos[c], pos[x])
                    bits[c] = 1
                    bits[cn] = 1
                    bits[x] = 1
                    bits[xn] = 1
                    return True, dg
        # backward: drop (cp,c) and (xp,x), add (c,x) and (cp,xp)
        if x != cp:
            xp = order[(pos[x] - 1) % n]
            if xp != c:
                dg = (d_c_x + _cost(coords, kind, tri, cp, xp)
                      - d_cp_c - _cost(coords, kind, tri, xp, x))
                dh = np.float64(dg)
                if lam > 0.0:
                    dh += lam * (_pen_get(pen_tri, pen_map, c, x)
                                 + _pen_get(pen_tri, pen_map, cp, xp)
                                 - _pen_get(pen_tri, pen_map, cp, c)
                                 - _pen_get(pen_tri, pen_map, xp, x))
                if dh < 0.0:
                    apply_move(order, pos, pos[cp], pos[xp])
                    bits[c] = 1
                    bits[cp] = 1
                    bits[x] = 1
                    bits[xp] = 1
                    return True, dg
    return False, np.int64(0)


@njit(cache=True, nogil=True)
def descend(order, pos, cost_box, bits, nl, coords, kind, tri, pen_tri, pen_map,
            lam, best_order, best_box, imp_costs):
    """2-opt descent on the guide cost, restricted to active cities.

    Scans cities in ascending index; at an active city, applies
    first-improvement moves until none remains, then clears its bit.
    Every tour whose plain cost beats the historical best is copied into
    best_order and its cost appended to imp_costs.

    Returns (number of best-cost improvements, number of applied moves).
    """
    n = order.shape[0]
    cost = cost_box[0]
    n_imp = 0
    n_moves = 0
    cap = imp_costs.shape[0]
    if cost < best_box[0]:
        best_box[0] = cost
        best_order[:] = order
        if n_imp < cap:
            imp_costs[n_imp] = cost
        n_imp += 1
    made_any = True
    while made_any:
        made_any = False
        for c in range(n):
            if bits[c] == 0:
                continue
            while True:
                applied, dg = _try_city(c, order, pos, bits, nl, coords, kind,
                                        tri, pen_tri, pen_map, lam)
                if not applied:
                    break
                made_any = True
                n_moves += 1
                cost += dg
                if cost < best_box[0]:
                    best_box[0] = cost
                    best_order[:] = order
                    if n_imp < cap:
                        imp_costs[n_imp] = cost
                    n_imp += 1
            bits[c] = 0
    cost_box[0] = cost
    return n_imp, n_moves


@njit(cache=True, nogil=True)
def penalize(order, coords, kind, tri, pen_tri, pen_map, w, elite_next, bits,
             utils, out_edges):
    """Increment the penalty of every maximum-utility tour edge.

    Utility of tour edge e is cost(e)/(1+penalty(e)), multiplied by w when
    an elite tour is set (elite_next[0] >= 0) and e is not one of its
    edges. Endpoint bits of penalized edges are set. Returns the number
    of penalized edges, written to out_edges.
    """
    n = order.shape[0]
    elite_mode = elite_next[0] >= 0
    max_u = 0.0
    for t in range(n):
        a = order[t]
        b = order[(t + 1) % n]
        cst = _cost(coords, kind, tri, a, b)
        p = _pen_get(pen_tri, pen_map, a, b)
        u = cst / (1.0 + p)
        if elite_mode and not (elite_next[a] == b or elite_next[b] == a):
            u *= w
        utils[t] = u
        if u > max_u:
            max_u = u
    thr = max_u * (1.0 - 1e-12)
    cnt = 0
    for t in range(n):
        if utils[t] >= thr:
            a = order[t]
            b = order[(t + 1) % n]
            _pen_inc(pen_tri, pen_map, a, b)
            bits[a] = 1
            bits[b] = 1
            out_edges[cnt, 0] = a
            out_edges[cnt, 1] = b
            cnt += 1
    return cnt


@njit(cache=True, nogil=True)
def gls_iteration(order, pos, cost_box, bits, nl, coords, kind, tri, pen_tri,
                  pen_map, lam, w, elite_next, best_order, best_box, imp_costs,
                  utils, out_edges):
    """One guided-local-search iteration: descent to a local optimum, then
    penalization. Returns (improvements, moves, penalized edge count)."""
    n_imp, n_moves = descend(order, pos, cost_box, bits, nl, coords, kind, tri,
                             pen_tri, pen_map, lam, best_order, best_box,
                             imp_costs)
    n_pen = penalize(order, coords, kind, tri, pen_tri, pen_map, w, elite_next,
                     bits, utils, out_edges)
    return n_imp, n_moves, n_pen


def warmup():
    """Compile the kernels on a toy instance (call before timing anything)."""
    coords = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0], [0.0, 4.0], [1.0, 2.0]])
    tri = build_cost_triangle(coords, KIND_EUC_2D)
    nl = build_neighbor_lists(coords, KIND_EUC_2D, tri, 4)
    n = 5
    order = np.arange(n, dtype=np.int32)
    pos = np.arange(n, dtype=np.int32)
    cost_box = np.array([tour_cost(order, coords, KIND_EUC_2D, tri)], dtype=np.int64)
    bits = np.ones(n, dtype=np.uint8)
    pen_tri = np.zeros(n * (n - 1) // 2, dtype=np.int32)
    pen_map = new_penalty_map()
    best_order = order.copy()
    best_box = np.array([np.iinfo(np.int64).max], dtype=np.int64)
    imp = np.empty(8 * n, dtype=np.int64)
    utils = np.empty(n, dtype=np.float64)
    out_edges = np.empty((n, 2), dtype=np.int32)
    elite_none = np.full(n, -1, dtype=np.int32)
    gls_iteration(order, pos, cost_box, bits, nl, coords, KIND_EUC_2D, tri,
                  pen_tri, pen_map, 0.0, 1.0, elite_none, best_order, best_box,
                  imp, utils, out_edges)
    move_delta(order, pos, 0, 2, coords, KIND_EUC_2D, tri, pen_tri, pen_map, 0.5)
    # compile the sparse-penalty variant too
    empty_tri = np.empty(0, dtype=np.int32)
    bits[:] = 1
    descend(order, pos, cost_box, bits, nl, coords, KIND_EUC_2D, empty_tri,
            empty_tri.astype(np.int32), pen_map, 0.5, best_order, best_box, imp)
