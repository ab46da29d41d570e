"""Primal network simplex for balanced transportation problems.

Spanning-tree bookkeeping (parent, thread, successor counts) follows the
classic strongly-feasible-tree scheme: the leaving arc is the last blocking
arc met when walking the cycle from the join node, which rules out cycling
under degeneracy. Pricing scans blocks of about sqrt(#arcs) arcs.
"""

import math

import numba
import numpy as np

_UP = 1
_DOWN = -1


@numba.njit(cache=True, nogil=True)
def network_simplex(supply, demand, cost, rel_tol):
    m = supply.shape[0]
    n = demand.shape[0]
    nn = m + n
    root = nn
    narc = m * n
    total_arcs = narc + nn

    source = np.empty(total_arcs, dtype=np.int64)
    target = np.empty(total_arcs, dtype=np.int64)
    acost = np.empty(total_arcs)
    flow = np.zeros(total_arcs, dtype=np.int64)
    state = np.ones(total_arcs, dtype=np.int8)

    cmax = 0.0
    e = 0
    for i in range(m):
        for j in range(n):
            source[e] = i
            target[e] = m + j
            c = cost[i, j]
            acost[e] = c
            if c > cmax:
                cmax = c
            e += 1
    tol = rel_tol * max(cmax, 1.0)
    art_cost = (cmax + 1.0) * (nn + 1)

    parent = np.empty(nn + 1, dtype=np.int64)
    pred = np.empty(nn + 1, dtype=np.int64)
    pred_dir = np.zeros(nn + 1, dtype=np.int64)
    thread = np.empty(nn + 1, dtype=np.int64)
    rev_thread = np.empty(nn + 1, dtype=np.int64)
    succ_num = np.empty(nn + 1, dtype=np.int64)
    last_succ = np.empty(nn + 1, dtype=np.int64)
    pi = np.zeros(nn + 1)
    dirty = np.empty(nn + 1, dtype=np.int64)

    parent[root] = -1
    pred[root] = -1
    thread[root] = 0
    rev_thread[0] = root
    succ_num[root] = nn + 1
    last_succ[root] = root - 1
    for u in range(nn):
        e = narc + u
        parent[u] = root
        pred[u] = e
        thread[u] = u + 1
        rev_thread[u + 1] = u
        succ_num[u] = 1
        last_succ[u] = u
        state[e] = 0
        if u < m:
            pred_dir[u] = _UP
            source[e] = u
            target[e] = root
            flow[e] = supply[u]
            acost[e] = 0.0
            pi[u] = 0.0
        else:
            pred_dir[u] = _DOWN
            source[e] = root
            target[e] = u
            flow[e] = demand[u - m]
            acost[e] = art_cost
            pi[u] = art_cost

    block = max(int(math.sqrt(narc)), 10)
    next_arc = 0
    INF = np.iinfo(np.int64).max

    while True:
        # block search pricing
        in_arc = -1
        best = -tol
        cnt = block
        e = next_arc
        for _ in range(narc):
            if state[e] == 1:
                c = acost[e] + pi[source[e]] - pi[target[e]]
                if c < best:
                    best = c
                    in_arc = e
            e += 1
            if e == narc:
                e = 0
            cnt -= 1
            if cnt == 0:
                if in_arc >= 0:
                    break
                cnt = block
        if in_arc < 0:
            break
        next_arc = e

        # join node
        u = source[in_arc]
        v = target[in_arc]
        while u != v:
            if succ_num[u] < succ_num[v]:
                u = parent[u]
            else:
                v = parent[v]
        join = u

        # leaving arc; in_arc is at its lower bound
        first = source[in_arc]
        second = target[in_arc]
        delta = INF
        u_out = -1
        result = 0
        u = first
        while u != join:
            d = flow[pred[u]] if pred_dir[u] == _UP else INF
            if d < delta:
                delta = d
                u_out = u
                result = 1
            u = parent[u]
        u = second
        while u != join:
            d = flow[pred[u]] if pred_dir[u] == _DOWN else INF
            if d <= delta:
                delta = d
                u_out = u
                result = 2
            u = parent[u]
        if result == 0:
            # unbounded; impossible with nonnegative costs
            return flow[:narc], False
        if result == 1:
            u_in = first
            v_in = second
        else:
            u_in = second
            v_in = first

        # change flow
        if delta > 0:
            flow[in_arc] += delta
            u = source[in_arc]
            while u != join:
                flow[pred[u]] -= pred_dir[u] * delta
                u = parent[u]
            u = target[in_arc]
            while u != join:
                flow[pred[u]] += pred_dir[u] * delta
                u = parent[u]
        state[in_arc] = 0
        state[pred[u_out]] = 1

        # update tree structure
        old_rev_thread = rev_thread[u_out]
        old_succ_num = succ_num[u_out]
        old_last_succ = last_succ[u_out]
        v_out = parent[u_out]

        if u_in == u_out:
            parent[u_in] = v_in
            pred[u_in] = in_arc
            pred_dir[u_in] = _UP if u_in == source[in_arc] else _DOWN
            if thread[v_in] != u_out:
                after = thread[old_last_succ]
                thread[old_rev_thread] = after
                rev_thread[after] = old_rev_thread
                after = thread[v_in]
                thread[v_in] = u_out
                rev_thread[u_out] = v_in
                thread[old_last_succ] = after
                rev_thread[after] = old_last_succ
        else:
            if old_rev_thread == v_in:
                thread_continue = thread[old_last_succ]
            else:
                thread_continue = thread[v_in]
            stem = u_in
            par_stem = v_in
            last = last_succ[u_in]
            after = thread[last]
            thread[v_in] = u_in
            ndirty = 0
            dirty[ndirty] = v_in
            ndirty += 1
            while stem != u_out:
                next_stem = parent[stem]
                thread[last] = next_stem
                dirty[ndirty] = last
                ndirty += 1
                before = rev_thread[stem]
                thread[before] = after
                rev_thread[after] = before
                parent[stem] = par_stem
                par_stem = stem
                stem = next_stem
                if last_succ[stem] == last_succ[par_stem]:
                    last = rev_thread[par_stem]
                else:
                    last = last_succ[stem]
                after = thread[last]
            parent[u_out] = par_stem
            thread[last] = thread_continue
            rev_thread[thread_continue] = last
            last_succ[u_out] = last
            if old_rev_thread != v_in:
                thread[old_rev_thread] = after
                rev_thread[after] = old_rev_thread
            for k in range(ndirty):
                w = dirty[k]
                rev_thread[thread[w]] = w
            tmp_sc = 0
            tmp_ls = last_succ[u_out]
            u = u_out
            p = parent[u]
            while u != u_in:
                pred[u] = pred[p]
                pred_dir[u] = -pred_dir[p]
                tmp_sc += succ_num[u] - succ_num[p]
                succ_num[u] = tmp_sc
                last_succ[p] = tmp_ls
                u = p
                p = parent[u]
            pred[u_in] = in_arc
            pred_dir[u_in] = _UP if u_in == source[in_arc] else _DOWN
            succ_num[u_in] = old_succ_num

        up_limit_out = join if last_succ[join] == v_in else -1
        last_succ_out = last_succ[u_out]
        u = v_in
        while u != -1 and last_succ[u] == v_in:
            last_succ[u] = last_succ_out
            u = parent[u]
        if join != old_rev_thread and v_in != old_rev_thread:
            u = v_out
            while u != up_limit_out and last_succ[u] == old_last_succ:
                last_succ[u] = old_rev_thread
                u = parent[u]
        elif last_succ_out != old_last_succ:
            u = v_out
            while u != up_limit_out and last_succ[u] == old_last_succ:
                last_succ[u] = last_succ_out
                u = parent[u]
        u = v_in
        while u != join:
            succ_num[u] += old_succ_num
            u = parent[u]
        u = v_out
        while u != join:
            succ_num[u] -= old_succ_num
            u = parent[u]

        # update potentials on the subtree of u_in
        sigma = pi[v_in] - pi[u_in] - pred_dir[u_in] * acost[in_arc]
        end = thread[last_succ[u_in]]
        u = u_in
        while u != end:
            pi[u] += sigma
            u = thread[u]

    for k in range(nn):
        if flow[narc + k] != 0:
            return flow[:narc], False
    return flow[:narc], True
