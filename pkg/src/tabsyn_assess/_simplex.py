"""Primal network simplex for the balanced transportation problem.

Sources ``0..n-1`` and sinks ``n..n+m-1`` are joined by uncapacitated arcs
``i -> n+j`` with cost ``C[i, j]``. An artificial root ``n+m`` carries the
initial feasible tree (big-M arcs ``i -> root`` and ``root -> n+j``). The tree
is kept strongly feasible and the leaving arc is the last blocking arc met
when walking the pivot cycle from its apex, which rules out cycling on
degenerate pivots.

The spanning tree is stored as parent pointers plus a depth-first thread
(``nxt``/``prv``), subtree sizes and last descendants, so a pivot only touches
the subtree that moves.

Arc ids: ``i*m + j`` for transport arcs, ``nm + i`` for source artificials,
``nm + n + j`` for sink artificials.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True, inline="always")
def _tail(e, n, m, nm):
    if e < nm:
        return e // m
    if e < nm + n:
        return e - nm
    return n + m


@numba.njit(cache=True, nogil=True, inline="always")
def _head(e, n, m, nm):
    if e < nm:
        return n + e % m
    if e < nm + n:
        return n + m
    return n + (e - nm - n)


@numba.njit(cache=True, nogil=True)
def network_simplex(a, b, C, max_iter):
    """Return ``(plan, n_pivots, status)``; status 0 optimal, 1 iteration cap, 2 internal error."""
    n = a.shape[0]
    m = b.shape[0]
    nm = n * m
    N = n + m + 1
    root = n + m
    n_arcs = nm + n + m
    cmax = 0.0
    for i in range(n):
        for j in range(m):
            if C[i, j] > cmax:
                cmax = C[i, j]
    big = 1.0 + (n + m) * cmax
    eps = 1e-13 * big

    flow = np.zeros(n_arcs)
    parent = np.empty(N, dtype=np.int64)
    pred = np.empty(N, dtype=np.int64)
    size = np.empty(N, dtype=np.int64)
    nxt = np.empty(N, dtype=np.int64)
    prv = np.empty(N, dtype=np.int64)
    last = np.empty(N, dtype=np.int64)
    pi = np.empty(N)
    path_q = np.empty(N, dtype=np.int64)
    path_p = np.empty(N, dtype=np.int64)
    anc = np.empty(N, dtype=np.int64)

    # star tree on the root; thread root -> 0 -> 1 -> ... -> n+m-1 -> root
    for v in range(n + m):
        parent[v] = root
        size[v] = 1
        last[v] = v
        nxt[v] = v + 1
        prv[v] = v - 1
    nxt[n + m - 1] = root
    prv[0] = root
    parent[root] = -1
    pred[root] = -1
    size[root] = N
    last[root] = n + m - 1
    nxt[root] = 0
    prv[root] = n + m - 1
    pi[root] = 0.0
    for i in range(n):
        pred[i] = nm + i
        flow[nm + i] = a[i]
        pi[i] = -big
    for j in range(m):
        pred[n + j] = nm + n + j
        flow[nm + n + j] = b[j]
        pi[n + j] = big

    block = max(int(np.sqrt(nm)), min(nm, 64))
    cursor = 0
    it = 0
    status = 0
    while True:
        # block-search pricing over transport arcs
        best = -eps
        enter = -1
        count = 0
        for _ in range(nm):
            e = cursor
            cursor += 1
            if cursor == nm:
                cursor = 0
            i = e // m
            j = e - i * m
            rc = C[i, j] + pi[i] - pi[n + j]
            if rc < best:
                best = rc
                enter = e
            count += 1
            if count == block:
                if enter >= 0:
                    break
                count = 0
        if enter < 0:
            break
        if it >= max_iter:
            status = 1
            break
        it += 1

        p = enter // m
        q = n + enter % m
        # apex via subtree sizes, which strictly grow towards the root
        u = p
        v = q
        su = size[u]
        sv = size[v]
        while u != v:
            if su < sv:
                u = parent[u]
                su = size[u]
            elif sv < su:
                v = parent[v]
                sv = size[v]
            else:
                u = parent[u]
                su = size[u]
                v = parent[v]
                sv = size[v]
        apex = u

        nq = 0
        x = q
        while x != apex:
            path_q[nq] = x
            nq += 1
            x = parent[x]
        npp = 0
        x = p
        while x != apex:
            path_p[npp] = x
            npp += 1
            x = parent[x]

        # q side is walked child -> parent, p side parent -> child
        theta = np.inf
        for k in range(nq):
            x = path_q[k]
            e = pred[x]
            if _tail(e, n, m, nm) != x and flow[e] < theta:
                theta = flow[e]
        for k in range(npp):
            x = path_p[k]
            e = pred[x]
            if _head(e, n, m, nm) != x and flow[e] < theta:
                theta = flow[e]

        # last blocking arc in cycle order starting from the apex
        t = -1
        on_q = True
        for k in range(nq):
            x = path_q[k]
            e = pred[x]
            if _tail(e, n, m, nm) != x and flow[e] == theta:
                t = x
        if t < 0:
            on_q = False
            for k in range(npp):
                x = path_p[k]
                e = pred[x]
                if _head(e, n, m, nm) != x and flow[e] == theta:
                    t = x
                    break
        if t < 0:
            status = 2
            break
        leave = pred[t]

        if theta > 0.0:
            flow[enter] += theta
            for k in range(nq):
                x = path_q[k]
                e = pred[x]
                if _tail(e, n, m, nm) == x:
                    flow[e] += theta
                else:
                    flow[e] -= theta
            for k in range(npp):
                x = path_p[k]
                e = pred[x]
                if _head(e, n, m, nm) == x:
                    flow[e] += theta
                else:
                    flow[e] -= theta
        flow[leave] = 0.0

        # detach the subtree rooted at t
        s = parent[t]
        size_t = size[t]
        prev_t = prv[t]
        last_t = last[t]
        next_last_t = nxt[last_t]
        parent[t] = -1
        pred[t] = -1
        nxt[prev_t] = next_last_t
        prv[next_last_t] = prev_t
        nxt[last_t] = t
        prv[t] = last_t
        while s != -1:
            size[s] -= size_t
            if last[s] == last_t:
                last[s] = prev_t
            s = parent[s]

        # the entering endpoint inside the detached part becomes its root
        if on_q:
            r = q
            other = p
        else:
            r = p
            other = q
        na = 0
        x = r
        while x != -1:
            anc[na] = x
            na += 1
            x = parent[x]
        for k in range(na - 1, 0, -1):
            pp = anc[k]
            qq = anc[k - 1]
            size_p = size[pp]
            last_p = last[pp]
            prev_q = prv[qq]
            last_q = last[qq]
            next_last_q = nxt[last_q]
            parent[pp] = qq
            parent[qq] = -1
            pred[pp] = pred[qq]
            pred[qq] = -1
            size[pp] = size_p - size[qq]
            size[qq] = size_p
            nxt[prev_q] = next_last_q
            prv[next_last_q] = prev_q
            nxt[last_q] = qq
            prv[qq] = last_q
            if last_p == last_q:
                last[pp] = prev_q
                last_p = prev_q
            prv[pp] = last_q
            nxt[last_q] = pp
            nxt[last_p] = qq
            prv[qq] = last_p
            last[qq] = last_p

        # hang r below other through the entering arc
        last_o = last[other]
        next_last_o = nxt[last_o]
        size_r = size[r]
        last_r = last[r]
        parent[r] = other
        pred[r] = enter
        nxt[last_o] = r
        prv[r] = last_o
        prv[next_last_o] = last_r
        nxt[last_r] = next_last_o
        x = other
        while x != -1:
            size[x] += size_r
            if last[x] == last_o:
                last[x] = last_r
            x = parent[x]

        # shift potentials of the moved subtree so the entering arc has zero reduced cost
        c = C[p, q - n]
        if other == p:
            delta = pi[p] + c - pi[q]
        else:
            delta = pi[q] - c - pi[p]
        x = r
        while True:
            pi[x] += delta
            if x == last_r:
                break
            x = nxt[x]

    plan = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            f = flow[i * m + j]
            plan[i, j] = f if f > 0.0 else 0.0
    return plan, it, status
