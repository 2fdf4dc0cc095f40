"""Compiled network simplex core (numba). Same algorithm as the pure-Python path."""

import numpy as np
from numba import njit


@njit(cache=True)
def _arc_cost(C, m, x, y):
    if x < m:
        return C[x, y - m]
    return C[y, x - m]


@njit(cache=True)
def _hang(top, up, d, adj, deg, parent, depth, pot, C, m, queue):
    parent[top] = up
    depth[top] = d
    if up >= 0:
        pot[top] = _arc_cost(C, m, top, up) - pot[up]
    head = 0
    tail = 1
    queue[0] = top
    while head < tail:
        node = queue[head]
        head += 1
        for k in range(deg[node]):
            nb = adj[node, k]
            if nb == parent[node]:
                continue
            parent[nb] = node
            depth[nb] = depth[node] + 1
            pot[nb] = _arc_cost(C, m, node, nb) - pot[node]
            queue[tail] = nb
            tail += 1


@njit(cache=True)
def _add_edge(adj, deg, x, y):
    adj[x, deg[x]] = y
    deg[x] += 1
    adj[y, deg[y]] = x
    deg[y] += 1


@njit(cache=True)
def _drop(adj, deg, x, y):
    for k in range(deg[x]):
        if adj[x, k] == y:
            deg[x] -= 1
            adj[x, k] = adj[x, deg[x]]
            return


@njit(cache=True)
def network_simplex_kernel(C, a, b, max_iter, eps, streak_limit, block_size):
    m, n = C.shape
    N = m + n
    X = np.zeros((m, n))
    adj = np.empty((N, N), dtype=np.int64)
    deg = np.zeros(N, dtype=np.int64)

    # northwest-corner basis
    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    while True:
        f = min(ra[i], rb[j])
        X[i, j] = max(f, 0.0)
        _add_edge(adj, deg, i, m + j)
        ra[i] -= f
        rb[j] -= f
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1 or ra[i] <= 0.0:
            i += 1
        else:
            j += 1

    parent = np.full(N, -1, dtype=np.int64)
    depth = np.zeros(N, dtype=np.int64)
    pot = np.zeros(N)
    queue = np.empty(N, dtype=np.int64)
    _hang(0, -1, 0, adj, deg, parent, depth, pot, C, m, queue)

    up_a = np.empty(N, dtype=np.int64)
    up_b = np.empty(N, dtype=np.int64)
    path = np.empty(N, dtype=np.int64)
    n_arcs = m * n
    start = 0
    pivots = 0
    degenerate = 0
    streak = 0
    status = 0
    while True:
        found = -1
        if streak >= streak_limit:
            # Bland: lowest-index improving arc
            for idx in range(n_arcs):
                ii = idx // n
                jj = idx - ii * n
                if C[ii, jj] - pot[ii] - pot[m + jj] < -eps:
                    found = idx
                    break
        else:
            best = -eps
            cnt = 0
            for k in range(n_arcs):
                idx = start + k
                if idx >= n_arcs:
                    idx -= n_arcs
                ii = idx // n
                jj = idx - ii * n
                r = C[ii, jj] - pot[ii] - pot[m + jj]
                if r < best:
                    best = r
                    found = idx
                cnt += 1
                if cnt == block_size:
                    if found >= 0:
                        start = idx + 1
                        if start >= n_arcs:
                            start = 0
                        break
                    cnt = 0
        if found < 0:
            break
        if pivots >= max_iter:
            status = 1
            break
        ei = found // n
        ej = found - ei * n

        # tree path from target node m+ej up and over to source node ei
        na = 1
        nb_ = 1
        up_a[0] = m + ej
        up_b[0] = ei
        x = m + ej
        y = ei
        while depth[x] > depth[y]:
            x = parent[x]
            up_a[na] = x
            na += 1
        while depth[y] > depth[x]:
            y = parent[y]
            up_b[nb_] = y
            nb_ += 1
        while x != y:
            x = parent[x]
            y = parent[y]
            up_a[na] = x
            na += 1
            up_b[nb_] = y
            nb_ += 1
        plen = 0
        for k in range(na):
            path[plen] = up_a[k]
            plen += 1
        for k in range(nb_ - 2, -1, -1):
            path[plen] = up_b[k]
            plen += 1

        # minus arcs sit at even positions along the path
        theta = np.inf
        li = -1
        lj = -1
        for r in range(0, plen - 1, 2):
            p = path[r]
            q = path[r + 1]
            if p < m:
                ai, aj = p, q - m
            else:
                ai, aj = q, p - m
            f = X[ai, aj]
            if f < theta or (f == theta and ai * n + aj < li * n + lj):
                theta = f
                li = ai
                lj = aj
        if theta > 0:
            for r in range(plen - 1):
                p = path[r]
                q = path[r + 1]
                if p < m:
                    ai, aj = p, q - m
                else:
                    ai, aj = q, p - m
                if r % 2 == 0:
                    X[ai, aj] -= theta
                else:
                    X[ai, aj] += theta
            X[ei, ej] = theta
            streak = 0
        else:
            degenerate += 1
            streak += 1
        X[li, lj] = 0.0

        # swap arcs, then re-hang the subtree that was cut off
        _drop(adj, deg, li, m + lj)
        _drop(adj, deg, m + lj, li)
        _add_edge(adj, deg, ei, m + ej)
        child = li if parent[li] == m + lj else m + lj
        z = ei
        while depth[z] > depth[child]:
            z = parent[z]
        if z == child:
            top, upn = ei, m + ej
        else:
            top, upn = m + ej, ei
        _hang(top, upn, depth[upn] + 1, adj, deg, parent, depth, pot, C, m, queue)
        pivots += 1

    for ii in range(m):
        for jj in range(n):
            if X[ii, jj] < 0.0:
                X[ii, jj] = 0.0
    return X, pot, pivots, degenerate, status
