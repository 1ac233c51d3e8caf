"""Compiled inner loops for the local k-NN graph estimator and the dual-rooted tree growth."""

import numpy as np
from numba import njit


@njit(cache=True)
def _sorted_neighborhood(Z, gamma, dist, order, dg):
    m, D = Z.shape
    for i in range(m):
        for j in range(m):
            acc = 0.0
            for d in range(D):
                t = Z[i, d] - Z[j, d]
                acc += t * t
            dist[i, j] = np.sqrt(acc)
    for i in range(m):
        # stable sort: ties resolved by position in the neighborhood
        order[i] = np.argsort(dist[i], kind="mergesort")
        for t in range(m):
            dg[i, t] = dist[i, order[i, t]] ** gamma


@njit(cache=True)
def _subset_length(order, dg, member, k):
    m = order.shape[0]
    total = 0.0
    for j in range(m):
        if not member[j]:
            continue
        found = 0
        for t in range(m):
            q = order[j, t]
            if q == j or not member[q]:
                continue
            total += dg[j, t]
            found += 1
            if found == k:
                break
    return total


@njit(cache=True)
def local_mean_lengths(Z, seeds, sizes, n_boot, k, gamma):
    """Bootstrap-mean k-NN graph lengths for each neighborhood, run and subsample size.

    Z has shape (P, m, D): P neighborhoods of m points. seeds has shape (P, R)
    and fixes the subsampling of neighborhood p in run r. Returns (P, R, S).
    """
    P, m, D = Z.shape
    R = seeds.shape[1]
    S = sizes.shape[0]
    out = np.zeros((P, R, S))
    dist = np.empty((m, m))
    order = np.empty((m, m), dtype=np.int64)
    dg = np.empty((m, m))
    member = np.zeros(m, dtype=np.bool_)
    perm = np.empty(m, dtype=np.int64)
    for p in range(P):
        _sorted_neighborhood(Z[p], gamma, dist, order, dg)
        member[:] = True
        full = _subset_length(order, dg, member, k)
        for r in range(R):
            np.random.seed(seeds[p, r])
            for s in range(S):
                if sizes[s] == m:
                    out[p, r, s] = full
                    continue
                acc = 0.0
                for b in range(n_boot):
                    for t in range(m):
                        perm[t] = t
                    for t in range(m - 1, 0, -1):
                        u = np.random.randint(0, t + 1)
                        tmp = perm[t]
                        perm[t] = perm[u]
                        perm[u] = tmp
                    member[:] = False
                    for t in range(sizes[s]):
                        member[perm[t]] = True
                    acc += _subset_length(order, dg, member, k)
                out[p, r, s] = acc / n_boot
    return out


@njit(cache=True)
def grow_dual_tree(W, root_a, root_b):
    """Grow two Prim trees from ``root_a`` and ``root_b`` until they meet.

    Returns the weight of the hitting edge and the owner of every vertex
    (0 for tree a, 1 for tree b, -1 for unclaimed). At each step the cheapest
    edge leaving either tree is taken; equal weights go to the lowest
    (from, to) vertex pair.
    """
    n = W.shape[0]
    owner = np.full(n, -1, dtype=np.int64)
    best = np.full((2, n), np.inf)
    parent = np.full((2, n), -1, dtype=np.int64)
    roots = (root_a, root_b)
    for t in range(2):
        r = roots[t]
        owner[r] = t
        for v in range(n):
            if v != r:
                best[t, v] = W[r, v]
                parent[t, v] = r
    while True:
        bw = np.inf
        bf = -1
        bt = -1
        btree = -1
        for t in range(2):
            for v in range(n):
                if owner[v] == t:
                    continue
                w = best[t, v]
                f = parent[t, v]
                if w < bw or (w == bw and (f < bf or (f == bf and v < bt))):
                    bw = w
                    bf = f
                    bt = v
                    btree = t
        if owner[bt] != -1:
            return bw, owner
        owner[bt] = btree
        for v in range(n):
            if owner[v] == btree:
                continue
            w = W[bt, v]
            if w < best[btree, v] or (w == best[btree, v] and bt < parent[btree, v]):
                best[btree, v] = w
                parent[btree, v] = bt
