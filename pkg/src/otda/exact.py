"""Exact discrete optimal transport by the transportation network simplex.

The bipartite graph has one node per source atom (supply) and one per
target atom (demand). A basis is a spanning tree of ns + nt - 1 arcs, so
every returned plan has at most that many nonzero entries.
"""

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

from .cost import as_cost
from .errors import ConvergenceError
from .measures import DiscreteMeasure

FEASIBILITY_ATOL = 1e-7
ORACLE_MAX_N = 8

# consecutive degenerate pivots tolerated before switching to Bland's rule
DEGENERATE_STREAK = 20

# row blocks scanned in turn when pricing (Python path)
PRICING_BLOCKS = 8
# minimum arcs per pricing block (compiled path)
BLOCK_MIN = 64

try:
    from ._simplex_kernel import network_simplex_kernel
except ImportError:  # numba missing
    network_simplex_kernel = None


@dataclass(frozen=True)
class Coupling:
    """Transport plan with the marginals it was solved for."""

    plan: np.ndarray
    source_marginal: np.ndarray
    target_marginal: np.ndarray

    @property
    def shape(self):
        return self.plan.shape

    def residual(self):
        """Infinity-norm violation of both marginal constraints."""
        r = np.abs(self.plan.sum(axis=1) - self.source_marginal).max()
        c = np.abs(self.plan.sum(axis=0) - self.target_marginal).max()
        return float(max(r, c))

    def cost(self, C):
        return float(np.sum(self.plan * as_cost(C).values))

    def support_size(self, thresh=1e-12):
        return int(np.count_nonzero(self.plan > thresh))


def _marginals(mu_s, mu_t):
    a = np.array(mu_s.weights if isinstance(mu_s, DiscreteMeasure) else mu_s, dtype=np.float64)
    b = np.array(mu_t.weights if isinstance(mu_t, DiscreteMeasure) else mu_t, dtype=np.float64)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("negative mass")
    a /= a.sum()
    b /= b.sum()
    b[np.argmax(b)] += a.sum() - b.sum()
    return a, b


def _northwest_corner(a, b):
    m, n = a.size, b.size
    X = np.zeros((m, n))
    ra, rb = a.copy(), b.copy()
    arcs = []
    i = j = 0
    while True:
        f = min(ra[i], rb[j])
        X[i, j] = max(f, 0.0)
        arcs.append((i, j))
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
    return X, arcs


class _Tree:
    """Spanning-tree basis rooted at source node 0, with node potentials.

    Potentials satisfy u[i] + v[j] = C[i, j] on every basic arc. After a
    pivot only the subtree cut off by the leaving arc moves, so only its
    potentials, parents and depths are touched.
    """

    def __init__(self, m, n, arcs, C):
        self.m, self.n = m, n
        self.C = C
        self.adj = [set() for _ in range(m + n)]
        for i, j in arcs:
            self.adj[i].add(m + j)
            self.adj[m + j].add(i)
        self.parent = [-1] * (m + n)
        self.depth = [0] * (m + n)
        # pot[k] is u[k] for sources, v[k - m] for targets
        self.pot = np.zeros(m + n)
        self._hang(0, -1, 0)

    @property
    def u(self):
        return self.pot[:self.m]

    @property
    def v(self):
        return self.pot[self.m:]

    def _arc_cost(self, a, b):
        m = self.m
        return self.C[a, b - m] if a < m else self.C[b, a - m]

    def _hang(self, top, up, depth):
        """BFS from ``top`` (parent ``up``) resetting parent, depth and potentials."""
        m, adj, parent, dep, pot = self.m, self.adj, self.parent, self.depth, self.pot
        parent[top] = up
        dep[top] = depth
        if up >= 0:
            pot[top] = self._arc_cost(top, up) - pot[up]
        queue = deque([top])
        while queue:
            node = queue.popleft()
            for nb in adj[node]:
                if nb == parent[node]:
                    continue
                parent[nb] = node
                dep[nb] = dep[node] + 1
                pot[nb] = (self.C[node, nb - m] if node < m else self.C[nb, node - m]) - pot[node]
                queue.append(nb)

    def pivot(self, enter, leave):
        m = self.m
        li, lj = leave[0], m + leave[1]
        self.adj[li].discard(lj)
        self.adj[lj].discard(li)
        ei, ej = enter[0], m + enter[1]
        self.adj[ei].add(ej)
        self.adj[ej].add(ei)
        # the endpoint of the leaving arc further from the root heads the moved subtree;
        # the entering endpoint inside that subtree becomes its new top
        child = li if self.parent[li] == lj else lj
        top, up = (ei, ej) if self._below(ei, child) else (ej, ei)
        self._hang(top, up, self.depth[up] + 1)

    def _below(self, node, anc):
        parent, depth = self.parent, self.depth
        while depth[node] > depth[anc]:
            node = parent[node]
        return node == anc

    def cycle_path(self, src, snk):
        """Tree path from target node ``snk`` back to source node ``src``."""
        parent, depth = self.parent, self.depth
        up_a, up_b = [snk], [src]
        a, b = snk, src
        while depth[a] > depth[b]:
            a = parent[a]
            up_a.append(a)
        while depth[b] > depth[a]:
            b = parent[b]
            up_b.append(b)
        while a != b:
            a = parent[a]
            b = parent[b]
            up_a.append(a)
            up_b.append(b)
        return up_a + up_b[-2::-1]


def network_simplex(a, b, C, max_iter=200000, compiled=None):
    """Solve min <X, C> over couplings of ``a`` and ``b``.

    Runs the compiled kernel when numba is available (or ``compiled`` is
    true) and the pure-Python implementation otherwise.

    Returns
    -------
    X : ndarray (ns, nt)
    info : dict
        ``pivots``, ``degenerate_pivots``, ``u``, ``v`` (dual potentials).
    """
    C = np.ascontiguousarray(C, dtype=np.float64)
    m, n = C.shape
    scale = max(1.0, float(np.abs(C).max(initial=0.0)))
    eps = 1e-12 * scale
    if compiled is None:
        compiled = network_simplex_kernel is not None
    if compiled:
        block = max(BLOCK_MIN, int(np.sqrt(m * n)))
        X, pot, pivots, degenerate, status = network_simplex_kernel(
            C, np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64),
            max_iter, eps, DEGENERATE_STREAK, block)
        u, v = pot[:m], pot[m:]
        if status:
            gap = _duality_gap(X, C, u, a, b)
            raise ConvergenceError(
                f"network simplex did not converge in {max_iter} pivots "
                f"(optimality gap <= {gap:.3e})", plan=X, gap=gap, iteration=pivots)
        return X, {"pivots": pivots, "degenerate_pivots": degenerate, "u": u, "v": v}

    X, arcs = _northwest_corner(a, b)
    tree = _Tree(m, n, arcs, C)

    n_blocks = max(1, min(m, PRICING_BLOCKS))
    bounds = np.linspace(0, m, n_blocks + 1).astype(int)
    block = 0
    pivots = degenerate = streak = 0
    while True:
        u, v = tree.u, tree.v
        flat = -1
        if streak >= DEGENERATE_STREAK:
            # Bland: lowest-index improving arc
            for k in range(n_blocks):
                lo, hi = bounds[k], bounds[k + 1]
                neg = np.flatnonzero((C[lo:hi] - u[lo:hi, None] - v[None, :]).ravel() < -eps)
                if neg.size:
                    flat = lo * n + int(neg[0])
                    break
        else:
            # block search: most negative reduced cost in the first block that has one
            for k in range(n_blocks):
                b_idx = (block + k) % n_blocks
                lo, hi = bounds[b_idx], bounds[b_idx + 1]
                R = C[lo:hi] - u[lo:hi, None] - v[None, :]
                pos = int(np.argmin(R))
                if R.flat[pos] < -eps:
                    flat = lo * n + pos
                    block = b_idx
                    break
        if flat < 0:
            break
        if pivots >= max_iter:
            gap = _duality_gap(X, C, u, a, b)
            raise ConvergenceError(
                f"network simplex did not converge in {max_iter} pivots "
                f"(optimality gap <= {gap:.3e})", plan=X, gap=gap, iteration=pivots)
        ei, ej = divmod(flat, n)
        path = tree.cycle_path(ei, m + ej)

        # arcs along the path alternate -, +, -, ... starting at the target end
        minus, plus = [], []
        for r in range(len(path) - 1):
            p, q = path[r], path[r + 1]
            arc = (p, q - m) if p < m else (q, p - m)
            (minus if r % 2 == 0 else plus).append(arc)
        flows = [X[arc] for arc in minus]
        theta = min(flows)
        leave = min((arc for arc, f in zip(minus, flows) if f == theta),
                    key=lambda arc: arc[0] * n + arc[1])

        if theta > 0:
            for arc in minus:
                X[arc] -= theta
            for arc in plus:
                X[arc] += theta
            X[ei, ej] = theta
            streak = 0
        else:
            degenerate += 1
            streak += 1
        X[leave] = 0.0
        tree.pivot((ei, ej), leave)
        pivots += 1

    np.maximum(X, 0.0, out=X)
    return X, {"pivots": pivots, "degenerate_pivots": degenerate,
               "u": tree.u.copy(), "v": tree.v.copy()}


def _duality_gap(X, C, u, a, b):
    # make the duals feasible by lowering v, then compare objectives
    v_feas = (C - u[:, None]).min(axis=0)
    dual = float(a @ u + b @ v_feas)
    return float(np.sum(X * C)) - dual


def solve_exact(mu_s, mu_t, C, max_iter=200000):
    """Unregularized optimal transport plan between two discrete measures.

    Parameters
    ----------
    mu_s, mu_t : DiscreteMeasure or array-like
        Source and target measures (or directly their weight vectors).
    C : CostMatrix or array-like (ns, nt)
    max_iter : int
        Pivot cap. Exceeding it raises ``ConvergenceError`` carrying the
        current feasible plan and an optimality-gap bound.

    Returns
    -------
    Coupling
    """
    C = as_cost(C)
    a, b = _marginals(mu_s, mu_t)
    if C.shape != (a.size, b.size):
        raise ValueError(f"cost shape {C.shape} does not match marginals ({a.size}, {b.size})")
    X, _ = network_simplex(a, b, C.values, max_iter=max_iter)
    return Coupling(X, a, b)


def brute_force_assignment(C):
    """Best permutation for a square cost by enumerating all n! candidates.

    Ties go to the lexicographically smallest permutation. Only meant as a
    test oracle, hence the size cap.

    Returns
    -------
    perm : tuple of int
        ``perm[i]`` is the column assigned to row ``i``.
    objective : float
        ``sum_i C[i, perm[i]]``.
    """
    C = as_cost(C).values
    n, nt = C.shape
    if n != nt:
        raise ValueError("brute-force oracle needs a square cost matrix")
    if n > ORACLE_MAX_N:
        raise ValueError("oracle size cap")
    rows = np.arange(n)
    best, best_val = None, np.inf
    for perm in itertools.permutations(range(n)):
        val = C[rows, perm].sum()
        if val < best_val:
            best, best_val = perm, val
    return tuple(int(p) for p in best), float(best_val)
