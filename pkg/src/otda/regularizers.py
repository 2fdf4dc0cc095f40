"""Class-based regularizers on the coupling and the similarity graphs they use.

Both regularizers expose ``value_grad(plan) -> (value, gradient)``, the
only thing the conditional-gradient solver needs.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class ClassGroups:
    """Partition of source rows by class: ``groups[k] = (class_id, indices)``."""

    groups: tuple

    def __post_init__(self):
        groups = tuple((cl, np.asarray(idx, dtype=np.int64)) for cl, idx in self.groups)
        seen = np.concatenate([idx for _, idx in groups]) if groups else np.array([], int)
        if np.unique(seen).size != seen.size or (seen.size and (
                seen.min() != 0 or seen.max() != seen.size - 1)):
            raise ValueError("class groups must partition the source rows")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_labels(cls, labels):
        labels = np.asarray(labels)
        order = []
        for lab in labels.tolist():
            if lab not in order:
                order.append(lab)
        return cls(tuple((lab, np.flatnonzero(labels == lab)) for lab in order))

    @property
    def n(self):
        return sum(idx.size for _, idx in self.groups)

    def __len__(self):
        return len(self.groups)


@dataclass(frozen=True)
class SimilarityGraph:
    """Symmetric binary similarity matrix and its Laplacian diag(S 1) - S."""

    weights: np.ndarray
    laplacian: np.ndarray

    @classmethod
    def from_weights(cls, S):
        S = np.asarray(S, dtype=np.float64)
        return cls(S, np.diag(S.sum(axis=1)) - S)

    @property
    def n_edges(self):
        return int(np.count_nonzero(np.triu(self.weights)))


def _knn_adjacency(X, k):
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError("neighborhood too large")
    D = cdist(X, X, metric="sqeuclidean")
    np.fill_diagonal(D, np.inf)
    # stable sort: equal distances keep the lower sample index first
    nbrs = np.argsort(D, axis=1, kind="stable")[:, :k]
    S = np.zeros((n, n))
    S[np.repeat(np.arange(n), k), nbrs.ravel()] = 1.0
    return np.maximum(S, S.T)


def build_target_graph(Xt, k=8):
    """Binary k-nearest-neighbor graph, symmetrized by union."""
    return SimilarityGraph.from_weights(_knn_adjacency(Xt, k))


def build_source_graph(Xs, ys, k=8):
    """k-nearest-neighbor graph with every edge between two classes removed."""
    ys = np.asarray(ys)
    S = _knn_adjacency(Xs, k)
    if ys.shape[0] != S.shape[0]:
        raise ValueError("one label per source sample required")
    S[ys[:, None] != ys[None, :]] = 0.0
    return SimilarityGraph.from_weights(S)


class GroupLasso:
    """Sum over target columns and source classes of ||gamma[I_cl, j]||_2.

    ``forbidden`` (boolean ns x nt, e.g. from a label-masked cost) marks
    pairs that carry no mass by construction; class blocks made entirely of
    such pairs are identically zero on the feasible set and are skipped.
    """

    name = "group-lasso"

    def __init__(self, groups, forbidden=None):
        if not isinstance(groups, ClassGroups):
            groups = ClassGroups.from_labels(groups)
        self.groups = groups
        self._skip = None
        if forbidden is not None:
            forbidden = np.asarray(forbidden, dtype=bool)
            self._skip = [forbidden[idx].all(axis=0) for _, idx in groups.groups]

    def _blocks(self, plan):
        """Yield (rows, live columns, unit-normalized block, column norms) per class."""
        cols = np.arange(plan.shape[1])
        for k, (_, idx) in enumerate(self.groups.groups):
            live = cols if self._skip is None else cols[~self._skip[k]]
            block = plan[np.ix_(idx, live)]
            norms = _column_norms(block)
            if np.any(norms == 0):
                raise ValueError("nondifferentiable point: a class block of the plan is zero")
            yield idx, live, block / norms, norms

    def value_grad(self, plan):
        plan = np.asarray(plan, dtype=np.float64)
        grad = np.zeros_like(plan)
        value = 0.0
        for idx, live, unit, norms in self._blocks(plan):
            value += norms.sum()
            grad[np.ix_(idx, live)] = unit
        return float(value), grad

    def value(self, plan):
        plan = np.asarray(plan, dtype=np.float64)
        return float(sum(_column_norms(plan[idx]).sum() for _, idx in self.groups.groups))

    def slope(self, plan, direction):
        """Directional derivative <grad(plan), direction> without forming the gradient."""
        plan = np.asarray(plan, dtype=np.float64)
        return float(sum(np.sum(unit * direction[np.ix_(idx, live)])
                         for idx, live, unit, _ in self._blocks(plan)))


def _column_norms(block):
    # rescale by the column maximum so tiny Sinkhorn entries do not underflow when squared
    scale = np.abs(block).max(axis=0, initial=0.0)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sqrt(np.einsum("ij,ij->j", block / safe, block / safe))


def group_lasso(plan, groups, forbidden=None):
    """Group-lasso value and gradient; see :class:`GroupLasso`."""
    return GroupLasso(groups, forbidden).value_grad(plan)


class Laplacian:
    """Graph smoothness of the barycentrically mapped samples.

    With uniform marginals the source images are ``ns * gamma @ Xt`` and
    the target images ``nt * gamma.T @ Xs``; the regularizer is

        (1 - alpha) Tr(Xt' gamma' Ls gamma Xt) + alpha Tr(Xs' gamma Lt gamma' Xs)

    times ``ns_scale``. The default ``ns_scale = 1`` is the trace form
    itself: the ns**2 from the mapped samples cancels the 1/ns**2 averaging
    of the pairwise-distance form, and any leftover constant is absorbed
    by the regularization weight.
    """

    name = "laplacian"

    def __init__(self, Xs, Xt, Ls, Lt=None, alpha=0.5, ns_scale=1.0):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if alpha > 0 and Lt is None:
            raise ValueError("target graph required")
        self.Xs = np.asarray(Xs, dtype=np.float64)
        self.Xt = np.asarray(Xt, dtype=np.float64)
        self.Ls = _as_matrix(Ls)
        self.Lt = None if Lt is None else _as_matrix(Lt)
        self.alpha = float(alpha)
        self.ns_scale = float(ns_scale)
        self._Ls_sym = self.Ls + self.Ls.T
        self._Lt_sym = None if self.Lt is None else self.Lt + self.Lt.T

    def value_grad(self, plan):
        G = np.asarray(plan, dtype=np.float64)
        a = self.alpha
        value = 0.0
        grad = np.zeros_like(G)
        if a < 1.0:
            GXt = G @ self.Xt
            value += (1 - a) * np.sum(GXt * (self.Ls @ GXt))
            grad += (1 - a) * (self._Ls_sym @ GXt) @ self.Xt.T
        if a > 0.0:
            GtXs = G.T @ self.Xs
            value += a * np.sum(GtXs * (self.Lt @ GtXs))
            grad += a * self.Xs @ (self._Lt_sym @ GtXs).T
        return float(self.ns_scale * value), self.ns_scale * grad

    def value(self, plan):
        return self.value_grad(plan)[0]

    def slope(self, plan, direction):
        """Directional derivative <grad(plan), direction> in feature space."""
        G = np.asarray(plan, dtype=np.float64)
        D = np.asarray(direction, dtype=np.float64)
        a = self.alpha
        total = 0.0
        if a < 1.0:
            total += (1 - a) * np.sum((self._Ls_sym @ (G @ self.Xt)) * (D @ self.Xt))
        if a > 0.0:
            total += a * np.sum((self._Lt_sym @ (G.T @ self.Xs)) * (D.T @ self.Xs))
        return float(self.ns_scale * total)


def _as_matrix(L):
    if isinstance(L, SimilarityGraph):
        return L.laplacian
    return np.asarray(L, dtype=np.float64)


def laplacian_reg(plan, Xs, Xt, Ls, Lt=None, alpha=0.5, ns_scale=1.0):
    """Laplacian regularizer value and gradient; see :class:`Laplacian`."""
    return Laplacian(Xs, Xt, Ls, Lt, alpha, ns_scale).value_grad(plan)
