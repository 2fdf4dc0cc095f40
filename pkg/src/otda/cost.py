"""Ground-cost matrices between source and target samples."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

METRICS = {
    "squared-euclidean": "sqeuclidean",
    "euclidean": "euclidean",
    "manhattan": "cityblock",
}

# multiplier applied to (max finite cost + 1) to build the masking sentinel
LARGE_COST_FACTOR = 1e8

UNKNOWN = None


@dataclass(frozen=True)
class CostMatrix:
    """Dense ns x nt cost matrix.

    ``masked`` marks matrices where forbidden pairs were replaced by
    ``large_cost``; that sentinel is finite so both Sinkhorn paths stay
    well defined.
    """

    values: np.ndarray
    metric_tag: str = "squared-euclidean"
    masked: bool = False
    large_cost: float = float("nan")

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        if not np.all(np.isfinite(vals)):
            raise ValueError("cost matrix has non-finite entries")
        if np.any(vals < 0):
            raise ValueError("cost matrix has negative entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape

    def mask(self):
        """Boolean ns x nt array, True where the pair is forbidden."""
        if not self.masked:
            return np.zeros(self.shape, dtype=bool)
        return self.values >= self.large_cost

    def normalized(self):
        """Copy divided by the largest unmasked entry (no-op on an all-zero matrix)."""
        allowed = ~self.mask()
        top = self.values[allowed].max() if allowed.any() else 0.0
        if top <= 0:
            return self
        vals = self.values / top
        large = self.large_cost
        if self.masked:
            large = LARGE_COST_FACTOR * (1.0 + 1.0)
            vals = np.where(allowed, vals, large)
        return CostMatrix(vals, self.metric_tag, self.masked, large)


def as_cost(C, metric_tag="squared-euclidean"):
    if isinstance(C, CostMatrix):
        return C
    return CostMatrix(np.asarray(C, dtype=np.float64), metric_tag)


def pairwise_cost(Xs, Xt, metric="squared-euclidean", normalize=False):
    """Cost between every source row and every target row.

    Parameters
    ----------
    Xs : array-like (ns, d)
    Xt : array-like (nt, d)
    metric : {'squared-euclidean', 'euclidean', 'manhattan'}
    normalize : bool
        Divide by the largest entry. Off by default; the useful range of the
        entropic weight scales with the cost magnitude.

    Returns
    -------
    CostMatrix
    """
    Xs = np.atleast_2d(np.asarray(Xs, dtype=np.float64))
    Xt = np.atleast_2d(np.asarray(Xt, dtype=np.float64))
    if Xs.shape[1] != Xt.shape[1]:
        raise ValueError("feature dimension mismatch")
    if not (np.all(np.isfinite(Xs)) and np.all(np.isfinite(Xt))):
        raise ValueError("invalid data")
    try:
        scipy_metric = METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; expected one of {sorted(METRICS)}")
    C = CostMatrix(cdist(Xs, Xt, metric=scipy_metric), metric)
    return C.normalized() if normalize else C


def _is_unknown(label):
    if label is None:
        return True
    return isinstance(label, float) and np.isnan(label)


def apply_label_mask(C, ys, yt_partial=None):
    """Forbid transport between samples whose known labels disagree.

    Entry (i, j) is kept when target j has no label or shares the label of
    source i, and replaced by a large finite sentinel otherwise.

    Parameters
    ----------
    C : CostMatrix or array-like (ns, nt)
    ys : sequence (ns,)
        Source labels, all known.
    yt_partial : sequence (nt,) or None
        Target labels with ``None`` (or NaN) for unknown entries.
    """
    C = as_cost(C)
    ns, nt = C.shape
    ys = list(ys)
    if len(ys) != ns:
        raise ValueError(f"expected {ns} source labels, got {len(ys)}")
    if yt_partial is None:
        yt_partial = [UNKNOWN] * nt
    yt_partial = list(yt_partial)
    if len(yt_partial) != nt:
        raise ValueError(f"expected {nt} target labels, got {len(yt_partial)}")

    source_classes = set(ys)
    keep = np.ones((ns, nt), dtype=bool)
    ys_arr = np.empty(ns, dtype=object)
    ys_arr[:] = ys
    for j, lab in enumerate(yt_partial):
        if _is_unknown(lab):
            continue
        if lab not in source_classes:
            raise ValueError(f"unmatchable target label {lab!r} (column {j})")
        keep[:, j] = ys_arr == lab

    if keep.all():
        return CostMatrix(C.values, C.metric_tag, True, C.large_cost
                          if C.masked else LARGE_COST_FACTOR * (C.values.max(initial=0.0) + 1.0))
    base = C.values
    if C.masked:
        keep &= ~C.mask()
        finite_max = base[~C.mask()].max(initial=0.0)
    else:
        finite_max = base.max(initial=0.0)
    large = LARGE_COST_FACTOR * (finite_max + 1.0)
    return CostMatrix(np.where(keep, base, large), C.metric_tag, True, large)
