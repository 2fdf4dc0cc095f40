"""Empirical discrete measures: weighted point clouds on the simplex."""

from dataclasses import dataclass

import numpy as np

SIMPLEX_ATOL = 1e-12


def normalize_weights(raw):
    """Rescale nonnegative masses so they sum to one.

    Parameters
    ----------
    raw : array-like (n,)
        Nonnegative masses, at least one strictly positive.

    Returns
    -------
    w : ndarray (n,)
        ``raw / raw.sum()``. Input already summing to one up to rounding
        is returned unchanged, so normalizing twice is a no-op.
    """
    w = np.asarray(raw, dtype=np.float64).ravel()
    if w.size == 0:
        raise ValueError("empty measure")
    if not np.all(np.isfinite(w)):
        raise ValueError("invalid data")
    if np.any(w < 0):
        raise ValueError("negative mass")
    total = w.sum()
    if total <= 0:
        raise ValueError("degenerate mass")
    if abs(total - 1.0) <= w.size * np.finfo(np.float64).eps:
        return w.copy()
    return w / total


@dataclass(frozen=True)
class DiscreteMeasure:
    """Sum of weighted Diracs located at the rows of ``points``.

    Both arrays are copied and frozen on construction.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError("empty measure")
        if not np.all(np.isfinite(pts)):
            raise ValueError("invalid data")
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.shape[0] != pts.shape[0]:
            raise ValueError(
                f"weights length {w.shape[0]} does not match {pts.shape[0]} points")
        if not np.all(np.isfinite(w)):
            raise ValueError("invalid data")
        if np.any(w < 0):
            raise ValueError("negative mass")
        if abs(w.sum() - 1.0) > SIMPLEX_ATOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def is_uniform(self, atol=1e-12):
        return bool(np.all(np.abs(self.weights - 1.0 / self.n) <= atol))

    @classmethod
    def from_masses(cls, points, masses):
        return cls(points, normalize_weights(masses))


def uniform_measure(points):
    """Empirical measure putting mass 1/n on each row of ``points``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("empty measure")
    if not np.all(np.isfinite(pts)):
        raise ValueError("invalid data")
    n = pts.shape[0]
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))
