"""Moving samples across domains with a transport plan."""

import warnings
from dataclasses import dataclass

import numpy as np

from .exact import Coupling

ZERO_MASS = 1e-15


@dataclass(frozen=True)
class MappedSamples:
    points: np.ndarray
    direction: str = "source-to-target"
    t: float = 1.0


def _plan(plan):
    return plan.plan if isinstance(plan, Coupling) else np.asarray(plan, dtype=np.float64)


def barycentric_map(plan, Xt, metric_tag="squared-euclidean"):
    """Image of each source atom as the plan-weighted mean of the target samples.

    Row i of the result is sum_j plan[i, j] Xt[j] / sum_j plan[i, j]; it is
    the minimizer of sum_j plan[i, j] ||x - Xt[j]||^2, so it lies in the
    convex hull of the target samples.
    """
    P = _plan(plan)
    Xt = np.asarray(Xt, dtype=np.float64)
    if P.shape[1] != Xt.shape[0]:
        raise ValueError(f"plan has {P.shape[1]} columns but {Xt.shape[0]} target samples")
    if metric_tag != "squared-euclidean":
        warnings.warn("weighted-mean mapping is the barycenter only for the squared "
                      "euclidean cost", stacklevel=2)
    mass = P.sum(axis=1)
    if np.any(mass <= 0):
        raise ValueError(f"unmapped source sample {int(np.flatnonzero(mass <= 0)[0])}")
    return (P @ Xt) / mass[:, None]


def inverse_map(plan, Xs, metric_tag="squared-euclidean"):
    """Image of each target atom as the plan-weighted mean of the source samples."""
    P = _plan(plan)
    Xs = np.asarray(Xs, dtype=np.float64)
    if P.shape[0] != Xs.shape[0]:
        raise ValueError(f"plan has {P.shape[0]} rows but {Xs.shape[0]} source samples")
    if metric_tag != "squared-euclidean":
        warnings.warn("weighted-mean mapping is the barycenter only for the squared "
                      "euclidean cost", stacklevel=2)
    mass = P.sum(axis=0)
    if np.any(mass <= 0):
        raise ValueError(f"unmapped target sample {int(np.flatnonzero(mass <= 0)[0])}")
    return (P.T @ Xs) / mass[:, None]


def interpolate(plan, Xs, Xt, t, metric_tag="squared-euclidean"):
    """Displacement interpolation between the two empirical measures.

    Each pair (i, j) carrying mass becomes an atom at (1 - t) Xs[i] + t Xt[j]
    with mass plan[i, j]. Atoms with mass below 1e-15 are dropped. Atoms
    are returned in row-major (i, j) order, so at t = 0 or t = 1 points
    may repeat; use ``merge`` to collapse them.

    Returns
    -------
    points : ndarray (k, d)
    masses : ndarray (k,)
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter t={t} outside [0, 1]")
    if metric_tag != "squared-euclidean" and 0.0 < t < 1.0:
        raise ValueError("displacement interpolation is only defined here for the "
                         "squared euclidean cost")
    P = _plan(plan)
    Xs = np.asarray(Xs, dtype=np.float64)
    Xt = np.asarray(Xt, dtype=np.float64)
    ii, jj = np.nonzero(P >= ZERO_MASS)
    points = (1.0 - t) * Xs[ii] + t * Xt[jj]
    return points, P[ii, jj]


def merge(points, masses, decimals=12):
    """Sum the masses of atoms that sit at the same location."""
    keys = np.round(points, decimals)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return points[first], np.bincount(inverse.ravel(), weights=masses, minlength=first.size)
