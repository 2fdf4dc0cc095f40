"""Entropy-regularized optimal transport by Sinkhorn-Knopp matrix scaling."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import xlogy

from .cost import CostMatrix
from .errors import ConvergenceError, SinkhornUnderflowError
from .exact import Coupling, _marginals

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SinkhornOptions:
    """Settings for :func:`solve_entropic`.

    ``lam`` weighs the negentropy term; ``tol`` bounds the infinity-norm
    marginal violation at exit. With ``fallback`` set, the linear-domain
    path switches to log-domain updates when the kernel underflows.
    """

    lam: float = 1.0
    max_iters: int = 10000
    tol: float = 1e-9
    log_domain: bool = False
    fallback: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def negentropy(plan):
    """Sum of gamma * log(gamma) over all entries, with 0 log 0 = 0."""
    P = plan.plan if isinstance(plan, Coupling) else np.asarray(plan, dtype=np.float64)
    if np.any(P < 0):
        raise ValueError("plan has negative entries")
    return float(xlogy(P, P).sum())


def _sinkhorn_linear(a, b, M, lam, max_iters, tol, init=None, window=50):
    shift = M.min()
    K = np.exp(-(M - shift) / lam)
    if not (K.any(axis=1).all() and K.any(axis=0).all()):
        raise SinkhornUnderflowError("lambda too small for linear-domain; retry log_domain")
    v = np.ones_like(b) if init is None else init[1]
    Kv = K @ v
    prev = np.inf
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for it in range(1, max_iters + 1):
            u = a / Kv
            v = b / (K.T @ u)
            Kv = K @ v
            err = np.abs(u * Kv - a).max()
            if not np.isfinite(err) or not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise SinkhornUnderflowError("lambda too small for linear-domain; retry log_domain")
            if err <= tol:
                break
            if it % window == 0:
                if err > 0.5 * prev and np.all(u > 0) and np.all(v > 0):
                    # stalled: finish on the dual in log form
                    f, g, err = _newton_polish(a, b, M, lam, lam * np.log(u) + shift,
                                               lam * np.log(v), tol)
                    P = np.exp((f[:, None] + g[None, :] - M) / lam)
                    return P, err, it, (f, g), True
                prev = err
    P = u[:, None] * K * v[None, :]
    return P, err, it, (u, v), False


def _lse(x, axis):
    top = x.max(axis=axis, keepdims=True)
    top[~np.isfinite(top)] = 0.0
    return (top + np.log(np.exp(x - top).sum(axis=axis, keepdims=True))).squeeze(axis)


def _dual_value(a, b, M, lam, f, g):
    with np.errstate(over="ignore"):
        return a @ f + b @ g - lam * np.exp((f[:, None] + g[None, :] - M) / lam).sum()


def _newton_polish(a, b, M, lam, f, g, tol, max_steps=100):
    """Damped Newton ascent on the entropic dual.

    Takes over from the scaling loop when its residual stalls, which
    happens when lam is small next to near-tied assignments. The last
    target potential stays fixed to remove the dual's shift invariance.
    """
    m, n = M.shape
    err = np.inf
    for _ in range(max_steps):
        P = np.exp((f[:, None] + g[None, :] - M) / lam)
        r, c = P.sum(axis=1), P.sum(axis=0)
        err = max(np.abs(r - a).max(), np.abs(c - b).max())
        if err <= tol:
            break
        grad = np.concatenate([a - r, (b - c)[:-1]])
        H = np.empty((m + n - 1, m + n - 1))
        H[:m, :m] = np.diag(r)
        H[m:, m:] = np.diag(c[:-1])
        H[:m, m:] = P[:, :-1]
        H[m:, :m] = P[:, :-1].T
        H /= lam
        H[np.diag_indices_from(H)] += 1e-14 * H.diagonal().max()
        try:
            step = scipy.linalg.solve(H, grad, assume_a="pos")
        except (np.linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        d0 = _dual_value(a, b, M, lam, f, g)
        slope = grad @ step
        t = 1.0
        while t > 1e-12:
            f1 = f + t * step[:m]
            g1 = g.copy()
            g1[:-1] += t * step[m:]
            d1 = _dual_value(a, b, M, lam, f1, g1)
            if np.isfinite(d1) and d1 >= d0 + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        f, g = f1, g1
    return f, g, err


def _sinkhorn_log(a, b, M, lam, max_iters, tol, init=None, window=50):
    # potentials f, g are kept in cost units: P = exp((f_i + g_j - M_ij) / lam)
    loga, logb = np.log(a), np.log(b)
    g = np.zeros_like(b) if init is None else init[1].copy()
    lse_rows = _lse((g[None, :] - M) / lam, 1)
    prev = np.inf
    for it in range(1, max_iters + 1):
        f = lam * (loga - lse_rows)
        g = lam * (logb - _lse((f[:, None] - M) / lam, 0))
        lse_rows = _lse((g[None, :] - M) / lam, 1)
        err = np.abs(np.exp(f / lam + lse_rows) - a).max()
        if err <= tol:
            break
        if it % window == 0:
            if err > 0.5 * prev:
                f, g, err = _newton_polish(a, b, M, lam, f, g, tol)
                break
            prev = err
    P = np.exp((f[:, None] + g[None, :] - M) / lam)
    return P, err, it, (f, g)


def sinkhorn_knopp(a, b, M, lam, max_iters=10000, tol=1e-9, log_domain=False,
                   fallback=True, init=None):
    """Scale exp(-M/lam) to the marginals ``a`` and ``b``.

    ``M`` may hold any finite reals (the GCG subproblem shifts the cost by a
    gradient that can be negative).

    Returns
    -------
    P : ndarray (ns, nt)
    log : dict
        ``err`` (final marginal violation), ``n_iter``, ``log_domain``
        (path actually used) and ``duals``: scaling vectors (u, v) in the
        linear domain or log-scalings (f, g) in the log domain.
        Passing the whole dict back as ``init`` warm-starts the next solve;
        once a solve has fallen back to the log domain, warm-started
        solves stay there.
    """
    M = np.asarray(M, dtype=np.float64)
    use_log = log_domain or bool(init and init["log_domain"] and fallback)
    duals0 = init["duals"] if init and init["log_domain"] == use_log else None
    P = None
    if not use_log:
        try:
            P, err, it, duals, use_log = _sinkhorn_linear(a, b, M, lam, max_iters, tol, duals0)
        except SinkhornUnderflowError:
            if not fallback:
                raise
            logger.debug("linear-domain Sinkhorn underflow at lam=%g; using log domain", lam)
            use_log, duals0 = True, None
    if P is None:
        P, err, it, duals = _sinkhorn_log(a, b, M, lam, max_iters, tol, duals0)
    log = {"err": float(err), "n_iter": it, "log_domain": use_log, "duals": duals}
    if not err <= tol:
        raise ConvergenceError(
            f"Sinkhorn residual {err:.3e} > tol {tol:.1e} after {max_iters} iterations",
            plan=P, residual=float(err), iteration=it)
    return P, log


def solve_entropic(mu_s, mu_t, C, opts=None, *, init=None, log=False):
    """Entropy-regularized transport plan.

    Solves ``min <gamma, C> + lam * sum gamma log gamma`` over couplings of
    ``mu_s`` and ``mu_t``; the solution has the form diag(u) K diag(v)
    with K = exp(-C / lam).

    Parameters
    ----------
    mu_s, mu_t : DiscreteMeasure or array-like
    C : CostMatrix or array-like (ns, nt)
    opts : SinkhornOptions, optional
    init : dict, optional
        Log of a previous call, used to warm-start the scalings.
    log : bool
        Also return the solver log dict.

    Returns
    -------
    Coupling, or (Coupling, dict) when ``log`` is true.
    """
    opts = opts or SinkhornOptions()
    a, b = _marginals(mu_s, mu_t)
    if isinstance(C, CostMatrix):
        if C.masked:
            forbidden = C.mask()
            if forbidden.all(axis=1).any() or forbidden.all(axis=0).any():
                raise ValueError("cost mask leaves a row or column with no allowed pair")
        M = C.values
    else:
        M = np.asarray(C, dtype=np.float64)
        if not np.all(np.isfinite(M)):
            raise ValueError("cost matrix has non-finite entries")
    if M.shape != (a.size, b.size):
        raise ValueError(f"cost shape {M.shape} does not match marginals ({a.size}, {b.size})")
    P, info = sinkhorn_knopp(a, b, M, opts.lam, opts.max_iters, opts.tol,
                             opts.log_domain, opts.fallback, init)
    coupling = Coupling(P, a, b)
    return (coupling, info) if log else coupling
