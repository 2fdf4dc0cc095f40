"""Generalized conditional gradient for class-regularized entropic transport.

The objective is split as f(gamma) = <gamma, C> + eta * Omega_c(gamma)
(linearized at each step) and g(gamma) = lam * sum gamma log gamma (kept
exact), so every search direction comes from one Sinkhorn solve on the
shifted cost C + eta * grad Omega_c(gamma_k).
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import xlogy

from .cost import CostMatrix
from .errors import ConvergenceError
from .exact import Coupling, _marginals
from .sinkhorn import SinkhornOptions, solve_entropic

REGULARIZERS = ("none", "group-lasso", "laplacian")
MONOTONE_SLACK = 1e-10


@dataclass(frozen=True)
class GcgConfig:
    lam: float = 1.0
    eta: float = 0.1
    max_outer_iters: int = 50
    rel_tol: float = 1e-5
    sinkhorn: SinkhornOptions = field(default_factory=SinkhornOptions)
    regularizer: str = "group-lasso"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"regularizer must be one of {REGULARIZERS}")


@dataclass
class SolveTrace:
    """Per-iteration objective, step size, marginal residual and wall time."""

    objective: list = field(default_factory=list)
    step: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    sinkhorn_iters: list = field(default_factory=list)

    def record(self, objective, step, residual, wall_time, sinkhorn_iters=0):
        self.objective.append(float(objective))
        self.step.append(float(step))
        self.residual.append(float(residual))
        self.wall_time.append(float(wall_time))
        self.sinkhorn_iters.append(int(sinkhorn_iters))

    @property
    def n_iter(self):
        return len(self.objective) - 1

    def is_monotone(self, slack=MONOTONE_SLACK):
        obj = np.asarray(self.objective)
        return bool(np.all(np.diff(obj) <= slack))

    def as_dict(self):
        return {"objective": self.objective, "step": self.step,
                "residual": self.residual, "wall_time": self.wall_time,
                "sinkhorn_iters": self.sinkhorn_iters}


def objective(plan, C, lam, eta=0.0, reg=None):
    """F(gamma) = <gamma, C> + lam * negentropy(gamma) + eta * Omega_c(gamma)."""
    P = plan.plan if isinstance(plan, Coupling) else np.asarray(plan)
    M = C.values if isinstance(C, CostMatrix) else np.asarray(C)
    val = float(np.sum(P * M)) + lam * float(xlogy(P, P).sum())
    if eta and reg is not None:
        val += eta * reg.value(P)
    return val


def _phi_derivative(gamma, delta, M, lam, eta, reg, alpha, end=None):
    # with the endpoint known, the convex combination keeps tiny entries exact
    G = gamma + alpha * delta if end is None else (1 - alpha) * gamma + alpha * end
    d = float(np.sum(delta * M))
    if lam:
        logG = np.log(np.maximum(G, 1e-300))
        # sum(delta) == 0 for feasible endpoints, so the "+1" of d(x log x) drops
        d += lam * float(np.sum(delta * logG))
    if eta and reg is not None:
        if hasattr(reg, "slope"):
            d += eta * reg.slope(G, delta)
        else:
            _, grad = reg.value_grad(G)
            d += eta * float(np.sum(grad * delta))
    if not np.isfinite(d):
        raise FloatingPointError("line search domain")
    return d


def line_search(gamma_k, delta, C, lam, eta=0.0, reg=None, xtol=1e-12, max_iter=60,
                end=None):
    """Exact step along ``delta`` for phi(a) = F(gamma_k + a * delta), a in [0, 1].

    phi is convex (linear + entropy + convex regularizer), so the minimizer
    is 0, 1, or the root of phi' which is bracketed and found with a
    safeguarded bisection (Brent).

    Parameters
    ----------
    gamma_k, delta : ndarray (ns, nt)
        Current iterate and direction; gamma_k + delta must be feasible.
    C : CostMatrix or ndarray
    lam : float
        Entropic weight; 0 drops the entropy term.
    eta : float
    reg : regularizer with ``value_grad``, optional
    end : ndarray (ns, nt), optional
        ``gamma_k + delta`` computed without rounding. Iterates are then
        formed as ``(1 - a) * gamma_k + a * end``, which keeps entries
        far below the scale of ``gamma_k`` from cancelling to zero.

    Returns
    -------
    alpha : float in [0, 1]
    """
    M = C.values if isinstance(C, CostMatrix) else np.asarray(C, dtype=np.float64)
    gamma_k = np.asarray(gamma_k, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if not np.any(delta):
        return 0.0
    dphi = lambda a: _phi_derivative(gamma_k, delta, M, lam, eta, reg, a, end)
    if dphi(0.0) >= 0:
        return 0.0
    if dphi(1.0) <= 0:
        return 1.0
    return float(brentq(dphi, 0.0, 1.0, xtol=xtol, maxiter=max_iter))


def solve_gcg(mu_s, mu_t, C, cfg=None, reg=None, *, callback=None):
    """Minimize <gamma, C> + lam * Omega_s(gamma) + eta * Omega_c(gamma) over couplings.

    Parameters
    ----------
    mu_s, mu_t : DiscreteMeasure or array-like
    C : CostMatrix or ndarray (ns, nt)
    cfg : GcgConfig
    reg : GroupLasso, Laplacian or None
        The class regularizer Omega_c. Ignored when ``eta == 0``.
    callback : callable, optional
        Called as ``callback(k, plan)`` after every iterate, including the
        initial one.

    Returns
    -------
    Coupling, SolveTrace
    """
    cfg = cfg or GcgConfig()
    a, b = _marginals(mu_s, mu_t)
    M = C.values if isinstance(C, CostMatrix) else np.asarray(C, dtype=np.float64)
    if cfg.regularizer == "laplacian" or getattr(reg, "name", None) == "laplacian":
        if not (np.allclose(a, 1.0 / a.size, rtol=0, atol=1e-12)
                and np.allclose(b, 1.0 / b.size, rtol=0, atol=1e-12)):
            raise ValueError("Laplacian regularization needs uniform marginals")
    sk_opts = replace(cfg.sinkhorn, lam=cfg.lam)
    lam, eta = cfg.lam, cfg.eta
    if reg is None or cfg.regularizer == "none":
        eta = 0.0

    trace = SolveTrace()
    t0 = time.perf_counter()
    gamma = _initial_plan(a, b, C)
    F = objective(gamma, M, lam, eta, reg)
    trace.record(F, 0.0, _residual(gamma, a, b), 0.0)
    if callback:
        callback(0, gamma)

    sk_log = None
    for k in range(1, cfg.max_outer_iters + 1):
        if eta:
            _, grad = reg.value_grad(gamma)
            shifted = M + eta * grad
        else:
            shifted = M
        try:
            star, sk_log = solve_entropic(a, b, shifted, sk_opts, init=sk_log, log=True)
        except ConvergenceError as exc:
            raise ConvergenceError(f"Sinkhorn subproblem failed at GCG iteration {k}: {exc}",
                                   plan=gamma, residual=exc.residual, iteration=k) from exc
        if not eta:
            # f is linear: the subproblem is the whole problem
            gamma, alpha = star.plan, 1.0
        else:
            delta = star.plan - gamma
            alpha = line_search(gamma, delta, M, lam, eta, reg, end=star.plan)
            gamma = (1 - alpha) * gamma + alpha * star.plan
        F_new = objective(gamma, M, lam, eta, reg)
        trace.record(F_new, alpha, _residual(gamma, a, b), time.perf_counter() - t0,
                     sk_log["n_iter"])
        if callback:
            callback(k, gamma)
        if not eta or alpha == 0.0:
            break
        if abs(F - F_new) / max(abs(F), 1.0) < cfg.rel_tol:
            break
        F = F_new
    return Coupling(gamma, a, b), trace


def _initial_plan(a, b, C):
    """Product coupling, or the max-entropy coupling on allowed pairs if C is masked."""
    if isinstance(C, CostMatrix) and C.masked:
        forbidden = C.mask()
        if forbidden.any():
            zero_one = np.where(forbidden, C.large_cost, 0.0)
            return solve_entropic(a, b, zero_one, SinkhornOptions(lam=1.0)).plan
    return np.outer(a, b)


def _residual(P, a, b):
    return max(np.abs(P.sum(axis=1) - a).max(), np.abs(P.sum(axis=0) - b).max())
