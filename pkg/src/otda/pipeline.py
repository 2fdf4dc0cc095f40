"""Adapt-then-classify: fit a transport, map the source, score 1-NN on the target."""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .cost import apply_label_mask, pairwise_cost
from .data import LabeledDataset
from .errors import ConvergenceError
from .exact import solve_exact
from .gcg import GcgConfig, SolveTrace, solve_gcg
from .mapping import barycentric_map
from .measures import uniform_measure
from .regularizers import GroupLasso, Laplacian, build_source_graph, build_target_graph
from .sinkhorn import SinkhornOptions, solve_entropic

logger = logging.getLogger(__name__)

METHODS = ("ot-exact", "ot-it", "ot-gl", "ot-laplace")
ALIASES = {
    "exact": "ot-exact", "ot-exact": "ot-exact",
    "sinkhorn": "ot-it", "it": "ot-it", "ot-it": "ot-it",
    "gl": "ot-gl", "group-lasso": "ot-gl", "ot-gl": "ot-gl",
    "laplace": "ot-laplace", "laplacian": "ot-laplace", "ot-laplace": "ot-laplace",
}
LOG_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)

# failures that make a grid point unusable rather than the whole search
SOLVER_FAILURES = (ConvergenceError, FloatingPointError, ValueError)


def canonical_method(name):
    try:
        return ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; expected one of {sorted(ALIASES)}") from None


@dataclass(frozen=True)
class AdaptConfig:
    """Everything :func:`fit` needs besides the data."""

    lam: float = 1.0
    eta: float = 0.1
    alpha: float = 0.5
    knn_k: int = 8
    metric: str = "squared-euclidean"
    normalize_costs: bool = False
    semi_supervised: bool = False
    max_outer_iters: int = 50
    rel_tol: float = 1e-5
    sinkhorn_max_iters: int = 10000
    sinkhorn_tol: float = 1e-9
    log_domain: bool = False

    def sinkhorn_options(self):
        return SinkhornOptions(lam=self.lam, max_iters=self.sinkhorn_max_iters,
                               tol=self.sinkhorn_tol, log_domain=self.log_domain)

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class AdaptationModel:
    method: str
    coupling: object
    mapped: np.ndarray
    source_labels: np.ndarray
    config: AdaptConfig
    trace: SolveTrace = None
    cost: object = None
    fit_seconds: float = 0.0

    def predict(self, X, k=1):
        return knn_predict(self.mapped, self.source_labels, X, k)

    @property
    def transport_cost(self):
        return self.coupling.cost(self.cost)


def fit(method, source, target, cfg=None):
    """Fit one transport-based adaptation.

    Parameters
    ----------
    method : str
        'ot-exact', 'ot-it', 'ot-gl' or 'ot-laplace' (short aliases accepted).
    source : LabeledDataset
        Fully labelled source samples.
    target : LabeledDataset
        Target samples. Labels are only read when ``cfg.semi_supervised``
        is set; unknown entries (-1) then leave the cost untouched.
    cfg : AdaptConfig

    Returns
    -------
    AdaptationModel
    """
    method = canonical_method(method)
    cfg = cfg or AdaptConfig()
    if source.dim != target.dim:
        raise ValueError("feature dimension mismatch")
    if not source.fully_labeled:
        raise ValueError("source samples must all be labelled")
    t0 = time.perf_counter()
    mu_s, mu_t = uniform_measure(source.X), uniform_measure(target.X)
    C = pairwise_cost(source.X, target.X, cfg.metric, normalize=cfg.normalize_costs)
    if cfg.semi_supervised:
        C = apply_label_mask(C, source.y.tolist(), target.partial_labels())

    trace = None
    if method == "ot-exact":
        coupling = solve_exact(mu_s, mu_t, C)
    elif method == "ot-it":
        coupling = solve_entropic(mu_s, mu_t, C, cfg.sinkhorn_options())
    else:
        if method == "ot-gl":
            reg = GroupLasso(source.groups, forbidden=C.mask() if C.masked else None)
        else:
            Gs = build_source_graph(source.X, source.y, cfg.knn_k)
            Gt = build_target_graph(target.X, cfg.knn_k) if cfg.alpha > 0 else None
            reg = Laplacian(source.X, target.X, Gs, Gt, alpha=cfg.alpha)
        gcfg = GcgConfig(lam=cfg.lam, eta=cfg.eta, max_outer_iters=cfg.max_outer_iters,
                         rel_tol=cfg.rel_tol, sinkhorn=cfg.sinkhorn_options(),
                         regularizer=reg.name)
        coupling, trace = solve_gcg(mu_s, mu_t, C, gcfg, reg)
    mapped = barycentric_map(coupling, target.X, C.metric_tag)
    return AdaptationModel(method, coupling, mapped, source.y.copy(), cfg, trace, C,
                           time.perf_counter() - t0)


def knn_predict(train_X, train_y, test_X, k=1):
    """k-nearest-neighbor labels under squared euclidean distance.

    Distance ties and vote ties both go to the smallest training index.
    """
    train_X = np.atleast_2d(np.asarray(train_X, dtype=np.float64))
    train_y = np.asarray(train_y)
    test_X = np.atleast_2d(np.asarray(test_X, dtype=np.float64))
    if train_X.shape[0] == 0:
        raise ValueError("empty training set")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, train_X.shape[0])
    D = cdist(test_X, train_X, metric="sqeuclidean")
    if k == 1:
        return train_y[np.argmin(D, axis=1)]
    nbrs = np.argsort(D, axis=1, kind="stable")[:, :k]
    out = np.empty(test_X.shape[0], dtype=train_y.dtype)
    for r, row in enumerate(nbrs):
        labels = train_y[row]
        uniq, first, counts = np.unique(labels, return_index=True, return_counts=True)
        best = counts.max()
        # among the most voted labels, the one reached by the nearest-ranked neighbor
        cand = first[counts == best]
        out[r] = labels[cand.min()]
    return out


def evaluate(pred, truth):
    """Overall accuracy, error rate and accuracy per true class."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty prediction set")
    correct = pred == truth
    per_class = {lab.item() if hasattr(lab, "item") else lab: float(correct[truth == lab].mean())
                 for lab in np.unique(truth)}
    acc = float(correct.mean())
    return {"accuracy": acc, "error_rate": 1.0 - acc, "per_class_accuracy": per_class}


def method_grid(method, grid=LOG_GRID, eta_grid=None):
    """(lam, eta) candidates for a method: none for OT-exact, lam only for OT-IT."""
    method = canonical_method(method)
    if method == "ot-exact":
        return [(None, None)]
    if method == "ot-it":
        return [(lam, 0.0) for lam in grid]
    return [(lam, eta) for lam in grid for eta in (eta_grid or grid)]


@dataclass
class GridResult:
    lam: float
    eta: float
    accuracy: float = float("nan")
    error: str = ""
    seconds: float = 0.0

    @property
    def ok(self):
        return not self.error


def _score_point(method, source, target, validation, cfg, lam, eta):
    t0 = time.perf_counter()
    point_cfg = cfg if lam is None else replace(cfg, lam=lam, eta=eta)
    try:
        model = fit(method, source, target, point_cfg)
    except SOLVER_FAILURES as exc:
        logger.debug("grid point lam=%s eta=%s failed: %s", lam, eta, exc)
        return GridResult(lam, eta, error=str(exc) or type(exc).__name__,
                          seconds=time.perf_counter() - t0)
    acc = evaluate(model.predict(validation.X), validation.y)["accuracy"]
    return GridResult(lam, eta, acc, seconds=time.perf_counter() - t0)


def grid_validate(method, source, target, validation, grid, cfg=None, jobs=1):
    """Pick (lam, eta) by 1-NN accuracy on labelled validation samples.

    Grid points whose solver fails are skipped. Ties go to the smallest
    lam, then the smallest eta, whatever order the grid was given in.

    Returns
    -------
    best_cfg : AdaptConfig
    results : list of GridResult, in grid order
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    cfg = cfg or AdaptConfig()
    if jobs == 1:
        results = [_score_point(method, source, target, validation, cfg, lam, eta)
                   for lam, eta in grid]
    else:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=jobs)(
            delayed(_score_point)(method, source, target, validation, cfg, lam, eta)
            for lam, eta in grid)
    usable = [r for r in results if r.ok]
    if not usable:
        raise ConvergenceError("every grid point failed: " + "; ".join(r.error for r in results))
    best = min(usable, key=lambda r: (-r.accuracy, _order(r.lam), _order(r.eta)))
    best_cfg = cfg if best.lam is None else replace(cfg, lam=best.lam, eta=best.eta)
    return best_cfg, results


def _order(v):
    return -np.inf if v is None else v
