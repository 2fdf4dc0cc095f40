import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otda import (
    GcgConfig,
    GroupLasso,
    Laplacian,
    SimilarityGraph,
    SinkhornOptions,
    line_search,
    solve_entropic,
    solve_gcg,
)
from otda.gcg import objective


def chain(n):
    S = np.zeros((n, n))
    S[np.arange(n - 1), np.arange(1, n)] = 1
    return SimilarityGraph.from_weights(S + S.T)


def small_problem(seed, ns=6, nt=5):
    rng = np.random.default_rng(seed)
    Xs, Xt = rng.normal(size=(ns, 2)), rng.normal(size=(nt, 2)) + 1
    C = ((Xs[:, None] - Xt[None]) ** 2).sum(-1)
    return Xs, Xt, C, np.arange(ns) % 2


def test_eta_zero_is_sinkhorn():
    _, _, C, labels = small_problem(0)
    a, b = np.ones(6) / 6, np.ones(5) / 5
    cfg = GcgConfig(lam=0.3, eta=0.0)
    cpl, trace = solve_gcg(a, b, C, cfg, GroupLasso(labels))
    ref = solve_entropic(a, b, C, SinkhornOptions(lam=0.3)).plan
    assert trace.n_iter == 1
    np.testing.assert_allclose(cpl.plan, ref, rtol=0, atol=1e-8)


def test_laplacian_beats_sinkhorn_plan():
    rng = np.random.default_rng(1)
    Xs, Xt = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    C = ((Xs[:, None] - Xt[None]) ** 2).sum(-1)
    a = np.ones(4) / 4
    reg = Laplacian(Xs, Xt, chain(4), chain(4), alpha=0.5)
    cfg = GcgConfig(lam=0.1, eta=0.1, regularizer="laplacian")
    cpl, trace = solve_gcg(a, a, C, cfg, reg)
    sk = solve_entropic(a, a, C, SinkhornOptions(lam=0.1)).plan
    assert objective(cpl.plan, C, 0.1, 0.1, reg) <= objective(sk, C, 0.1, 0.1, reg) + 1e-12
    assert trace.is_monotone()


def test_laplacian_requires_uniform_marginals():
    Xs, Xt, C, _ = small_problem(2)
    reg = Laplacian(Xs, Xt, chain(6), chain(5))
    a = np.arange(1, 7) / 21
    with pytest.raises(ValueError, match="uniform marginals"):
        solve_gcg(a, np.ones(5) / 5, C, GcgConfig(regularizer="laplacian"), reg)


def test_callback_sees_every_iterate():
    _, _, C, labels = small_problem(3)
    seen = []
    solve_gcg(np.ones(6) / 6, np.ones(5) / 5, C, GcgConfig(lam=0.5, eta=1.0),
              GroupLasso(labels), callback=lambda k, P: seen.append(k))
    assert seen == list(range(len(seen)))
    assert len(seen) >= 2


def test_trace_records():
    _, _, C, labels = small_problem(4)
    _, trace = solve_gcg(np.ones(6) / 6, np.ones(5) / 5, C, GcgConfig(lam=0.5, eta=1.0),
                         GroupLasso(labels))
    d = trace.as_dict()
    assert len(d["objective"]) == len(d["step"]) == len(d["residual"]) == trace.n_iter + 1
    assert all(0 <= s <= 1 for s in d["step"])


def test_line_search_zero_direction():
    P = np.full((2, 2), 0.25)
    assert line_search(P, np.zeros((2, 2)), np.ones((2, 2)), 1.0) == 0.0


def test_line_search_endpoints():
    P = np.full((2, 2), 0.25)
    D = np.array([[0.25, -0.25], [-0.25, 0.25]])
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    # descent along the whole segment for a linear objective
    assert line_search(P, D, C, 0.0) == 1.0
    assert line_search(P, -D, C, 0.0) == 0.0


def test_line_search_quadratic_closed_form():
    rng = np.random.default_rng(5)
    for seed in range(10):
        Xs, Xt, C, _ = small_problem(seed, 5, 5)
        reg = Laplacian(Xs, Xt, chain(5), chain(5), alpha=0.5)
        a = np.ones(5) / 5
        G = np.outer(a, a)
        star = np.eye(5)[rng.permutation(5)] / 5
        D = star - G
        eta = 10 ** rng.uniform(-1, 2)
        # phi(alpha) = phi(0) + alpha * s + alpha**2 * eta * Omega(D)
        s = np.sum(C * D) + eta * reg.slope(G, D)
        curv = eta * reg.value(D)
        expected = float(np.clip(-s / (2 * curv), 0, 1))
        got = line_search(G, D, C, 0.0, eta, reg)
        assert abs(got - expected) <= 1e-8


def test_line_search_decreases_phi():
    rng = np.random.default_rng(6)
    _, _, C, labels = small_problem(6)
    reg = GroupLasso(labels)
    a, b = np.ones(6) / 6, np.ones(5) / 5
    G = np.outer(a, b)
    star = solve_entropic(a, b, C + rng.normal(size=C.shape), SinkhornOptions(lam=0.2)).plan
    alpha = line_search(G, star - G, C, 0.2, 1.0, reg)
    phi = lambda t: objective(G + t * (star - G), C, 0.2, 1.0, reg)
    assert phi(alpha) <= phi(0.0)
    for t in np.linspace(0, 1, 21):
        assert phi(alpha) <= phi(t) + 1e-12


def test_line_search_domain_error():
    P = np.full((2, 2), 0.25)
    D = np.full((2, 2), np.nan)
    with pytest.raises(FloatingPointError, match="line search domain"):
        line_search(P, D, np.ones((2, 2)), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.05, 0.5, 2.0]),
       st.sampled_from([0.1, 1.0, 10.0]), st.sampled_from(["group-lasso", "laplacian"]))
def test_monotone_feasible_positive(seed, lam, eta, kind):
    Xs, Xt, C, labels = small_problem(seed, 8, 7)
    a, b = np.ones(8) / 8, np.ones(7) / 7
    if kind == "group-lasso":
        reg = GroupLasso(labels)
    else:
        reg = Laplacian(Xs, Xt, chain(8), chain(7), alpha=0.5)
    mins = []

    def check(k, P):
        assert max(np.abs(P.sum(1) - a).max(), np.abs(P.sum(0) - b).max()) <= 1e-7
        mins.append(P.min())

    cfg = GcgConfig(lam=lam, eta=eta, regularizer=kind)
    _, trace = solve_gcg(a, b, C, cfg, reg, callback=check)
    assert trace.is_monotone(1e-10)
    assert max(trace.residual) <= 1e-7
    if kind == "group-lasso":
        assert min(mins) > 0
