import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otda import (
    ClassGroups,
    GroupLasso,
    Laplacian,
    SimilarityGraph,
    build_source_graph,
    build_target_graph,
    group_lasso,
    laplacian_reg,
)


def central_diff(f, P, h=1e-6):
    G = np.zeros_like(P)
    for idx in np.ndindex(P.shape):
        E = np.zeros_like(P)
        E[idx] = h
        G[idx] = (f(P + E) - f(P - E)) / (2 * h)
    return G


def rel_err(G, ref):
    return np.linalg.norm(G - ref) / max(np.linalg.norm(ref), 1e-300)


def random_graph(n, rng):
    S = np.triu((rng.random((n, n)) < 0.6).astype(float), 1)
    # chain keeps the graph connected
    S[np.arange(n - 1), np.arange(1, n)] = 1
    return SimilarityGraph.from_weights(S + S.T)


def test_group_lasso_examples():
    val, _ = group_lasso(np.array([[0.5, 0.0], [0.0, 0.5]]), [0, 0])
    assert val == pytest.approx(1.0)
    val, grad = group_lasso(np.array([[0.3, 0.2], [0.4, 0.1]]), [0, 1])
    assert val == pytest.approx(1.0)
    np.testing.assert_array_equal(grad, np.ones((2, 2)))


def test_group_lasso_zero_block():
    with pytest.raises(ValueError, match="nondifferentiable point"):
        group_lasso(np.array([[0.0, 0.5], [0.0, 0.5]]), [0, 0])


def test_group_lasso_skips_forbidden_blocks():
    P = np.array([[0.5, 0.0], [0.0, 0.5]])
    forbidden = np.array([[False, True], [True, False]])
    val, grad = group_lasso(P, [0, 1], forbidden)
    assert val == pytest.approx(1.0)
    assert grad[0, 1] == 0 and grad[1, 0] == 0


@pytest.mark.parametrize("shape", [(4, 3), (6, 5)])
def test_group_lasso_gradient_fd(shape):
    rng = np.random.default_rng(shape[0])
    labels = np.arange(shape[0]) % 2
    reg = GroupLasso(labels)
    for _ in range(10):
        P = rng.random(shape) + 0.05
        _, grad = reg.value_grad(P)
        assert rel_err(grad, central_diff(reg.value, P)) < 1e-5


def test_laplacian_zero_graph():
    rng = np.random.default_rng(0)
    val, grad = laplacian_reg(rng.random((3, 2)), rng.random((3, 2)), rng.random((2, 2)),
                              np.zeros((3, 3)), alpha=0.0)
    assert val == 0.0
    assert not grad.any()


def test_laplacian_identical_images():
    Xt = np.array([[0.0, 1.0], [2.0, 3.0]])
    Ls = SimilarityGraph.from_weights(np.array([[0.0, 1.0], [1.0, 0.0]]))
    P = np.array([[0.5, 0.0], [0.5, 0.0]])
    val, _ = laplacian_reg(P, np.zeros((2, 2)), Xt, Ls, alpha=0.0)
    assert val == 0.0


def test_laplacian_needs_target_graph():
    with pytest.raises(ValueError, match="target graph required"):
        Laplacian(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 2)), None, alpha=0.5)


@pytest.mark.parametrize("shape", [(4, 3), (6, 5)])
def test_laplacian_gradient_fd(shape):
    rng = np.random.default_rng(shape[1])
    ns, nt = shape
    for _ in range(10):
        reg = Laplacian(rng.normal(size=(ns, 2)), rng.normal(size=(nt, 2)),
                        random_graph(ns, rng), random_graph(nt, rng), alpha=0.5)
        P = rng.random(shape) + 0.05
        _, grad = reg.value_grad(P)
        assert rel_err(grad, central_diff(reg.value, P)) < 1e-5


def test_slope_matches_gradient():
    rng = np.random.default_rng(9)
    P, D = rng.random((6, 5)), rng.normal(size=(6, 5))
    regs = [GroupLasso(np.arange(6) % 3),
            Laplacian(rng.normal(size=(6, 3)), rng.normal(size=(5, 3)),
                      random_graph(6, rng), random_graph(5, rng), alpha=0.3)]
    for reg in regs:
        _, grad = reg.value_grad(P)
        assert reg.slope(P, D) == pytest.approx(np.sum(grad * D), rel=1e-12)


def test_source_graph_collinear():
    G = build_source_graph(np.array([[0.0], [1.0], [2.0]]), [0, 0, 0], k=1)
    np.testing.assert_array_equal(G.weights, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])


def test_source_graph_prunes_cross_class():
    X = np.vstack([np.zeros((3, 2)) + np.arange(3)[:, None] * 0.1,
                   100 + np.arange(3)[:, None] * 0.1 * np.ones((3, 2))])
    y = [0, 0, 0, 1, 1, 1]
    G = build_source_graph(X, y, k=5)
    assert not G.weights[:3, 3:].any()
    assert G.n_edges == 6


def test_target_graph_two_points():
    G = build_target_graph(np.array([[0.0], [1.0]]), k=1)
    np.testing.assert_array_equal(G.weights, [[0, 1], [1, 0]])


def test_target_graph_duplicate_tie_rule():
    # points 1, 2, 3 coincide; point 0 picks the lowest index among them
    X = np.array([[0.0], [1.0], [1.0], [1.0]])
    G = build_target_graph(X, k=1)
    assert G.weights[0].tolist() == [0, 1, 0, 0]
    assert G.weights[2, 1] == 1 and G.weights[3, 1] == 1


def test_neighborhood_too_large():
    with pytest.raises(ValueError, match="neighborhood too large"):
        build_target_graph(np.zeros((3, 1)), k=3)


def test_class_groups_partition():
    g = ClassGroups.from_labels(["b", "a", "b"])
    assert [c for c, _ in g.groups] == ["b", "a"]
    with pytest.raises(ValueError):
        ClassGroups([(0, [0, 1]), (1, [1])])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_graph_invariants(n, k, seed):
    rng = np.random.default_rng(seed)
    k = min(k, n - 1)
    X = rng.normal(size=(n, 2))
    y = rng.integers(0, 3, n)
    for G in (build_target_graph(X, k), build_source_graph(X, y, k)):
        S, L = G.weights, G.laplacian
        assert np.array_equal(S, S.T)
        assert not np.diag(S).any()
        assert S.min() >= 0
        assert np.abs(L.sum(axis=1)).max() <= 1e-12
        assert np.linalg.eigvalsh(L).min() >= -1e-9


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_group_lasso_bounds(ns, nt, seed):
    rng = np.random.default_rng(seed)
    P = rng.random((ns, nt)) + 1e-3
    labels = rng.integers(0, 3, ns)
    val, _ = group_lasso(P, labels)
    biggest = np.bincount(labels).max()
    assert val <= P.sum() * np.sqrt(biggest) + 1e-12
    single, _ = group_lasso(P, np.arange(ns))
    assert single == pytest.approx(P.sum(), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 7), st.integers(2, 7), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_laplacian_nonnegative(ns, nt, alpha, seed):
    rng = np.random.default_rng(seed)
    val, _ = laplacian_reg(rng.random((ns, nt)), rng.normal(size=(ns, 3)),
                           rng.normal(size=(nt, 3)), random_graph(ns, rng),
                           random_graph(nt, rng), alpha=alpha)
    assert val >= -1e-12
