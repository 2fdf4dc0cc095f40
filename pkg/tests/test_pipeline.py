import numpy as np
import pytest

from otda import ConvergenceError, LabeledDataset
from otda.data import TwoMoonsSpec, affine_instance, two_moons
from otda.pipeline import (
    AdaptConfig,
    canonical_method,
    evaluate,
    fit,
    grid_validate,
    knn_predict,
    method_grid,
)


@pytest.fixture(scope="module")
def moons():
    return two_moons(TwoMoonsSpec(n_per_class=30, rotation_degrees=20, seed=4, n_test=200))


def test_knn_exact_match():
    X = np.array([[0.0], [1.0], [5.0]])
    assert knn_predict(X, [0, 1, 2], X).tolist() == [0, 1, 2]


def test_knn_distance_tie_goes_to_lowest_index():
    X = np.array([[-1.0], [1.0]])
    assert knn_predict(X, [7, 3], [[0.0]]).tolist() == [7]


def test_knn_majority_and_vote_tie():
    X = np.array([[0.0], [0.1], [0.2], [5.0]])
    assert knn_predict(X, [1, 2, 2, 1], [[0.0]], k=3).tolist() == [2]
    # two votes each: label of the nearest neighbor wins
    assert knn_predict(X, [1, 2, 2, 1], [[0.0]], k=4).tolist() == [1]


def test_knn_errors():
    with pytest.raises(ValueError):
        knn_predict(np.zeros((0, 2)), [], [[0.0, 0.0]])
    with pytest.raises(ValueError):
        knn_predict([[0.0]], [0], [[0.0]], k=0)


def test_evaluate():
    out = evaluate([0, 1, 1, 0], [0, 1, 0, 0])
    assert out["accuracy"] == 0.75 and out["error_rate"] == 0.25
    assert out["per_class_accuracy"] == {0: 2 / 3, 1: 1.0}
    with pytest.raises(ValueError):
        evaluate([0], [0, 1])
    with pytest.raises(ValueError):
        evaluate([], [])


def test_method_names():
    assert canonical_method("GL") == "ot-gl"
    with pytest.raises(ValueError, match="unknown method"):
        canonical_method("svm")
    assert method_grid("exact") == [(None, None)]
    assert method_grid("it", (1, 2)) == [(1, 0.0), (2, 0.0)]
    assert len(method_grid("laplace", (1, 2), (3,))) == 2


def test_exact_recovers_affine_shift():
    Xs, A, b, Xt = affine_instance(25, 3, seed=5)
    y = np.arange(25) % 3
    model = fit("exact", LabeledDataset(Xs, y), LabeledDataset(Xt, -np.ones(25, int)))
    np.testing.assert_allclose(model.mapped, Xt, atol=1e-8)
    assert model.predict(Xt).tolist() == y.tolist()


def test_it_equals_gcg_with_zero_eta(moons):
    src, tgt, _ = moons
    cfg = AdaptConfig(lam=1.0, eta=0.0)
    it = fit("it", src, tgt.hide_labels(), cfg)
    gl = fit("gl", src, tgt.hide_labels(), cfg)
    np.testing.assert_allclose(gl.coupling.plan, it.coupling.plan, atol=1e-10)


def test_grid_single_point_and_tie_rule(moons):
    src, tgt, _ = moons
    best, res = grid_validate("it", src, tgt.hide_labels(), tgt, [(1.0, 0.0)])
    assert best.lam == 1.0 and len(res) == 1 and res[0].ok
    # all points score the same on identical data: smallest lam wins
    same = LabeledDataset(src.X, src.y)
    best, res = grid_validate("it", src, same, same, [(10.0, 0.0), (1.0, 0.0)])
    if res[0].accuracy == res[1].accuracy:
        assert best.lam == 1.0


def test_grid_skips_failures_and_reports(moons):
    src, tgt, _ = moons
    cfg = AdaptConfig(sinkhorn_max_iters=1, sinkhorn_tol=1e-15)
    with pytest.raises(ConvergenceError, match="every grid point failed"):
        grid_validate("it", src, tgt.hide_labels(), tgt, [(0.01, 0.0)], cfg)


def test_grid_parallel_matches_serial(moons):
    src, tgt, _ = moons
    grid = method_grid("it", (0.1, 1.0, 10.0))
    a = grid_validate("it", src, tgt.hide_labels(), tgt, grid)[1]
    b = grid_validate("it", src, tgt.hide_labels(), tgt, grid, jobs=2)[1]
    assert [r.accuracy for r in a] == [r.accuracy for r in b]


def test_semi_supervised_unknown_is_unsupervised(moons):
    src, tgt, _ = moons
    hidden = tgt.hide_labels()
    for method in ("exact", "it", "gl"):
        a = fit(method, src, hidden, AdaptConfig(semi_supervised=True))
        b = fit(method, src, hidden, AdaptConfig())
        assert np.array_equal(a.coupling.plan, b.coupling.plan)


def test_semi_supervised_known_labels_respected():
    rng = np.random.default_rng(0)
    Xs = np.r_[rng.normal(0, 0.1, (10, 2)), rng.normal(5, 0.1, (10, 2))]
    y = np.repeat([0, 1], 10)
    # target clusters swapped in space, labels known: mask must override geometry
    tgt = LabeledDataset(Xs[::-1] + 0.01, y)
    model = fit("exact", LabeledDataset(Xs, y), tgt, AdaptConfig(semi_supervised=True))
    P = model.coupling.plan
    assert P[np.ix_(y == 0, tgt.y == 1)].sum() < 1e-12


def test_fit_reproducible(moons):
    src, tgt, _ = moons
    a = fit("laplace", src, tgt.hide_labels(), AdaptConfig(lam=1.0, eta=0.1))
    b = fit("laplace", src, tgt.hide_labels(), AdaptConfig(lam=1.0, eta=0.1))
    assert np.array_equal(a.mapped, b.mapped)


def test_fit_validation():
    s = LabeledDataset(np.zeros((3, 2)), [0, 1, 0])
    with pytest.raises(ValueError, match="dimension"):
        fit("exact", s, LabeledDataset(np.zeros((3, 3)), [-1] * 3))
    with pytest.raises(ValueError, match="labelled"):
        fit("exact", LabeledDataset(np.zeros((3, 2)), [0, -1, 0]), s)
