import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otda import CostMatrix, apply_label_mask, pairwise_cost


def test_zero_self_distance():
    assert pairwise_cost([[0.0, 0.0]], [[0.0, 0.0]]).values.tolist() == [[0.0]]


def test_squared_euclidean_default():
    C = pairwise_cost([[0.0, 0.0]], [[3.0, 4.0]])
    assert C.values.tolist() == [[25.0]]
    assert C.metric_tag == "squared-euclidean"


def test_manhattan():
    C = pairwise_cost([[0.0, 0.0], [1.0, 0.0]], [[0.0, 1.0]], "manhattan")
    assert C.values.tolist() == [[1.0], [2.0]]


def test_euclidean():
    C = pairwise_cost([[0.0, 0.0]], [[3.0, 4.0]], "euclidean")
    assert C.values.tolist() == [[5.0]]


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="feature dimension mismatch"):
        pairwise_cost(np.zeros((2, 2)), np.zeros((2, 3)))


def test_unknown_metric():
    with pytest.raises(ValueError, match="unknown metric"):
        pairwise_cost(np.zeros((1, 1)), np.zeros((1, 1)), "cosine")


def test_normalized_cost_max_is_one():
    C = pairwise_cost(np.array([[0.0], [2.0]]), np.array([[1.0], [4.0]]), normalize=True)
    assert C.values.max() == 1.0


def test_cost_matrix_rejects_negative_and_inf():
    with pytest.raises(ValueError):
        CostMatrix(np.array([[-1.0]]))
    with pytest.raises(ValueError):
        CostMatrix(np.array([[np.inf]]))


def test_mask_same_label_pass_through():
    C = pairwise_cost(np.zeros((2, 1)), np.ones((2, 1)))
    M = apply_label_mask(C, ["A", "B"], ["A", "B"])
    big = M.large_cost
    assert M.masked
    assert M.values.tolist() == [[1.0, big], [big, 1.0]]
    assert big == 1e8 * (1.0 + 1)
    assert np.isfinite(big)


def test_mask_all_unknown_is_identity():
    rng = np.random.default_rng(1)
    C = pairwise_cost(rng.normal(size=(4, 2)), rng.normal(size=(3, 2)))
    M = apply_label_mask(C, [0, 1, 0, 1], [None, None, None])
    np.testing.assert_array_equal(M.values, C.values)
    M = apply_label_mask(C, [0, 1, 0, 1], None)
    np.testing.assert_array_equal(M.values, C.values)


def test_mask_unmatchable_label():
    C = pairwise_cost(np.zeros((2, 1)), np.ones((2, 1)))
    with pytest.raises(ValueError, match="unmatchable target label"):
        apply_label_mask(C, ["A", "A"], ["B", None])


def test_mask_partial_labels():
    C = pairwise_cost(np.zeros((3, 1)), np.ones((2, 1)))
    M = apply_label_mask(C, [0, 1, 1], [1, float("nan")])
    assert M.mask().tolist() == [[True, False], [False, False], [False, False]]


points = st.integers(1, 6).flatmap(
    lambda d: st.tuples(st.integers(1, 8), st.integers(1, 8), st.just(d), st.integers(0, 2**31)))


@settings(max_examples=60, deadline=None)
@given(points)
def test_cost_properties(args):
    ns, nt, d, seed = args
    rng = np.random.default_rng(seed)
    Xs, Xt = rng.normal(size=(ns, d)), rng.normal(size=(nt, d))
    C = pairwise_cost(Xs, Xt).values
    assert C.min() >= 0
    perm = rng.permutation(d)
    np.testing.assert_allclose(pairwise_cost(Xs[:, perm], Xt[:, perm]).values, C,
                               rtol=1e-12, atol=1e-12)
    assert np.all(np.diag(pairwise_cost(Xs, Xs).values) == 0)
