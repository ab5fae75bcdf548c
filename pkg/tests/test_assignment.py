import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linear_sum_assignment

from noma_vec.assignment import WeightMatrix, build_weight_matrix, kuhn_munkres
from noma_vec.oracle import brute_force_assignment


@st.composite
def weights(draw, max_u=7, holes=True):
    U = draw(st.integers(1, max_u))
    M = draw(st.integers(1, U))
    w = draw(arrays(np.float64, (U, M), elements=st.floats(-1e3, 1e3)))
    if holes:
        mask = draw(arrays(np.bool_, (U, M)))
        w = np.where(mask, -np.inf, w)
    return w


def test_two_by_two_example():
    m = kuhn_munkres(np.array([[3.0, 1.0], [2.0, 4.0]]))
    assert m.cu_of_tvu.tolist() == [0, 1]
    assert m.total == 7.0


def test_all_zero_weights():
    m = kuhn_munkres(np.zeros((4, 3)))
    assert m.total == 0.0
    assert sorted(m.cu_of_tvu.tolist()) == sorted(set(m.cu_of_tvu.tolist()))
    assert np.all(m.cu_of_tvu >= 0)


def test_single_pair():
    m = kuhn_munkres(build_weight_matrix([[2.5]], [[True]]))
    assert m.cu_of_tvu.tolist() == [0] and m.total == 2.5


def test_infeasible_column_is_unmatchable():
    w = np.array([[1.0, -np.inf], [2.0, -np.inf], [0.5, -np.inf]])
    m = kuhn_munkres(w)
    assert m.cu_of_tvu[1] == -1 and m.unmatchable == (1,)
    assert m.total == 2.0


def test_more_tvus_than_cus_rejected():
    with pytest.raises(ValueError):
        kuhn_munkres(np.zeros((2, 3)))


def test_weight_matrix_entries_recomputed():
    obj = np.array([[1.0, 4.0], [2.0, -3.0], [0.0, 7.5]])
    feas = np.array([[True, False], [True, True], [False, True]])
    wm = build_weight_matrix(obj, feas)
    for u in range(3):
        for m in range(2):
            assert wm.w[u, m] == (obj[u, m] if feas[u, m] else -np.inf)
    with pytest.raises(ValueError):
        build_weight_matrix(np.full((3, 2), np.nan), feas)


def test_agrees_with_enumeration_on_five_by_three():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        w = rng.normal(size=(5, 3))
        _, best = brute_force_assignment(w)
        assert kuhn_munkres(w).total == pytest.approx(best, abs=1e-9)


def test_agrees_with_scipy_on_dense_matrices():
    rng = np.random.default_rng(4)
    for _ in range(300):
        U = int(rng.integers(1, 40))
        M = int(rng.integers(1, U + 1))
        w = rng.uniform(-5, 5, (U, M))
        r, c = linear_sum_assignment(w, maximize=True)
        assert kuhn_munkres(w).total == pytest.approx(w[r, c].sum(), abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(w=weights())
def test_exact_against_enumeration(w):
    cu, best = brute_force_assignment(w)
    m = kuhn_munkres(w)
    assert (m.cu_of_tvu >= 0).sum() == sum(c >= 0 for c in cu)
    assert m.total == pytest.approx(best, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(w=weights(), data=st.data())
def test_permutation_equivariance(w, data):
    U, M = w.shape
    pr = np.array(data.draw(st.permutations(range(U))))
    pc = np.array(data.draw(st.permutations(range(M))))
    a = kuhn_munkres(w)
    b = kuhn_munkres(w[np.ix_(pr, pc)])
    assert b.total == pytest.approx(a.total, abs=1e-9)
    # the permuted matching, mapped back, is optimal for the original matrix
    back = np.full(M, -1)
    ok = b.cu_of_tvu >= 0
    back[pc[ok]] = pr[b.cu_of_tvu[ok]]
    assert w[back[back >= 0], np.flatnonzero(back >= 0)].sum() == pytest.approx(a.total, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(w=weights(holes=False), col=st.integers(0, 6), shift=st.floats(-1e3, 1e3))
def test_column_shift_keeps_an_optimal_matching(w, col, shift):
    col %= w.shape[1]
    moved = w.copy()
    moved[:, col] += shift
    m = kuhn_munkres(moved)
    # the matching found after the shift is still optimal before it
    idx = np.arange(w.shape[1])
    assert w[m.cu_of_tvu, idx].sum() == pytest.approx(brute_force_assignment(w)[1], abs=1e-7)


@settings(max_examples=200, deadline=None)
@given(w=weights())
def test_output_is_a_valid_injection(w):
    m = kuhn_munkres(WeightMatrix.from_array(w))
    used = m.cu_of_tvu[m.cu_of_tvu >= 0]
    assert used.size == np.unique(used).size
    assert np.all(np.isfinite(w[used, np.flatnonzero(m.cu_of_tvu >= 0)]))
    X = m.as_indicator(w.shape[0])
    assert np.all(X.sum(axis=0) <= 1) and np.all(X.sum(axis=1) <= 1)


def test_brute_force_guards_size():
    with pytest.raises(ValueError):
        brute_force_assignment(np.zeros((9, 2)))
