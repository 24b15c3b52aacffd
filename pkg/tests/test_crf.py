import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dactag.crf import (
    ScoreProjection,
    TransitionParams,
    crf_backward,
    log_partition,
    marginals,
    nll,
    project_scores,
    sequence_score,
    softmax_baseline,
    softmax_grads,
    viterbi,
)
from dactag.encoder import PooledVector

from oracles import (
    brute_log_partition,
    brute_marginals,
    brute_nll,
    brute_viterbi,
    central_diff,
    naive_matvec,
    path_score,
    rel_error,
)


def random_instance(rng, L, C, scale=2.0):
    S = rng.uniform(-scale, scale, size=(L, C))
    trans = TransitionParams(rng.uniform(-scale, scale, size=(C, C)), rng.uniform(-scale, scale, size=C))
    return S, trans


# -- projection -------------------------------------------------------------


def test_project_zero_weights_gives_bias_rows():
    proj = ScoreProjection(np.zeros((2, 3)), np.array([1.0, 2.0]))
    S = project_scores([np.ones(3), np.arange(3.0)], proj)
    np.testing.assert_array_equal(S, [[1, 2], [1, 2]])


def test_project_identity():
    p = np.array([[0.5, -1.0, 2.0], [3.0, 0.0, 1.0]])
    S = project_scores([PooledVector(row, np.zeros(3, int)) for row in p], ScoreProjection(np.eye(3), np.zeros(3)))
    np.testing.assert_array_equal(S, p)


def test_project_matches_naive_matvec():
    rng = np.random.default_rng(0)
    W, b, p = rng.normal(size=(3, 4)), rng.normal(size=3), rng.normal(size=4)
    S = project_scores([p], ScoreProjection(W, b))
    np.testing.assert_allclose(S[0], naive_matvec(W.tolist(), p.tolist(), b.tolist()), atol=1e-12, rtol=0)


def test_project_dimension_mismatch():
    with pytest.raises(ValueError):
        project_scores([np.ones(5)], ScoreProjection(np.zeros((2, 4)), np.zeros(2)))


# -- log partition ----------------------------------------------------------


def test_log_partition_single_position_two_labels():
    assert log_partition([[0.0, 0.0]], TransitionParams.zeros(2)) == pytest.approx(math.log(2), abs=1e-12)


def test_log_partition_single_label_is_single_path():
    trans = TransitionParams(np.array([[0.5]]), np.array([0.0]))
    # 1 + 2 + 3 plus two transitions of 0.5
    assert log_partition([[1.0], [2.0], [3.0]], trans) == pytest.approx(7.0, abs=1e-12)


def test_log_partition_matches_enumeration_l3_c2():
    rng = np.random.default_rng(7)
    S, trans = random_instance(rng, 3, 2)
    expected = brute_log_partition(S.tolist(), trans.T.tolist(), trans.start.tolist())
    assert log_partition(S, trans) == pytest.approx(expected, abs=1e-10)


def test_log_partition_rejects_non_finite():
    with pytest.raises(ValueError):
        log_partition([[0.0, np.nan]], TransitionParams.zeros(2))
    with pytest.raises(ValueError):
        log_partition([[0.0, 1.0]], TransitionParams(np.array([[0, np.inf], [0, 0]]), np.zeros(2)))


def test_log_partition_large_scores_do_not_overflow():
    rng = np.random.default_rng(1)
    S, trans = random_instance(rng, 4, 3, scale=1e3)
    expected = brute_log_partition(S.tolist(), trans.T.tolist(), trans.start.tolist())
    got = log_partition(S, trans)
    assert np.isfinite(got)
    assert got == pytest.approx(expected, rel=1e-12)


# -- sequence score / nll ---------------------------------------------------


def test_sequence_score_all_zero():
    assert sequence_score(np.zeros((3, 2)), TransitionParams.zeros(2), [0, 1, 1]) == 0.0


def test_sequence_score_single_label():
    S = np.array([[1.0], [-2.0], [4.0], [0.5]])
    trans = TransitionParams(np.array([[0.25]]), np.array([1.5]))
    assert sequence_score(S, trans, [0, 0, 0, 0]) == pytest.approx(3.5 + 3 * 0.25 + 1.5)


def test_sequence_score_matches_direct_sum():
    rng = np.random.default_rng(3)
    S, trans = random_instance(rng, 5, 3)
    y = [2, 0, 0, 1, 2]
    assert sequence_score(S, trans, y) == pytest.approx(path_score(S, trans.T, trans.start, y), abs=1e-12)


def test_sequence_score_length_mismatch():
    with pytest.raises(ValueError):
        sequence_score(np.zeros((3, 2)), TransitionParams.zeros(2), [0, 1])


def test_nll_single_label_is_zero():
    rng = np.random.default_rng(0)
    S = rng.normal(size=(4, 1))
    assert nll(S, TransitionParams(np.array([[0.3]]), np.array([0.2])), [0, 0, 0, 0]) == 0.0


def test_nll_uniform_single_position():
    assert nll(np.zeros((1, 4)), TransitionParams.zeros(4), [2]) == pytest.approx(math.log(4), abs=1e-12)


def test_nll_matches_enumeration_l3_c3():
    rng = np.random.default_rng(11)
    S, trans = random_instance(rng, 3, 3)
    gold = [1, 2, 0]
    expected = brute_nll(S.tolist(), trans.T.tolist(), trans.start.tolist(), gold)
    assert nll(S, trans, gold) == pytest.approx(expected, abs=1e-10)


def test_nll_skips_padded_leading_slots():
    rng = np.random.default_rng(5)
    S, trans = random_instance(rng, 4, 3)
    gold = np.array([-1, -1, 2, 0])
    mask = np.array([True, True, False, False])
    expected = brute_nll(S[2:].tolist(), trans.T.tolist(), trans.start.tolist(), [2, 0])
    assert nll(S, trans, gold, mask) == pytest.approx(expected, abs=1e-10)


def test_nll_all_padded_is_an_error():
    with pytest.raises(ValueError):
        nll(np.zeros((2, 2)), TransitionParams.zeros(2), [-1, -1], [True, True])


# -- marginals ----------------------------------------------------------------


def test_marginals_zero_scores_uniform():
    unary, pairwise = marginals(np.zeros((3, 4)), TransitionParams.zeros(4))
    np.testing.assert_allclose(unary, 0.25, atol=1e-12)
    np.testing.assert_allclose(pairwise, 1 / 16, atol=1e-12)


def test_marginals_single_label():
    unary, pairwise = marginals(np.random.default_rng(0).normal(size=(3, 1)), TransitionParams.zeros(1))
    np.testing.assert_allclose(unary, 1.0)
    np.testing.assert_allclose(pairwise, 1.0)


def test_marginals_match_enumeration():
    rng = np.random.default_rng(21)
    S, trans = random_instance(rng, 3, 2)
    unary, pairwise = marginals(S, trans)
    u_ref, p_ref = brute_marginals(S.tolist(), trans.T.tolist(), trans.start.tolist())
    np.testing.assert_allclose(unary, u_ref, atol=1e-10)
    np.testing.assert_allclose(pairwise, p_ref, atol=1e-10)


# -- backward -----------------------------------------------------------------


def test_crf_backward_single_label_zero():
    dS, dT, dstart = crf_backward(np.ones((3, 1)), TransitionParams.zeros(1), [0, 0, 0])
    assert not dS.any() and not dT.any() and not dstart.any()


def test_crf_backward_uniform_single_position():
    dS, _, _ = crf_backward(np.zeros((1, 4)), TransitionParams.zeros(4), [1])
    np.testing.assert_allclose(dS[0], [0.25, -0.75, 0.25, 0.25], atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_crf_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    L, C = 4, 3
    S, trans = random_instance(rng, L, C)
    gold = rng.integers(C, size=L)
    mask = np.array([True, False, False, False])
    gold[0] = -1
    dS, dT, dstart = crf_backward(S, trans, gold, mask)

    def f():
        return nll(S, trans, gold, mask)

    assert rel_error(dS, central_diff(f, S), floor=1e-6) < 1e-6
    assert rel_error(dT, central_diff(f, trans.T), floor=1e-6) < 1e-6
    assert rel_error(dstart, central_diff(f, trans.start), floor=1e-6) < 1e-6
    assert not dS[0].any()


# -- viterbi ------------------------------------------------------------------


def test_viterbi_without_transitions_is_per_position_argmax():
    S = np.array([[0.1, 0.9, 0.0], [2.0, -1.0, 0.5], [0.0, 0.0, 3.0]])
    path, score = viterbi(S, TransitionParams.zeros(3))
    assert path == [1, 0, 2]
    assert score == pytest.approx(5.9)


def test_viterbi_single_label():
    path, _ = viterbi(np.zeros((4, 1)), TransitionParams.zeros(1))
    assert path == [0, 0, 0, 0]


def test_viterbi_matches_enumeration_l4_c3():
    rng = np.random.default_rng(4)
    S, trans = random_instance(rng, 4, 3)
    path, score = viterbi(S, trans)
    ref_path, ref_score = brute_viterbi(S.tolist(), trans.T.tolist(), trans.start.tolist())
    assert path == ref_path
    assert score == pytest.approx(ref_score, abs=1e-12)


def test_viterbi_ties_prefer_lowest_label():
    path, _ = viterbi(np.zeros((3, 3)), TransitionParams.zeros(3))
    assert path == [0, 0, 0]


# -- softmax baseline -----------------------------------------------------------


def test_softmax_zero_scores_loss_is_log_c():
    loss, pred = softmax_baseline(np.ones(4), ScoreProjection(np.zeros((5, 4)), np.zeros(5)), gold=3)
    assert loss == pytest.approx(math.log(5), abs=1e-12)
    assert pred == 0


def test_softmax_confident_gold():
    b = np.zeros(5)
    b[2] = 1e3
    loss, pred = softmax_baseline(np.zeros(4), ScoreProjection(np.zeros((5, 4)), b), gold=2)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert pred == 2


def test_softmax_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    s = rng.normal(size=(3, 5))
    gold = np.array([4, 0, 2])
    _, d = softmax_grads(s, gold)
    num = central_diff(lambda: softmax_grads(s, gold)[0].sum(), s)
    assert rel_error(d, num, floor=1e-6) < 1e-6


# -- properties -----------------------------------------------------------------

instances = st.integers(1, 5).flatmap(
    lambda L: st.integers(1, 4).flatmap(
        lambda C: st.tuples(
            arrays(np.float64, (L, C), elements=st.floats(-5, 5)),
            arrays(np.float64, (C, C), elements=st.floats(-5, 5)),
            arrays(np.float64, (C,), elements=st.floats(-5, 5)),
        )
    )
)


@settings(max_examples=200, deadline=None)
@given(instances)
def test_marginal_normalization_and_consistency(inst):
    S, T, start = inst
    unary, pairwise = marginals(S, TransitionParams(T, start))
    np.testing.assert_allclose(unary.sum(axis=1), 1.0, atol=1e-9)
    if len(S) > 1:
        np.testing.assert_allclose(pairwise.sum(axis=(1, 2)), 1.0, atol=1e-9)
        np.testing.assert_allclose(pairwise.sum(axis=2), unary[:-1], atol=1e-9)
        np.testing.assert_allclose(pairwise.sum(axis=1), unary[1:], atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(instances, st.data())
def test_log_z_bounds_scores(inst, data):
    S, T, start = inst
    trans = TransitionParams(T, start)
    L, C = S.shape
    y = data.draw(st.lists(st.integers(0, C - 1), min_size=L, max_size=L))
    log_z = log_partition(S, trans)
    assert log_z >= sequence_score(S, trans, y) - 1e-9
    _, vscore = viterbi(S, trans)
    assert vscore <= log_z + 1e-9


@settings(max_examples=100, deadline=None)
@given(instances, st.floats(-50, 50), st.data())
def test_row_shift_invariance(inst, c, data):
    S, T, start = inst
    trans = TransitionParams(T, start)
    t = data.draw(st.integers(0, len(S) - 1))
    shifted = S.copy()
    shifted[t] += c
    assert log_partition(shifted, trans) == pytest.approx(log_partition(S, trans) + c, abs=1e-8)
    np.testing.assert_allclose(marginals(shifted, trans)[0], marginals(S, trans)[0], atol=1e-8)
    assert viterbi(shifted, trans)[0] == viterbi(S, trans)[0] or np.isclose(
        sequence_score(S, trans, viterbi(shifted, trans)[0]), viterbi(S, trans)[1], atol=1e-9
    )
