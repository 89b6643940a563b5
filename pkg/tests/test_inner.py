import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fabgmres import FlopCounter, SparseMatrix, gram
from fabgmres.errors import DomainError, ZeroResidual, ZeroRow
from fabgmres.inner import (
    InnerMethod,
    InnerState,
    grk_candidates,
    kaczmarz_project,
    make_rng,
    residual_update,
    run_inner,
    select_gk,
    select_grk,
    select_rk,
)

METHODS = ["nesor", "gk", "rk", "grk"]


def _project(A, i, omega, state):
    kaczmarz_project(state, i, A, omega)
    state.refresh(A)
    return state


def test_exact_and_relaxed_projection():
    A = SparseMatrix.identity(2)
    state = _project(A, 0, 1.0, InnerState.start(A, [2.0, 0.0]))
    np.testing.assert_array_equal(state.z, [2.0, 0.0])
    assert state.s[0] == 0.0
    state = _project(A, 0, 0.5, InnerState.start(A, [2.0, 0.0]))
    np.testing.assert_array_equal(state.z, [1.0, 0.0])
    assert state.s[0] == 1.0


def test_projection_sequence_hand_iteration():
    # z <- z + (v_i - a_i.z) / |a_i|^2 a_i, rows 0, 1, 0
    A = SparseMatrix.from_dense(np.array([[1.0, 0.0], [1.0, 1.0]]))
    state = InnerState.start(A, [1.0, 2.0])
    expected = [[1.0, 0.0], [1.5, 0.5], [1.0, 0.5]]
    for i, z in zip((0, 1, 0), expected):
        _project(A, i, 1.0, state)
        np.testing.assert_allclose(state.z, z, atol=1e-15)


def test_residual_update_examples():
    A = SparseMatrix.identity(2)
    state = InnerState.start(A, [3.0, 4.0])
    residual_update(state, 0, gram(A), 1.0)
    np.testing.assert_array_equal(state.s, [0.0, 4.0])

    A = SparseMatrix.from_dense(np.array([[1.0, 1.0], [1.0, -1.0]]))
    state = InnerState.start(A, [2.0, 6.0])
    kaczmarz_project(state, 1, A, 1.0)
    residual_update(state, 1, gram(A), 1.0)
    np.testing.assert_allclose(state.s, [2.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(state.s, state.true_residual(A), atol=1e-15)


def test_select_gk():
    assert select_gk([1.0, -3.0, 2.0]) == 1
    assert select_gk([2.0, -2.0]) == 0
    with pytest.raises(ZeroResidual):
        select_gk([0.0, 0.0])


def test_select_rk_uniform_chi_square():
    A = SparseMatrix.identity(5)
    rng = make_rng(1)
    draws = 100_000
    counts = np.bincount([select_rk(rng, A) for _ in range(draws)], minlength=5)
    expected = draws / 5
    sigma = np.sqrt(draws * 0.2 * 0.8)
    assert np.all(np.abs(counts - expected) <= 3 * sigma)
    assert ((counts - expected) ** 2 / expected).sum() < 18.47  # chi-square(4), p = 0.001


def test_select_rk_weighted_and_single_row():
    A = SparseMatrix.from_dense(np.array([[1.0, 0.0], [0.0, np.sqrt(3.0)]]))
    rng = make_rng(2)
    draws = 100_000
    hits = sum(select_rk(rng, A) for _ in range(draws))
    assert abs(hits / draws - 0.75) <= 3 * np.sqrt(0.75 * 0.25 / draws)
    one = SparseMatrix.from_dense(np.array([[1.0, 2.0]]))
    assert {select_rk(rng, one) for _ in range(100)} == {0}


def test_select_grk_examples():
    one = SparseMatrix.from_dense(np.array([[1.0, 2.0]]))
    assert select_grk(make_rng(0), [3.0], one) == 0
    A = SparseMatrix.identity(2)
    eps, member = grk_candidates([1.0, 0.0], A)
    assert eps == pytest.approx(0.75)
    assert list(member) == [True, False]
    assert select_grk(make_rng(0), [1.0, 0.0], A) == 0
    with pytest.raises(ZeroResidual):
        select_grk(make_rng(0), [0.0, 0.0], A)


def test_select_grk_samples_proportionally_inside_candidates():
    # all rows qualify when |s_i| are equal; sampling then follows |s_i|^2
    A = SparseMatrix.identity(4)
    rng = make_rng(3)
    s = np.array([1.0, 1.0, 1.0, 1.0])
    counts = np.bincount([select_grk(rng, s, A) for _ in range(40_000)], minlength=4)
    assert np.all(np.abs(counts - 10_000) <= 3 * np.sqrt(40_000 * 0.25 * 0.75))


@pytest.mark.parametrize("method", METHODS)
def test_run_inner_identity(method):
    A = SparseMatrix.identity(4)
    v = np.array([1.0, 2.0, 3.0, 4.0])
    res = run_inner(InnerMethod(method, 1.0), A, v, budget=400, stop_threshold=1e-12, rng=make_rng(0))
    if method == "rk":
        np.testing.assert_allclose(res.z, v)  # rows may repeat; each one is still exact
    else:
        np.testing.assert_array_equal(res.z, v)
    assert res.residual_norm <= 1e-12 * np.linalg.norm(v)


@pytest.mark.parametrize("method", METHODS)
def test_run_inner_zero_rhs(method):
    A = SparseMatrix.identity(3)
    res = run_inner(InnerMethod(method, 1.0), A, np.zeros(3), budget=10, stop_threshold=0.5)
    assert res.projections == 0
    np.testing.assert_array_equal(res.z, 0.0)


def test_run_inner_minimum_norm_grk():
    rng = np.random.default_rng(10)
    M = rng.standard_normal((10, 6))
    v = M @ rng.standard_normal(6)
    A = SparseMatrix.from_dense(M)
    res = run_inner(InnerMethod("grk", 1.0), A, v, budget=10_000, stop_threshold=1e-8, rng=make_rng(1))
    assert np.linalg.norm(v - M @ res.z) <= 1e-8 * np.linalg.norm(v)
    assert np.linalg.norm(res.z - np.linalg.pinv(M) @ v) <= 1e-6


def test_nesor_equals_explicit_sweeps():
    rng = np.random.default_rng(11)
    M = rng.standard_normal((7, 5)) * (rng.random((7, 5)) < 0.6)
    M[np.all(M == 0, axis=1), 0] = 1.0
    v = rng.standard_normal(7)
    omega = 1.3
    z = np.zeros(5)
    for _ in range(3):
        for i in range(7):
            z += omega * (v[i] - M[i] @ z) / (M[i] @ M[i]) * M[i]
    res = run_inner(InnerMethod("nesor", omega), SparseMatrix.from_dense(M), v, budget=21, stop_threshold=0.0)
    assert res.projections == 21
    np.testing.assert_allclose(res.z, z, rtol=1e-12, atol=1e-14)


def test_gk_explicit_replay_with_and_without_gram():
    rng = np.random.default_rng(12)
    M = rng.standard_normal((9, 4))
    v = rng.standard_normal(9)
    z = np.zeros(4)
    for _ in range(15):
        s = v - M @ z
        i = int(np.argmax(np.abs(s)))
        z += 0.8 * s[i] / (M[i] @ M[i]) * M[i]
    A = SparseMatrix.from_dense(M)
    for C in (None, gram(A)):
        res = run_inner(InnerMethod("gk", 0.8), A, v, budget=15, stop_threshold=0.0, C=C)
        np.testing.assert_allclose(res.z, z, rtol=1e-10, atol=1e-12)


def test_gk_counters():
    rng = np.random.default_rng(13)
    A = SparseMatrix.from_dense(rng.standard_normal((6, 4)))
    v = rng.standard_normal(6)
    c = FlopCounter()
    run_inner(InnerMethod("gk", 1.0), A, v, budget=5, stop_threshold=0.0, counter=c)
    assert (c.selection_flops, c.projection_flops, c.residual_update_flops) == (5 * 24, 5 * 4, 0)
    c = FlopCounter()
    run_inner(InnerMethod("gk", 1.0), A, v, budget=5, stop_threshold=0.0, C=gram(A), counter=c)
    assert (c.selection_flops, c.projection_flops, c.residual_update_flops) == (0, 5 * 4, 5 * 6)


def test_run_inner_rejects_bad_input():
    A = SparseMatrix.from_dense(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ZeroRow):
        run_inner(InnerMethod("gk"), A, np.ones(2), budget=3, stop_threshold=0.1)
    I2 = SparseMatrix.identity(2)
    with pytest.raises(DomainError):
        run_inner(InnerMethod("gk"), I2, np.ones(2), budget=0, stop_threshold=0.1)
    for omega in (0.0, 2.0, 2.5, -1.0):
        with pytest.raises(DomainError):
            InnerMethod("rk", omega)


@pytest.mark.parametrize("method", METHODS)
def test_run_inner_deterministic(method):
    rng = np.random.default_rng(14)
    A = SparseMatrix.from_dense(rng.standard_normal((15, 8)))
    v = rng.standard_normal(15)
    runs = [run_inner(InnerMethod(method, 1.1), A, v, budget=60, stop_threshold=0.0, rng=make_rng(5)) for _ in range(2)]
    np.testing.assert_array_equal(runs[0].z, runs[1].z)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(METHODS), st.integers(2, 12), st.integers(1, 8), st.integers(0, 2**31), st.floats(0.1, 1.9))
def test_iterate_stays_in_row_space(method, m, n, seed, omega):
    rng = np.random.default_rng(seed)
    r = max(1, min(m, n) - 1)
    M = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    v = rng.standard_normal(m)
    res = run_inner(InnerMethod(method, omega), SparseMatrix.from_dense(M), v,
                    budget=3 * m, stop_threshold=0.0, rng=make_rng(seed))
    P = np.linalg.pinv(M) @ M  # projector onto range(A^T)
    np.testing.assert_allclose(P @ res.z, res.z, atol=1e-8 * max(1.0, np.linalg.norm(res.z)))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["gk", "rk", "grk"]), st.integers(2, 10), st.integers(2, 6), st.integers(0, 2**31))
def test_unrelaxed_projection_never_increases_error(method, m, n, seed):
    # for a consistent system, each exact projection is an orthogonal step toward the solution set
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((m, n))
    v = M @ rng.standard_normal(n)
    x_mn = np.linalg.pinv(M) @ v
    A = SparseMatrix.from_dense(M)
    errors = [np.linalg.norm(run_inner(InnerMethod(method, 1.0), A, v, budget=k, stop_threshold=0.0,
                                       rng=make_rng(seed)).z - x_mn) for k in range(1, 12)]
    assert all(b <= a + 1e-10 for a, b in zip(errors, errors[1:]))
