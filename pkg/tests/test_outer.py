import json
import warnings

import numpy as np
import pytest

from conftest import dense_problem
from fabgmres import (
    BreakdownWithSingularH,
    DimensionMismatch,
    DomainError,
    ResidualGapWarning,
    SolverConfig,
    SparseMatrix,
    ab_gmres,
    fab_gmres,
    fgmres_square,
    hessenberg_lsq,
    matvec,
)
from fabgmres import outer
from fabgmres.outer import ArnoldiState, arnoldi_step, assemble_solution


def test_arnoldi_orthogonal_input():
    state = ArnoldiState.start(np.array([0.0, 1.0, 0.0, 0.0]))
    step = arnoldi_step(state, np.array([3.0, 0.0, 0.0, 0.0]))
    assert step.h[0] == 0.0 and step.h_next == 3.0 and not step.breakdown
    np.testing.assert_array_equal(state.V[1], [1.0, 0.0, 0.0, 0.0])


def test_arnoldi_dependent_input_breaks_down():
    v1 = np.array([0.0, 1.0, 0.0, 0.0])
    state = ArnoldiState.start(v1)
    step = arnoldi_step(state, 2 * v1)
    assert step.h[0] == 2.0 and step.breakdown
    assert len(state.V) == 1
    with pytest.raises(DimensionMismatch):
        arnoldi_step(state, v1)


def test_arnoldi_orthogonality_random():
    rng = np.random.default_rng(15)
    state = ArnoldiState.start(rng.standard_normal(15))
    base = rng.standard_normal((15, 3))
    for _ in range(6):
        # nearly dependent inputs exercise the second Gram-Schmidt pass
        arnoldi_step(state, base @ rng.standard_normal(3) + 1e-6 * rng.standard_normal(15))
    assert state.orthogonality_loss() <= 1e-10


def test_undo_restores_state():
    rng = np.random.default_rng(16)
    state = ArnoldiState.start(rng.standard_normal(10))
    for _ in range(3):
        arnoldi_step(state, rng.standard_normal(10), rng.standard_normal(4))
    snapshot = (state.k, len(state.V), list(state.g), state.hnorm_sq, state.solve())
    arnoldi_step(state, rng.standard_normal(10), rng.standard_normal(4))
    state.undo()
    assert (state.k, len(state.V), len(state.Z)) == (snapshot[0], snapshot[1], 3)
    np.testing.assert_allclose(state.g, snapshot[2], rtol=1e-13, atol=1e-15)
    assert state.hnorm_sq == pytest.approx(snapshot[3], rel=1e-13)
    np.testing.assert_allclose(state.solve(), snapshot[4], rtol=1e-12)


def test_hessenberg_lsq_examples():
    y, res = hessenberg_lsq(np.array([[2.0], [0.0]]), 4.0)
    np.testing.assert_allclose(y, [2.0])
    assert res == pytest.approx(0.0, abs=1e-15)
    y, res = hessenberg_lsq(np.array([[1.0], [1.0]]), 1.0)
    np.testing.assert_allclose(y, [0.5])
    assert res == pytest.approx(1 / np.sqrt(2))


def test_hessenberg_lsq_matches_qr():
    rng = np.random.default_rng(17)
    H = np.triu(rng.standard_normal((7, 6)), -1)
    rhs = np.zeros(7)
    rhs[0] = 2.5
    y, res = hessenberg_lsq(H, 2.5)
    Q, R = np.linalg.qr(H)
    y_ref = np.linalg.solve(R, Q.T @ rhs)
    np.testing.assert_allclose(y, y_ref, rtol=1e-12, atol=1e-12)
    assert res == pytest.approx(np.linalg.norm(H @ y_ref - rhs), rel=1e-10)


def test_assemble_solution():
    z1 = np.array([1.0, -1.0])
    x0 = np.array([0.5, 0.5])
    np.testing.assert_array_equal(assemble_solution([z1], [2.0], x0=x0), x0 + 2 * z1)
    rng = np.random.default_rng(18)
    Z = rng.standard_normal((9, 4))
    y = rng.standard_normal(4)
    np.testing.assert_allclose(assemble_solution(list(Z.T), y), Z @ y, rtol=1e-14, atol=1e-14)
    with pytest.raises(DimensionMismatch):
        assemble_solution([], [], mode="fixed")
    with pytest.raises(DimensionMismatch):
        assemble_solution([z1], [1.0], mode="fixed")
    double = assemble_solution([z1], [1.0], mode="fixed", precondition=lambda u: 2 * u)
    np.testing.assert_array_equal(double, 2 * z1)


def test_ab_gmres_identity():
    b = np.arange(1.0, 7.0)
    rep = ab_gmres(SparseMatrix.identity(6), b, SolverConfig(method="nesor", omega=1.0, ell_max=1))
    assert rep.converged and rep.outer_iters == 1
    np.testing.assert_allclose(rep.x, b, rtol=1e-15)


def test_ab_gmres_minimum_norm():
    A, b, x_mn = dense_problem(40, 25, 15, seed=19)
    rep = ab_gmres(A, b, SolverConfig(method="nesor", omega=1.2, ell_max=5))
    assert rep.converged and rep.relres_direct <= 1e-6
    assert np.linalg.norm(rep.x - x_mn) / np.linalg.norm(x_mn) <= 1e-6


def test_config_rejects_bad_values():
    with pytest.raises(DomainError):
        SolverConfig(method="nesor", omega=2.5)
    with pytest.raises(DomainError):
        ab_gmres(SparseMatrix.identity(2), np.ones(2), SolverConfig(method="gk", omega=1.0, ell_max=1))
    with pytest.raises(DimensionMismatch):
        fab_gmres(SparseMatrix.identity(2), np.ones(3))
    with pytest.raises(DimensionMismatch):
        fgmres_square(SparseMatrix.from_dense(np.ones((2, 3))), np.ones(2))


@pytest.mark.parametrize("method", ["gk", "rk", "grk", "nesor"])
def test_fab_gmres_identity_single_step(method):
    b = np.random.default_rng(20).standard_normal(8)
    cfg = SolverConfig(method=method, omega=1.0, ell_max=400, inner_floor=1e-12, inner_decay=1e-16)
    rep = fab_gmres(SparseMatrix.identity(8), b, cfg)
    assert rep.converged and rep.outer_iters == 1
    np.testing.assert_allclose(rep.x, b, rtol=1e-12)


def test_fab_gmres_tuned_minimum_norm():
    A, b, x_mn = dense_problem(60, 40, 30, seed=21)
    # the solution error is bounded by cond(A) * relres, so ask for a tighter residual
    rep = fab_gmres(A, b, SolverConfig(method="grk", omega=1.0, seed=4, tol=1e-8))
    assert rep.converged and rep.tuning is not None
    assert rep.ell_max_used == rep.tuning["ell_max"]
    assert np.linalg.norm(rep.x - x_mn) / np.linalg.norm(x_mn) <= 1e-6


def test_zero_rhs_returns_x0():
    rep = fab_gmres(SparseMatrix.identity(3), np.zeros(3), SolverConfig(omega=1.0, ell_max=2))
    assert rep.converged and rep.outer_iters == 0
    np.testing.assert_array_equal(rep.x, 0.0)


def _dominant_row_problem():
    # one greedy projection always lands on row 0, so z_2 repeats the direction of z_1
    A = SparseMatrix.from_dense(np.diag([10.0, 1.0, 1.0]))
    return A, np.array([5.0, 1.0, 1.0])


def test_dependent_column_without_retry_raises():
    A, b = _dominant_row_problem()
    cfg = SolverConfig(method="gk", omega=1.0, ell_max=1, retry_singular=False, tol=1e-10)
    with pytest.raises(BreakdownWithSingularH) as info:
        fab_gmres(A, b, cfg)
    rep = info.value.report
    assert rep is not None and rep.breakdown and not rep.converged
    # best iterate from the truncated least-squares problem is still better than x0
    assert np.linalg.norm(b - matvec(A, rep.x)) < np.linalg.norm(b)


def test_dependent_column_retry_recovers():
    A, b = _dominant_row_problem()
    rep = fab_gmres(A, b, SolverConfig(method="gk", omega=1.0, ell_max=1, tol=1e-10))
    assert rep.converged and rep.retried_steps
    assert rep.relres_direct <= 1e-10


def test_residual_gap_is_not_reported_as_converged(monkeypatch):
    real = outer._run_outer

    def lying(*args, **kw):
        out = real(*args, **kw)
        out["x"] = out["x"] + 1.0
        return out

    monkeypatch.setattr(outer, "_run_outer", lying)
    with pytest.warns(ResidualGapWarning):
        rep = fab_gmres(SparseMatrix.identity(4), np.ones(4), SolverConfig(omega=1.0, ell_max=4))
    assert not rep.converged


def test_report_serialises():
    A, b, _ = dense_problem(20, 12, 8, seed=22)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = fab_gmres(A, b, SolverConfig(method="rk", seed=1))
    data = json.loads(json.dumps(rep.to_dict()))
    assert data["outer_iters"] == rep.outer_iters
    assert data["total_inner"] == sum(rep.per_step_inner)
    assert len(data["relres_history"]) == rep.outer_iters + 1
    hist = np.asarray(rep.relres_history)
    assert np.all(np.diff(hist) <= 1e-12)
    assert abs(hist[-1] - rep.relres_direct) <= 1e-8


def test_best_iterate_ignores_a_poisoned_candidate():
    A, b, _ = dense_problem(30, 20, 20, seed=23)
    rep = fab_gmres(A, b, SolverConfig(method="gk", omega=1.0, ell_max=20, tol=1e-10), keep_basis=True)
    state, k = rep.arnoldi, rep.outer_iters
    x0 = np.zeros(A.ncols)

    def assemble(j, y):
        return assemble_solution(state.Z[:j], y, x0=x0)

    scale = np.linalg.norm(b)
    bad = rep.x + 100.0
    x, rel = outer._best_iterate(A, b, x0, state, k, assemble, scale, [(bad, np.linalg.norm(b - matvec(A, bad)) / scale)])
    assert rel <= 1e-9
    assert rel == pytest.approx(np.linalg.norm(b - matvec(A, x)) / scale)
