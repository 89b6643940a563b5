import numpy as np
import pytest

from conftest import dense_problem
from fabgmres import CapReached, DomainError, SparseMatrix, ZeroRhs, tune
from fabgmres import tuning
from fabgmres.inner import InnerResult


def test_identity_gk():
    res = tune(SparseMatrix.identity(3), np.ones(3), "gk", eta=0.1)
    assert res.ell_max == 3
    assert res.omega_opt == 1.0
    assert res.residual_at_omega[9] == 0.0


def test_zero_rhs():
    with pytest.raises(ZeroRhs):
        tune(SparseMatrix.identity(3), np.zeros(3), "rk")


def test_bad_eta():
    with pytest.raises(DomainError):
        tune(SparseMatrix.identity(3), np.ones(3), "rk", eta=1.5)


def test_grid_has_nineteen_runs(monkeypatch):
    calls = []
    real = tuning.run_inner

    def spy(*args, **kw):
        calls.append(kw["stop_threshold"])
        return real(*args, **kw)

    monkeypatch.setattr(tuning, "run_inner", spy)
    A, b, _ = dense_problem(30, 20, 20, seed=1)
    res = tune(A, b, "grk", seed=2)
    assert len(calls) == 20  # phase 1 plus the grid
    assert calls[1:] == [0.0] * 19
    assert res.omega_grid == [round(0.1 * i, 1) for i in range(1, 20)]
    assert len(res.residual_at_omega) == 19


@pytest.mark.filterwarnings("ignore::fabgmres.CapReached")
def test_ties_pick_smallest_omega(monkeypatch):
    def flat(method, A, v, **kw):
        return InnerResult(z=np.zeros(A.ncols), projections=kw["budget"], residual_norm=float(np.linalg.norm(v)))

    monkeypatch.setattr(tuning, "run_inner", flat)
    res = tune(SparseMatrix.identity(4), np.ones(4), "rk", cap=7)
    assert res.omega_opt == 0.1
    assert len(set(res.residual_at_omega)) == 1


@pytest.mark.parametrize("method", ["nesor", "gk", "rk", "grk"])
def test_repeatable(method):
    A, b, _ = dense_problem(25, 15, 12, seed=3)
    one, two = tune(A, b, method, seed=9), tune(A, b, method, seed=9)
    assert one.residual_at_omega == two.residual_at_omega
    assert (one.ell_max, one.omega_opt, one.phase1_projections) == (two.ell_max, two.omega_opt, two.phase1_projections)


def test_nesor_counts_sweeps():
    A, b, _ = dense_problem(25, 15, 12, seed=4)
    res = tune(A, b, "nesor")
    assert res.phase1_projections % 25 == 0
    assert res.ell_max == res.phase1_projections // 25
    assert res.checkpoints == "every sweep"


def test_cap_reached_warns():
    A, b, _ = dense_problem(25, 15, 12, seed=5)
    with pytest.warns(CapReached):
        res = tune(A, b, "rk", eta=1e-6, cap=10)
    assert res.cap_reached and res.ell_max == 10


def test_to_dict_fields():
    res = tune(SparseMatrix.identity(3), np.ones(3), "gk")
    d = res.to_dict()
    assert set(d) >= {"ell_max", "omega_opt", "omega_grid", "residual_at_omega", "seconds"}
