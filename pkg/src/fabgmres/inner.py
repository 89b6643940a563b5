"""Kaczmarz-type inner iterations used as the preconditioner ``z = B v``.

Four row-selection rules are supported: cyclic sweeps (NE-SOR), greedy
(largest residual entry), randomized (row-norm weighted) and greedy
randomized. All of them start from ``z = 0`` so the iterate stays in the row
space of ``A``.

Budget units follow each method's own loop index: one projection for
GK/RK/GRK, one full sweep of ``m`` projections for NE-SOR. Budgets passed
to :func:`run_inner` are always in projections.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DimensionMismatch, DomainError, ZeroResidual, ZeroRow
from .sparsela import GramMatrix, SparseMatrix
from .workmodel import FlopCounter


class Method(str, enum.Enum):
    NESOR = "nesor"
    GK = "gk"
    RK = "rk"
    GRK = "grk"

    @property
    def code(self) -> int:
        return {"nesor": K.NESOR, "gk": K.GK, "rk": K.RK, "grk": K.GRK}[self.value]

    @property
    def randomized(self) -> bool:
        return self in (Method.RK, Method.GRK)


def check_omega(omega: float) -> float:
    omega = float(omega)
    if not 0.0 < omega < 2.0:
        raise DomainError(f"relaxation parameter omega={omega} must lie in (0, 2)")
    return omega


@dataclass(frozen=True)
class InnerMethod:
    tag: Method
    omega: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "tag", Method(self.tag))
        object.__setattr__(self, "omega", check_omega(self.omega))


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; child streams come from ``np.random.SeedSequence.spawn``."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class InnerState:
    """Iterate ``z`` and residual ``s = v - A z`` of one inner solve."""

    z: np.ndarray
    s: np.ndarray
    v: np.ndarray
    rng: np.random.Generator | None = None
    projections_done: int = 0

    @classmethod
    def start(cls, A: SparseMatrix, v, seed=None) -> "InnerState":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (A.nrows,):
            raise DimensionMismatch(f"right-hand side has shape {v.shape}, expected ({A.nrows},)")
        rng = make_rng(seed) if seed is not None else None
        return cls(z=np.zeros(A.ncols), s=v.copy(), v=v.copy(), rng=rng)

    def refresh(self, A: SparseMatrix) -> None:
        K.residual_into(A.row_ptr, A.col_idx, A.values, self.z, self.v, self.s)

    def true_residual(self, A: SparseMatrix) -> np.ndarray:
        out = np.empty_like(self.s)
        K.residual_into(A.row_ptr, A.col_idx, A.values, self.z, self.v, out)
        return out


# ---------------------------------------------------------------------------
# single steps


def kaczmarz_project(state: InnerState, i: int, A: SparseMatrix, omega: float) -> InnerState:
    """Relaxed projection of ``z`` onto the hyperplane of row ``i``.

    Uses ``state.s[i]`` as the current residual entry and leaves ``s``
    untouched; follow with :func:`residual_update` (or ``state.refresh``).
    """
    rn = A.row_norms_sq[i]
    if rn <= 0.0:
        raise ZeroRow(f"row {i} is empty")
    K.project(A.row_ptr, A.col_idx, A.values, state.z, int(i), omega * state.s[i] / rn)
    state.projections_done += 1
    return state


def residual_update(state: InnerState, i: int, C: GramMatrix, omega: float) -> InnerState:
    """``s <- s - omega * s_i / C_ii * C[:, i]``, the residual after a relaxed projection."""
    Cd, Cp, Ci, Cx, mode = _gram_arrays(C)
    K.gram_update(state.s, int(i), omega * state.s[i] / C.diag[i], mode, Cd, Cp, Ci, Cx)
    return state


def select_gk(s) -> int:
    s = np.asarray(s, dtype=np.float64)
    i = K.select_gk(s)
    if i < 0:
        raise ZeroResidual("greedy selection on a zero residual")
    return int(i)


def select_rk(rng: np.random.Generator, A: SparseMatrix) -> int:
    return int(K.select_rk(rng, A.row_norms_cumsum))


def grk_candidates(s, A: SparseMatrix) -> tuple[float, np.ndarray]:
    """Return ``(eps_p, mask of U_p)`` for the greedy randomized rule."""
    s = np.asarray(s, dtype=np.float64)
    weights = np.empty(A.nrows)
    member = np.empty(A.nrows, dtype=bool)
    eps, _, arg = K.grk_candidates(s, A.row_norms_sq, A.frobenius_sq, weights, member)
    if arg < 0:
        raise ZeroResidual("greedy randomized selection on a zero residual")
    assert member.any()
    return float(eps), member


def select_grk(rng: np.random.Generator, state_or_s, A: SparseMatrix) -> int:
    s = state_or_s.s if isinstance(state_or_s, InnerState) else np.asarray(state_or_s, dtype=np.float64)
    weights = np.empty(A.nrows)
    member = np.empty(A.nrows, dtype=bool)
    i = K.select_grk(rng, s, A.row_norms_sq, A.frobenius_sq, weights, member)
    if i < 0:
        raise ZeroResidual("greedy randomized selection on a zero residual")
    return int(i)


# ---------------------------------------------------------------------------
# full inner solve

_EMPTY_F2 = np.empty((0, 0))
_EMPTY_F = np.empty(0)
_EMPTY_I = np.empty(0, dtype=np.int64)


def _gram_arrays(C: GramMatrix | None):
    if C is None:
        return _EMPTY_F2, _EMPTY_I, _EMPTY_I, _EMPTY_F, K.GRAM_NONE
    if C.is_dense:
        return C.dense, _EMPTY_I, _EMPTY_I, _EMPTY_F, K.GRAM_DENSE
    return _EMPTY_F2, C.col_ptr, C.row_idx, C.data, K.GRAM_SPARSE


@dataclass
class InnerResult:
    z: np.ndarray
    projections: int
    residual_norm: float
    s: np.ndarray = field(repr=False, default=None)


def run_inner(
    method: InnerMethod,
    A: SparseMatrix,
    v,
    *,
    budget: int,
    stop_threshold: float,
    C: GramMatrix | None = None,
    rng: np.random.Generator | None = None,
    counter: FlopCounter | None = None,
) -> InnerResult:
    """Apply Kaczmarz-type iterations to ``A z = v`` starting from ``z = 0``.

    Stops at the first checkpoint where ``||v - A z|| <= stop_threshold * ||v||``
    or after ``budget`` projections. ``stop_threshold=0`` runs the full budget
    (a fixed preconditioner). Checkpoints: every projection when the residual
    is available (GK/GRK always, RK with ``C``), every ``m`` projections for RK
    without ``C``, every sweep for NE-SOR.

    GK and GRK without ``C`` recompute ``v - A z`` before every selection.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (A.nrows,):
        raise DimensionMismatch(f"right-hand side has shape {v.shape}, expected ({A.nrows},)")
    if budget < 1:
        raise DomainError("inner budget must be at least one projection")
    if not 0.0 <= stop_threshold <= 1.0:
        raise DomainError(f"stop threshold {stop_threshold} outside [0, 1]")
    if np.any(A.row_norms_sq <= 0.0):
        raise ZeroRow("matrix has empty rows; call drop_zero_rows first")
    tag = method.tag
    if tag is Method.NESOR:
        C = None
    if rng is None:
        rng = make_rng(0)
    Cd, Cp, Ci, Cx, mode = _gram_arrays(C)
    Cdiag = C.diag if C is not None else _EMPTY_F
    counts = np.zeros(4, dtype=np.int64)
    m = A.nrows
    vnorm = float(np.sqrt(K.sum_sq(v)))
    z, s, proj, resnorm = K.run_kernel(
        tag.code, method.omega, A.row_ptr, A.col_idx, A.values, A.ncols,
        A.row_norms_sq, A.row_norms_cumsum, A.frobenius_sq, v,
        int(budget), stop_threshold * vnorm, m, 10 * m,
        mode, Cd, Cp, Ci, Cx, Cdiag, rng, counts,
    )
    if counter is not None:
        counter.add(counts)
    return InnerResult(z=z, projections=int(proj), residual_norm=float(resnorm), s=s)
