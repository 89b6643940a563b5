"""Seeded synthetic test problems.

``random_ill_conditioned`` starts from a sparse matrix whose nonzero singular
values are geometrically spaced between 1 and ``1/kappa`` and applies random
plane rotations to rows and columns until the requested density is reached.
Rotations are orthogonal, so the singular values (and the rank) of the seed
survive up to rounding while the support spreads out.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InfeasibleDensity
from .sparsela import SparseMatrix, matvec, write_matrix_market

# dense SVD check of the achieved condition number up to this many entries
MEASURE_LIMIT = 500_000


@dataclass(frozen=True)
class ProblemSpec:
    m: int
    n: int
    density: float
    kappa: float = 1.0
    rank: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DomainError("m and n must be positive")
        if not 0.0 < self.density <= 1.0:
            raise DomainError(f"density {self.density} outside (0, 1]")
        if self.kappa < 1.0:
            raise DomainError(f"kappa {self.kappa} must be >= 1")
        if self.rank is not None and not 1 <= self.rank <= min(self.m, self.n):
            raise DomainError(f"rank {self.rank} outside [1, min(m, n)]")

    @property
    def effective_rank(self) -> int:
        return self.rank if self.rank is not None else min(self.m, self.n)

    def header(self) -> dict:
        return {f"spec.{k}": v for k, v in asdict(self).items()}


def singular_values(spec: ProblemSpec) -> np.ndarray:
    r = spec.effective_rank
    if r == 1:
        return np.ones(1)
    return spec.kappa ** (-np.arange(r) / (r - 1))


def _angle(rng):
    theta = rng.uniform(0.0, 2.0 * np.pi)
    return np.cos(theta), np.sin(theta)


def _group_factor(rng, size: int, r: int, active: int) -> tuple[np.ndarray, np.ndarray]:
    """``size x r`` matrix with orthonormal columns whose rows each touch at most one column.

    The first ``active`` (shuffled) indices are spread over the ``r`` groups as
    evenly as possible; the rest stay zero.
    """
    idx = rng.permutation(size)[:active]
    groups = np.arange(active) % r
    F = np.zeros((size, r))
    F[idx, groups] = rng.standard_normal(active)
    F /= np.linalg.norm(F, axis=0)
    return F, idx


def random_ill_conditioned(spec: ProblemSpec) -> SparseMatrix:
    """Sparse ``m x n`` matrix with prescribed nonzero singular values and approximate density.

    The seed ``S diag(sigma) T^T`` uses factors with orthonormal, row-disjoint
    columns, so it already has the exact spectrum and no zero rows when the
    density allows. Rounds of random plane rotations over perfect matchings of
    the rows and of the columns then spread the support until the target
    number of nonzeros is reached.
    """
    m, n = spec.m, spec.n
    r = spec.effective_rank
    target = int(round(spec.density * m * n))
    if target < r:
        raise InfeasibleDensity(f"{target} nonzeros cannot carry rank {r}")
    rng = np.random.default_rng(spec.seed)
    sig = singular_values(spec)
    # seed nnz is about m_act * n_act / r; shrink columns first, then rows
    m_act, n_act = m, n
    while m_act * n_act > target * r and n_act > r:
        n_act = max(r, target * r // m_act)
    while m_act * n_act > target * r and m_act > r:
        m_act = max(r, target * r // n_act)
    S, _ = _group_factor(rng, m, r, m_act)
    T, _ = _group_factor(rng, n, r, n_act)
    M = (S * sig) @ T.T

    def rotate(i, j, axis):
        c, s = _angle(rng)
        if axis == 0:
            a, b = M[i].copy(), M[j]
            M[i] = c * a + s * b
            M[j] = -s * a + c * b
        else:
            a, b = M[:, i].copy(), M[:, j]
            M[:, i] = c * a + s * b
            M[:, j] = -s * a + c * b

    nnz = int(np.count_nonzero(M))
    while nnz < target:
        rows = rng.permutation(m) if m > 1 else np.empty(0, dtype=np.int64)
        cols = rng.permutation(n) if n > 1 else np.empty(0, dtype=np.int64)
        pairs = [(0, rows[k], rows[k + 1]) for k in range(0, len(rows) - 1, 2)]
        pairs += [(1, cols[k], cols[k + 1]) for k in range(0, len(cols) - 1, 2)]
        if not pairs:
            break
        for p in rng.permutation(len(pairs)):
            axis, i, j = pairs[p]
            line = (M[[i, j]] if axis == 0 else M[:, [i, j]])
            before = np.count_nonzero(line)
            rotate(i, j, axis)
            line = (M[[i, j]] if axis == 0 else M[:, [i, j]])
            nnz += np.count_nonzero(line) - before
            if nnz >= target:
                break
    meta = {"spec": asdict(spec), "singular_values_max": float(sig[0]), "singular_values_min": float(sig[-1])}
    if m * n <= MEASURE_LIMIT:
        s = np.linalg.svd(M, compute_uv=False)[:r]
        meta["kappa_measured"] = float(s[0] / s[-1])
    return SparseMatrix.from_dense(M, meta=meta)


def sprandn(m: int, n: int, density: float, seed: int = 0) -> SparseMatrix:
    """Uniformly random sparsity pattern with standard normal values."""
    rng = np.random.default_rng(seed)
    M = sp.random(m, n, density=density, format="csr", random_state=rng, data_rvs=rng.standard_normal)
    return SparseMatrix.from_scipy(M, meta={"spec": {"m": m, "n": n, "density": density, "seed": seed}})


def rank_deficient(m: int, n: int, rank: int, seed: int = 0, density: float = 1.0) -> SparseMatrix:
    """Product of two Gaussian factors: rank exactly ``rank`` with probability one."""
    rng = np.random.default_rng(seed)
    if not 1 <= rank <= min(m, n):
        raise DomainError("rank outside [1, min(m, n)]")
    L = rng.standard_normal((m, rank))
    R = rng.standard_normal((rank, n))
    if density < 1.0:
        R *= rng.random((rank, n)) < density
    return SparseMatrix.from_dense(L @ R, meta={"rank": rank, "seed": seed})


def make_consistent_rhs(A: SparseMatrix, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``x_star ~ N(0, I)`` and ``b = A x_star``, so ``b`` lies in the range of ``A``."""
    rng = np.random.default_rng(seed)
    x_star = rng.standard_normal(A.ncols)
    return matvec(A, x_star), x_star


def write_problem(path, A: SparseMatrix, spec: ProblemSpec | None = None) -> None:
    header = spec.header() if spec is not None else {}
    write_matrix_market(path, A, header=header)
