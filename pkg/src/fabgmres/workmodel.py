"""Floating-point work model for greedy Kaczmarz with and without a stored Gram matrix.

GK recomputes the residual ``v - A z`` before each selection; MGK forms
``C = A A^T`` once and updates the residual with one column of ``C`` per
projection. The formulas count the model's work units:

* selection: one residual recomputation, ``nnz(A)`` (``m n`` when dense);
* projection: ``nnz`` of the selected row (``n`` when dense);
* residual update: ``nnz`` of the selected column of ``C`` (``m`` when dense);
* Gram build: ``nnz(A) * m``, i.e. ``q m^2`` (``m^2 n`` when dense).

Live :class:`FlopCounter` instances charge exactly these units, so instrumented
dense runs reproduce the closed forms as integers.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError, NoCrossover


@dataclass
class FlopCounter:
    selection_flops: int = 0
    projection_flops: int = 0
    residual_update_flops: int = 0
    gram_build_flops: int = 0

    def add(self, counts) -> None:
        sel, proj, upd, gram = (int(c) for c in counts)
        if min(sel, proj, upd, gram) < 0:
            raise ValueError("flop counters only increase")
        self.selection_flops += sel
        self.projection_flops += proj
        self.residual_update_flops += upd
        self.gram_build_flops += gram

    @property
    def total(self) -> int:
        return self.selection_flops + self.projection_flops + self.residual_update_flops + self.gram_build_flops

    def snapshot(self) -> dict:
        return asdict(self)


def _positive_ints(**kw):
    for name, val in kw.items():
        if int(val) != val or val < 1:
            raise DomainError(f"{name} must be a positive integer, got {val}")
    return [int(v) for v in kw.values()]


def w_gk_dense(k, ell, m, n) -> int:
    k, ell, m, n = _positive_ints(k=k, ell=ell, m=m, n=n)
    return k * ell * (m * n + n)


def w_mgk_dense(k, ell, m, n) -> int:
    k, ell, m, n = _positive_ints(k=k, ell=ell, m=m, n=n)
    return m * m * n + k * ell * (m + n)


def crossover_dense(m, n) -> float:
    """Value of ``k*ell`` above which MGK needs less dense work than GK."""
    if n < 2:
        raise DomainError("the dense crossover needs n >= 2")
    if m < 1:
        raise DomainError("m must be positive")
    return m * (1.0 + 1.0 / (n - 1))


def w_gk_sparse(k, ell, m, q) -> float:
    return k * ell * q * (m + 1)


def w_mgk_sparse(k, ell, m, q, p) -> float:
    return q * m * m + k * ell * (q + m * p)


def crossover_sparse(m, q, p) -> float:
    if q <= p:
        raise NoCrossover(f"q={q} <= p={p}: the stored Gram matrix never pays off")
    return m * (1.0 + p / (q - p))


def predicted_gram_density(m, n, d) -> float:
    """Expected fraction of nonzeros in ``A A^T`` for a uniformly random pattern of density ``d``."""
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"density d={d} outside [0, 1]")
    if m < 1 or n < 1:
        raise DomainError("m and n must be positive")
    if d == 1.0:
        return 1.0
    p = 1.0 - (1.0 + 1.0 / m) * (1.0 - d * d) ** n + (1.0 / m) * (1.0 - d) ** n
    return min(1.0, max(0.0, p))


def workmodel_row(m, n, d, p_actual=None, nnz=None) -> dict:
    """One row of the density/crossover table for an m-by-n matrix of density d."""
    q = nnz / m if nnz is not None else d * n
    p_est = predicted_gram_density(m, n, d)
    row = {
        "m": m,
        "n": n,
        "d": d,
        "q": q,
        "p_estimated": p_est,
        "p_actual": p_actual if p_actual is not None else math.nan,
        "crossover_dense": crossover_dense(m, n) if n >= 2 else math.nan,
    }
    for label, p in (("estimated", p_est), ("actual", p_actual)):
        try:
            row[f"crossover_sparse_{label}"] = crossover_sparse(m, q, p) if p is not None else math.nan
        except NoCrossover:
            row[f"crossover_sparse_{label}"] = math.inf
    return row
