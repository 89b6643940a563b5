"""Automatic choice of the inner budget ``ell_max`` and relaxation ``omega``.

Phase 1 runs the inner method alone on ``A z = b`` with ``omega = 1`` until
``||b - A z|| <= eta ||b||``; the iteration count becomes ``ell_max``. Phase 2
reruns exactly ``ell_max`` iterations for each ``omega`` on the grid
0.1, 0.2, ..., 1.9 and keeps the one with the smallest final residual.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CapReached, DomainError, ZeroRhs
from .inner import InnerMethod, Method, make_rng, run_inner
from .sparsela import GramMatrix, SparseMatrix, matvec
from .workmodel import FlopCounter

OMEGA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 20))
CAP_FACTOR = 50


@dataclass
class TuningResult:
    method: str
    ell_max: int
    omega_opt: float
    eta: float
    residual_at_omega: list
    seconds: float
    phase1_projections: int
    cap_reached: bool = False
    checkpoints: str = ""
    omega_grid: list = field(default_factory=lambda: list(OMEGA_GRID))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "ell_max": int(self.ell_max),
            "omega_opt": float(self.omega_opt),
            "eta": float(self.eta),
            "omega_grid": [float(w) for w in self.omega_grid],
            "residual_at_omega": [float(r) for r in self.residual_at_omega],
            "seconds": float(self.seconds),
            "phase1_projections": int(self.phase1_projections),
            "cap_reached": bool(self.cap_reached),
            "checkpoints": self.checkpoints,
        }


def _checkpoint_schedule(method: Method, C) -> str:
    if method is Method.NESOR:
        return "every sweep"
    if method in (Method.GK, Method.GRK) or C is not None:
        return "every projection"
    return "every m projections"


def tune(
    A: SparseMatrix,
    b,
    method,
    *,
    eta: float = 0.1,
    cap: int | None = None,
    seed: int = 0,
    C: GramMatrix | None = None,
    counter: FlopCounter | None = None,
) -> TuningResult:
    """Pick ``ell_max`` (projections; sweeps for NE-SOR) and ``omega_opt`` for ``method``.

    ``cap`` bounds phase 1 in projections (default ``50 * m``). Hitting it
    issues :class:`CapReached` and uses the cap as ``ell_max``. Each grid run
    restarts the generator from ``seed`` so only ``omega`` differs between runs.
    """
    method = Method(method)
    b = np.asarray(b, dtype=np.float64)
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta={eta} must lie in (0, 1)")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        raise ZeroRhs("cannot tune on a zero right-hand side")
    m = A.nrows
    cap = CAP_FACTOR * m if cap is None else int(cap)
    if cap < 1:
        raise DomainError("cap must be at least one projection")
    t0 = time.perf_counter()

    first = run_inner(
        InnerMethod(method, 1.0), A, b, budget=cap, stop_threshold=eta, C=C, rng=make_rng(seed), counter=counter
    )
    reached = first.residual_norm <= eta * bnorm
    proj = first.projections
    if method is Method.NESOR:
        ell = max(1, proj // m)
        budget = ell * m
    else:
        ell = max(1, proj)
        budget = ell
    if not reached:
        warnings.warn(
            f"{method.value}: residual {first.residual_norm / bnorm:.3e} > eta={eta} after the cap of {cap} projections",
            CapReached,
        )

    residuals = []
    for omega in OMEGA_GRID:
        res = run_inner(
            InnerMethod(method, omega), A, b, budget=budget, stop_threshold=0.0, C=C,
            rng=make_rng(seed), counter=counter,
        )
        residuals.append(float(np.linalg.norm(b - matvec(A, res.z))))
    best = int(np.argmin(residuals))  # first minimum: smallest omega on ties
    return TuningResult(
        method=method.value,
        ell_max=ell,
        omega_opt=OMEGA_GRID[best],
        eta=eta,
        residual_at_omega=residuals,
        seconds=time.perf_counter() - t0,
        phase1_projections=proj,
        cap_reached=not reached,
        checkpoints=_checkpoint_schedule(method, C),
    )
