"""Outer Krylov iterations in the m-dimensional residual space.

``ab_gmres`` keeps a fixed inner preconditioner (NE-SOR with the same sweep
count and relaxation every step) and applies it once more to ``V_k y_k`` at
the end. ``fab_gmres`` is the flexible variant: each outer step runs a
Kaczmarz-type engine with its own stopping threshold, stores the result in
``Z`` and assembles ``x_k = x_0 + Z_k y_k``.

Both minimise ``||beta e_1 - Hbar_k y||`` with Givens rotations updated one
column at a time; no restarts.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BreakdownWithSingularH,
    DimensionMismatch,
    DomainError,
    ResidualGapWarning,
    SingularTriangular,
    StagnationWarning,
)
from .inner import InnerMethod, Method, check_omega, make_rng, run_inner
from .sparsela import GramMatrix, SparseMatrix, gram, matvec, matvec_transpose
from .workmodel import FlopCounter

BREAKDOWN_TOL = 1e-14
REORTH_RATIO = 0.7
SINGULAR_TOL = 1e-14
# a new rotated diagonal below this fraction of ||A z_k|| marks z_k as dependent
DEPENDENCE_TOL = 1e-8
REPORT_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Givens least squares


def _rotation(a: float, b: float) -> tuple[float, float, float]:
    r = float(np.hypot(a, b))
    if r == 0.0:
        return 1.0, 0.0, 0.0
    return a / r, b / r, r


def _back_substitute(R: list[np.ndarray], g: np.ndarray, hnorm: float) -> np.ndarray:
    """Solve the k-by-k upper triangular system stored column-wise (``R[j][i]`` is entry (i, j))."""
    k = len(R)
    y = np.zeros(k)
    for j in range(k - 1, -1, -1):
        rjj = R[j][j]
        if abs(rjj) <= SINGULAR_TOL * hnorm:
            raise SingularTriangular(f"rotated diagonal entry {j} is {rjj:.3e} (||H|| = {hnorm:.3e})")
        acc = g[j]
        for i in range(j + 1, k):
            acc -= R[i][j] * y[i]
        y[j] = acc / rjj
    return y


def hessenberg_lsq(Hbar, beta: float) -> tuple[np.ndarray, float]:
    """Least-squares solution of ``min ||beta e_1 - Hbar y||`` for a (k+1)-by-k Hessenberg ``Hbar``."""
    Hbar = np.atleast_2d(np.asarray(Hbar, dtype=np.float64))
    k1, k = Hbar.shape
    if k1 != k + 1:
        raise DimensionMismatch(f"Hessenberg block must be (k+1)-by-k, got {Hbar.shape}")
    g = np.zeros(k + 1)
    g[0] = beta
    cs, sn, R = [], [], []
    for j in range(k):
        col = Hbar[: j + 2, j].copy()
        for i in range(j):
            a, b = col[i], col[i + 1]
            col[i] = cs[i] * a + sn[i] * b
            col[i + 1] = -sn[i] * a + cs[i] * b
        c, s, r = _rotation(col[j], col[j + 1])
        col[j], col[j + 1] = r, 0.0
        cs.append(c)
        sn.append(s)
        g[j + 1] = -s * g[j]
        g[j] = c * g[j]
        R.append(col)
    y = _back_substitute(R, g, float(np.linalg.norm(Hbar)))
    return y, abs(g[k])


# ---------------------------------------------------------------------------
# Arnoldi


@dataclass
class ArnoldiStep:
    h: np.ndarray  # coefficients h_{1..k+1, k}
    h_next: float
    breakdown: bool


@dataclass
class ArnoldiState:
    """Orthonormal basis ``V``, flexible basis ``Z`` and the rotated Hessenberg factor."""

    beta: float
    V: list = field(default_factory=list)
    Z: list = field(default_factory=list)
    H: list = field(default_factory=list)  # column j has length j+2
    R: list = field(default_factory=list)  # rotated columns, length j+1 used
    cs: list = field(default_factory=list)
    sn: list = field(default_factory=list)
    g: list = field(default_factory=list)
    hnorm_sq: float = 0.0
    tail: np.ndarray | None = None  # unnormalised w at breakdown

    @classmethod
    def start(cls, r0: np.ndarray) -> "ArnoldiState":
        beta = float(np.linalg.norm(r0))
        return cls(beta=beta, V=[r0 / beta], g=[beta])

    @property
    def k(self) -> int:
        return len(self.H)

    @property
    def residual_norm(self) -> float:
        return abs(self.g[-1])

    def hbar(self) -> np.ndarray:
        k = self.k
        out = np.zeros((k + 1, k))
        for j, col in enumerate(self.H):
            out[: j + 2, j] = col
        return out

    def solve(self, k: int | None = None) -> np.ndarray:
        """Coefficients ``y_k`` from the rotated factor (``k`` defaults to all columns)."""
        k = self.k if k is None else k
        rows = [c[: k] for c in self.R[:k]]
        return _back_substitute(rows, np.asarray(self.g[:k]), float(np.sqrt(self.hnorm_sq)))

    def last_column_dependent(self, tol: float = DEPENDENCE_TOL) -> bool:
        """Whether the newest column is numerically a combination of the earlier ones."""
        if not self.R:
            return False
        return abs(self.R[-1][-1]) <= tol * float(np.linalg.norm(self.H[-1]))

    def undo(self) -> None:
        """Drop the newest column, restoring the state before the last :func:`arnoldi_step`."""
        k = self.k
        if k == 0:
            raise ValueError("nothing to undo")
        h = self.H.pop()
        if self.tail is None:
            self.V.pop()
        self.tail = None
        if len(self.Z) == k:
            self.Z.pop()
        self.hnorm_sq -= float(h @ h)
        c, s = self.cs.pop(), self.sn.pop()
        self.R.pop()
        g_next = self.g.pop()
        self.g[-1] = c * self.g[-1] - s * g_next

    def orthogonality_loss(self) -> float:
        Vm = np.column_stack(self.V)
        G = Vm.T @ Vm
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))

    def relation_error(self, A: SparseMatrix) -> float:
        """``||A Z_k - V_{k+1} Hbar_k||_F`` (with the breakdown remainder in place of ``v_{k+1}``)."""
        k = self.k
        if k == 0:
            return 0.0
        AZ = np.column_stack([matvec(A, z) for z in self.Z[:k]])
        Hb = self.hbar()
        if len(self.V) >= k + 1:
            VH = np.column_stack(self.V[: k + 1]) @ Hb
        else:
            VH = np.column_stack(self.V[:k]) @ Hb[:k]
            VH[:, k - 1] += self.tail
        return float(np.linalg.norm(AZ - VH))


def arnoldi_step(state: ArnoldiState, w, z=None) -> ArnoldiStep:
    """Orthogonalise ``w = A z_k`` against the basis and extend the Givens factorisation.

    Modified Gram-Schmidt with one extra pass when the norm drops below
    ``0.7`` of its starting value. Breakdown is declared when the remainder is
    at most ``1e-14`` times the starting norm; ``v_{k+1}`` is then not formed.
    """
    w = np.array(w, dtype=np.float64)
    k = state.k
    if len(state.V) != k + 1:
        raise DimensionMismatch("Arnoldi state already broke down")
    if w.shape != state.V[0].shape:
        raise DimensionMismatch(f"vector of shape {w.shape} does not match basis {state.V[0].shape}")
    w0 = float(np.linalg.norm(w))
    h = np.zeros(k + 2)
    for i in range(k + 1):
        vi = state.V[i]
        h[i] = w @ vi
        w -= h[i] * vi
    hn = float(np.linalg.norm(w))
    if hn < REORTH_RATIO * w0:
        for i in range(k + 1):
            vi = state.V[i]
            c = w @ vi
            h[i] += c
            w -= c * vi
        hn = float(np.linalg.norm(w))
    h[k + 1] = hn
    breakdown = hn <= BREAKDOWN_TOL * w0 or w0 == 0.0

    state.H.append(h.copy())
    if z is not None:
        state.Z.append(np.asarray(z, dtype=np.float64))
    state.hnorm_sq += float(h @ h)
    if breakdown:
        state.tail = w
    else:
        state.V.append(w / hn)

    col = h.copy()
    for i in range(k):
        a, b = col[i], col[i + 1]
        col[i] = state.cs[i] * a + state.sn[i] * b
        col[i + 1] = -state.sn[i] * a + state.cs[i] * b
    c, s, r = _rotation(col[k], col[k + 1])
    col[k], col[k + 1] = r, 0.0
    state.cs.append(c)
    state.sn.append(s)
    state.R.append(col[: k + 1])
    gk = state.g[k]
    state.g[k] = c * gk
    state.g.append(-s * gk)
    return ArnoldiStep(h=h, h_next=hn, breakdown=breakdown)


def assemble_solution(basis, y, mode: str = "flexible", x0=None, precondition=None) -> np.ndarray:
    """``x0 + Z y`` (flexible) or ``x0 + B (V y)`` (fixed, ``precondition`` applies B)."""
    y = np.asarray(y, dtype=np.float64)
    if basis is None or len(basis) == 0:
        raise DimensionMismatch(f"no basis vectors supplied for {mode} assembly")
    if len(basis) != y.shape[0]:
        raise DimensionMismatch(f"{len(basis)} basis vectors but {y.shape[0]} coefficients")
    u = np.zeros_like(np.asarray(basis[0], dtype=np.float64))
    for yi, bi in zip(y, basis):
        u += yi * bi
    if mode == "fixed":
        if precondition is None:
            raise DimensionMismatch("fixed-mode assembly needs the preconditioner")
        u = precondition(u)
    elif mode != "flexible":
        raise ValueError(f"unknown assembly mode {mode!r}")
    if x0 is not None:
        u = u + x0
    return u


# ---------------------------------------------------------------------------
# configuration and report


@dataclass
class SolverConfig:
    """Outer and inner parameters. ``omega``/``ell_max`` left as ``None`` are tuned.

    ``ell_max`` counts projections for GK/RK/GRK and sweeps for NE-SOR.
    """

    method: Method = Method.GRK
    omega: float | None = None
    ell_max: int | None = None
    tol: float = 1e-6
    max_outer: int = 2000
    inner_floor: float = 1e-1
    inner_decay: float = 0.9
    seed: int = 0
    use_gram: bool = True
    gram_threshold: float = 0.25
    eta: float = 1e-1
    tune_cap: int | None = None
    # redo a flexible step whose z is dependent on earlier ones (full budget, then A^T v)
    retry_singular: bool = True

    def __post_init__(self):
        self.method = Method(self.method)
        if self.omega is not None:
            self.omega = check_omega(self.omega)
        if self.ell_max is not None and int(self.ell_max) < 1:
            raise DomainError("ell_max must be at least 1")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if not 0.0 < self.inner_decay < 1.0:
            raise DomainError("inner_decay must lie in (0, 1)")
        if not 0.0 < self.inner_floor <= 1.0:
            raise DomainError("inner_floor must lie in (0, 1]")
        if self.max_outer < 1:
            raise DomainError("max_outer must be at least 1")


@dataclass
class SolveReport:
    x: np.ndarray
    converged: bool
    outer_iters: int
    total_inner: int
    relres_history: list
    per_step_inner: list
    omega_used: float
    ell_max_used: int
    solver: str = "fab_gmres"
    method: str = "grk"
    relres_direct: float = float("nan")
    step_seconds: list = field(default_factory=list)
    tuning_seconds: float = 0.0
    gram_seconds: float = 0.0
    solve_seconds: float = 0.0
    flops: dict = field(default_factory=dict)
    seed: int = 0
    breakdown: bool = False
    tuning: dict | None = None
    retried_steps: list = field(default_factory=list)
    arnoldi: ArnoldiState | None = field(default=None, repr=False)

    @property
    def total_seconds(self) -> float:
        return self.tuning_seconds + self.gram_seconds + self.solve_seconds

    def to_dict(self, include_x: bool = True) -> dict:
        out = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "solver": self.solver,
            "method": self.method,
            "converged": bool(self.converged),
            "outer_iters": int(self.outer_iters),
            "total_inner": int(self.total_inner),
            "omega_used": float(self.omega_used),
            "ell_max_used": int(self.ell_max_used),
            "relres_history": [float(r) for r in self.relres_history],
            "relres_direct": float(self.relres_direct),
            "per_step_inner": [int(p) for p in self.per_step_inner],
            "step_seconds": [float(t) for t in self.step_seconds],
            "tuning_seconds": self.tuning_seconds,
            "gram_seconds": self.gram_seconds,
            "solve_seconds": self.solve_seconds,
            "total_seconds": self.total_seconds,
            "flops": dict(self.flops),
            "seed": int(self.seed),
            "breakdown": bool(self.breakdown),
            "retried_steps": [int(k) for k in self.retried_steps],
            "tuning": self.tuning,
        }
        if include_x:
            out["x"] = [float(v) for v in self.x]
        return out


# ---------------------------------------------------------------------------
# drivers


def _prepare(A: SparseMatrix, b, x0):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.nrows,):
        raise DimensionMismatch(f"b has shape {b.shape}, expected ({A.nrows},)")
    if x0 is None:
        x0 = np.zeros(A.ncols)
    else:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (A.ncols,):
            raise DimensionMismatch(f"x0 has shape {x0.shape}, expected ({A.ncols},)")
    return b, x0


def _resolve_parameters(A, b, config, C, counter):
    """Fill in omega / ell_max by tuning when the config leaves them open."""
    from .tuning import tune

    if config.omega is not None and config.ell_max is not None:
        return config.omega, int(config.ell_max), 0.0, None
    result = tune(
        A, b, config.method, eta=config.eta, cap=config.tune_cap, seed=config.seed, C=C, counter=counter
    )
    omega = config.omega if config.omega is not None else result.omega_opt
    ell = int(config.ell_max) if config.ell_max is not None else result.ell_max
    return omega, ell, result.seconds, result.to_dict()


def _maybe_gram(A, config, C, counter):
    if C is not None or not config.use_gram or config.method not in (Method.GK, Method.GRK):
        return C, 0.0
    t0 = time.perf_counter()
    C = gram(A, dense_threshold=config.gram_threshold)
    counter.add((0, 0, 0, A.nnz * A.nrows))
    return C, time.perf_counter() - t0


# the recurrence estimate and ||b - A x|| / ||b|| may differ by rounding; beyond this factor it is a failure
DIRECT_SLACK = 10.0
# residuals below this are rounding noise and never count as drift
ROUNDING_FLOOR = 1e3 * np.finfo(np.float64).eps


def _best_iterate(A, b, x0, state, k, assemble, scale, candidates):
    """Smallest direct residual among ``candidates``, rank-revealing solutions and ``x0``.

    Tries the truncated least-squares solution on ``Hbar_k`` and a direct
    least-squares fit of ``r0`` by the columns of ``A Z_k``. The second one
    does not rely on the Arnoldi relation, so it survives a drifted recurrence.
    """
    rhs = np.zeros(k + 1)
    rhs[0] = state.beta
    y = np.linalg.lstsq(state.hbar(), rhs, rcond=DEPENDENCE_TOL)[0]
    options = list(candidates) + [(assemble(k, y), None), (x0.copy(), None)]
    if len(state.Z) >= k:
        Z = np.column_stack(state.Z[:k])
        AZ = np.column_stack([matvec(A, z) for z in state.Z[:k]])
        y = np.linalg.lstsq(AZ, b - matvec(A, x0), rcond=1e-12)[0]
        options.append((x0 + Z @ y, None))
    best = None
    for x, rel in options:
        if rel is None:
            rel = float(np.linalg.norm(b - matvec(A, x))) / scale
        if best is None or rel < best[1]:
            best = (x, rel)
    return best


def _run_outer(A, b, x0, config, apply_inner, flexible, report_kw):
    """Shared Arnoldi / Givens loop. ``apply_inner(k, v, mode)`` returns ``(z, projections)``.

    ``mode`` is ``"adaptive"`` for a normal step. A flexible step whose new
    column is numerically dependent on the previous ones (see
    :data:`DEPENDENCE_TOL`) is redone once with ``"full"`` (whole inner budget,
    no early stop) and then with ``"fallback"`` (``z = A^T v``). If the column
    is still dependent the iteration stops; the truncated least-squares
    solution on ``Hbar_k`` is returned when it meets ``tol`` and reported
    through :class:`BreakdownWithSingularH` otherwise.
    """
    bnorm = float(np.linalg.norm(b))
    scale = bnorm if bnorm > 0 else 1.0
    r0 = b - matvec(A, x0)
    beta = float(np.linalg.norm(r0))
    history = [beta / scale]
    per_step, step_seconds, retried = [], [], []
    t0 = time.perf_counter()
    if beta == 0.0:
        return dict(x=x0.copy(), converged=True, outer_iters=0, history=history, per_step=per_step,
                    step_seconds=step_seconds, state=None, breakdown=False, seconds=0.0, retried=retried)
    state = ArnoldiState.start(r0)
    converged = breakdown = collapsed = stagnation_warned = False
    modes = ("full", "fallback") if flexible and config.retry_singular else ()
    for k in range(1, config.max_outer + 1):
        v = state.V[k - 1]
        z, nproj = apply_inner(k, v, "adaptive")
        step = arnoldi_step(state, matvec(A, z), z)
        for mode in modes:
            if not state.last_column_dependent():
                break
            if mode == modes[0]:
                retried.append(k)
            state.undo()
            z, extra = apply_inner(k, v, mode)
            nproj += extra
            step = arnoldi_step(state, matvec(A, z), z)
        if state.last_column_dependent():
            # z_k adds no usable direction; no later step can repair the factor
            collapsed = breakdown = True
            per_step.append(nproj)
            step_seconds.append(time.perf_counter() - t0)
            break
        per_step.append(nproj)
        history.append(state.residual_norm / scale)
        step_seconds.append(time.perf_counter() - t0)
        if history[-1] <= config.tol:
            converged = True
        if step.breakdown:
            breakdown = True
        if converged or breakdown:
            break
        if not stagnation_warned and k > 50 and abs(history[-51] - history[-1]) <= 1e-15:
            warnings.warn(f"relative residual unchanged over 50 outer steps at k={k}", StagnationWarning)
            stagnation_warned = True

    k = state.k

    def assemble(j, y):
        if j == 0:
            return x0.copy()
        if flexible:
            return assemble_solution(state.Z[:j], y, "flexible", x0=x0)
        return assemble_solution(state.V[:j], y, "fixed", x0=x0, precondition=report_kw["precondition"])

    reason = None
    y = None
    if collapsed:
        reason = f"column {k} is numerically dependent on the previous ones"
    else:
        try:
            y = state.solve(k)
        except SingularTriangular as exc:
            reason = str(exc)
    if reason is None:
        x = assemble(k, y)
        rel = float(np.linalg.norm(b - matvec(A, x))) / scale
        if rel > DIRECT_SLACK * max(history[-1], config.tol, ROUNDING_FLOOR):
            # the recurrence drifted from the true residual (nearly dependent Z_k)
            drifted = rel
            x, rel = _best_iterate(A, b, x0, state, k, assemble, scale, [(x, rel)])
            converged = rel <= config.tol
            warnings.warn(f"estimated residual {history[-1]:.2e} but direct residual {drifted:.2e}; "
                          f"best iterate has {rel:.2e}", ResidualGapWarning)
    if reason is not None:
        x, rel = _best_iterate(A, b, x0, state, k, assemble, scale, [])
        if collapsed:
            history.append(rel)
        if rel <= config.tol:
            return dict(x=x, converged=True, outer_iters=k, history=history, per_step=per_step,
                        step_seconds=step_seconds, state=state, breakdown=True,
                        seconds=time.perf_counter() - t0, retried=retried)
        kw = {kk: vv for kk, vv in report_kw.items() if kk != "precondition"}
        report = SolveReport(
            x=x, converged=False, outer_iters=k, total_inner=int(sum(per_step)),
            relres_history=history, per_step_inner=per_step, relres_direct=rel,
            step_seconds=step_seconds, breakdown=True, arnoldi=state, retried_steps=retried,
            solve_seconds=time.perf_counter() - t0, **kw,
        )
        raise BreakdownWithSingularH(f"breakdown at k={k} with singular H_k: {reason}", report)
    return dict(x=x, converged=converged, outer_iters=k, history=history, per_step=per_step,
                step_seconds=step_seconds, state=state, breakdown=breakdown,
                seconds=time.perf_counter() - t0, retried=retried)


def _finish(A, b, out, report_kw, keep_basis, tuning_seconds, gram_seconds, counter, tol):
    scale = float(np.linalg.norm(b)) or 1.0
    x = out["x"]
    direct = float(np.linalg.norm(b - matvec(A, x))) / scale
    converged = out["converged"]
    if converged and direct > DIRECT_SLACK * tol:
        warnings.warn(f"estimated residual {out['history'][-1]:.2e} but direct residual {direct:.2e}",
                      ResidualGapWarning)
        converged = False
    kw = {kk: vv for kk, vv in report_kw.items() if kk != "precondition"}
    return SolveReport(
        x=x,
        converged=converged,
        outer_iters=out["outer_iters"],
        total_inner=int(sum(out["per_step"])),
        relres_history=out["history"],
        per_step_inner=out["per_step"],
        relres_direct=direct,
        step_seconds=out["step_seconds"],
        tuning_seconds=tuning_seconds,
        gram_seconds=gram_seconds,
        solve_seconds=out["seconds"],
        flops=counter.snapshot(),
        breakdown=out["breakdown"],
        retried_steps=out["retried"],
        arnoldi=out["state"] if keep_basis else None,
        **kw,
    )


def fab_gmres(
    A: SparseMatrix,
    b,
    config: SolverConfig | None = None,
    *,
    C: GramMatrix | None = None,
    x0=None,
    keep_basis: bool = False,
    counter: FlopCounter | None = None,
) -> SolveReport:
    """Flexible AB-GMRES with Kaczmarz-type inner iterations.

    Outer step ``k`` runs the inner engine on ``A z = v_k`` until
    ``||v_k - A z|| <= max(inner_decay**k, inner_floor) * ||v_k||`` or
    ``ell_max`` projections (sweeps for NE-SOR), whichever comes first.

    Raises :class:`BreakdownWithSingularH` (carrying a report with the best
    iterate) if the Arnoldi process breaks down with a singular ``H_k``.
    """
    config = config or SolverConfig()
    b, x0 = _prepare(A, b, x0)
    counter = counter if counter is not None else FlopCounter()
    C, gram_seconds = _maybe_gram(A, config, C, counter)
    omega, ell_max, tuning_seconds, tuning = _resolve_parameters(A, b, config, C, counter)
    method = InnerMethod(config.method, omega)
    budget = ell_max * A.nrows if config.method is Method.NESOR else ell_max
    rng = make_rng(config.seed)

    def apply_inner(k, v, mode):
        if mode == "fallback":
            counter.add((0, A.nnz, 0, 0))
            return matvec_transpose(A, v), A.nrows
        thr = 0.0 if mode == "full" else max(config.inner_decay ** k, config.inner_floor)
        res = run_inner(method, A, v, budget=budget, stop_threshold=thr, C=C, rng=rng, counter=counter)
        return res.z, res.projections

    report_kw = dict(solver="fab_gmres", method=config.method.value, omega_used=omega,
                     ell_max_used=ell_max, seed=config.seed, tuning=tuning)
    out = _run_outer(A, b, x0, config, apply_inner, True, report_kw)
    return _finish(A, b, out, report_kw, keep_basis, tuning_seconds, gram_seconds, counter, config.tol)


def ab_gmres(
    A: SparseMatrix,
    b,
    config: SolverConfig | None = None,
    *,
    x0=None,
    keep_basis: bool = False,
    counter: FlopCounter | None = None,
) -> SolveReport:
    """AB-GMRES with a fixed NE-SOR preconditioner of ``ell_max`` sweeps.

    Every outer step and the final solution assembly apply the same operator
    ``B`` (same sweep count and relaxation), so the iteration is plain
    right-preconditioned GMRES.
    """
    config = config or SolverConfig(method=Method.NESOR)
    if config.method is not Method.NESOR:
        raise DomainError("ab_gmres needs a fixed preconditioner; use method='nesor'")
    b, x0 = _prepare(A, b, x0)
    counter = counter if counter is not None else FlopCounter()
    omega, ell_max, tuning_seconds, tuning = _resolve_parameters(A, b, config, None, counter)
    method = InnerMethod(Method.NESOR, omega)
    budget = ell_max * A.nrows

    def precondition(v):
        return run_inner(method, A, v, budget=budget, stop_threshold=0.0, counter=counter).z

    def apply_inner(k, v, mode):
        return precondition(v), budget

    report_kw = dict(solver="ab_gmres", method="nesor", omega_used=omega, ell_max_used=ell_max,
                     seed=config.seed, tuning=tuning, precondition=precondition)
    out = _run_outer(A, b, x0, config, apply_inner, False, report_kw)
    return _finish(A, b, out, report_kw, keep_basis, tuning_seconds, 0.0, counter, config.tol)


def fgmres_square(A: SparseMatrix, b, config: SolverConfig | None = None, **kw) -> SolveReport:
    """Flexible GMRES for square systems; a thin wrapper over :func:`fab_gmres`."""
    if A.nrows != A.ncols:
        raise DimensionMismatch(f"fgmres_square needs a square matrix, got {A.shape}")
    return fab_gmres(A, b, config, **kw)
