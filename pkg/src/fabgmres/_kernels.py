"""Compiled inner loops for the Kaczmarz-type engines.

The Python-level single-step operations in :mod:`fabgmres.inner` call the
same helpers, so a step-by-step replay in Python reproduces a compiled run
bit for bit (numba's ``Generator`` shares numpy's bit stream).
"""
import numpy as np
from numba import njit

NESOR, GK, RK, GRK = 0, 1, 2, 3
GRAM_NONE, GRAM_DENSE, GRAM_SPARSE = 0, 1, 2
# counter slots
SEL, PROJ, RESUPD, GRAMB = 0, 1, 2, 3


@njit(cache=True)
def residual_into(indptr, indices, data, z, v, out):
    """out = v - A z, one accumulation pass per row."""
    m = v.shape[0]
    for i in range(m):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * z[indices[k]]
        out[i] = v[i] - acc


@njit(cache=True)
def row_residual(indptr, indices, data, z, v, i):
    acc = 0.0
    for k in range(indptr[i], indptr[i + 1]):
        acc += data[k] * z[indices[k]]
    return v[i] - acc


@njit(cache=True)
def project(indptr, indices, data, z, i, coef):
    """z += coef * alpha_i."""
    for k in range(indptr[i], indptr[i + 1]):
        z[indices[k]] += coef * data[k]


@njit(cache=True)
def gram_update(s, i, factor, mode, Cd, Cp, Ci, Cx):
    """s -= factor * C[:, i]; returns the number of entries touched."""
    if mode == GRAM_DENSE:
        m = s.shape[0]
        for r in range(m):
            s[r] -= factor * Cd[i, r]
        return m
    cnt = 0
    for k in range(Cp[i], Cp[i + 1]):
        s[Ci[k]] -= factor * Cx[k]
        cnt += 1
    return cnt


@njit(cache=True)
def sum_sq(s):
    acc = 0.0
    for r in range(s.shape[0]):
        acc += s[r] * s[r]
    return acc


@njit(cache=True)
def select_gk(s):
    """Index of the largest |s_i|, lowest index on ties; -1 if s == 0."""
    best = -1
    bval = 0.0
    for r in range(s.shape[0]):
        a = abs(s[r])
        if a > bval:
            bval = a
            best = r
    return best


@njit(cache=True)
def select_rk(rng, cum):
    """Draw a row with probability proportional to its squared norm."""
    m = cum.shape[0]
    t = rng.random() * cum[m - 1]
    lo = 0
    hi = m - 1
    # first index with cum > t
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > t:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def grk_candidates(s, rnsq, fro_sq, weights, member):
    """Fill ``member`` with U_p and ``weights`` with |s_i|^2 on U_p.

    Returns (eps_p, total weight, argmax of |s_i|^2/|alpha_i|^2); the argmax
    is -1 when s == 0.
    """
    m = s.shape[0]
    ssq = sum_sq(s)
    if ssq == 0.0:
        for r in range(m):
            weights[r] = 0.0
            member[r] = False
        return 0.0, 0.0, -1
    mx = -1.0
    arg = -1
    for r in range(m):
        ratio = s[r] * s[r] / rnsq[r]
        if ratio > mx:
            mx = ratio
            arg = r
    eps = 0.5 * (mx / ssq + 1.0 / fro_sq)
    thr = eps * ssq
    total = 0.0
    for r in range(m):
        sq = s[r] * s[r]
        # the argmax row always qualifies in exact arithmetic; keep it under rounding too
        if sq >= thr * rnsq[r] or r == arg:
            member[r] = True
            weights[r] = sq
            total += sq
        else:
            member[r] = False
            weights[r] = 0.0
    return eps, total, arg


@njit(cache=True)
def select_grk(rng, s, rnsq, fro_sq, weights, member):
    eps, total, arg = grk_candidates(s, rnsq, fro_sq, weights, member)
    if arg < 0:
        return -1
    t = rng.random() * total
    acc = 0.0
    last = arg
    for r in range(s.shape[0]):
        w = weights[r]
        if w > 0.0:
            acc += w
            last = r
            if acc > t:
                return r
    return last


@njit(cache=True)
def run_kernel(
    method, omega, indptr, indices, data, ncols, rnsq, cum, fro_sq, v,
    budget, stop_abs, check_period, refresh_period,
    gram_mode, Cd, Cp, Ci, Cx, Cdiag, rng, counters,
):
    """Run one inner solve of A z = v from z = 0.

    Returns (z, s, projections, ||s||). With a Gram matrix ``s`` is the
    recursively maintained residual; otherwise it is recomputed from z.
    """
    m = v.shape[0]
    nnz = indptr[m]
    z = np.zeros(ncols)
    s = v.copy()
    proj = 0
    resnorm = np.sqrt(sum_sq(v))
    if resnorm == 0.0:
        return z, s, 0, 0.0
    weights = np.empty(m)
    member = np.empty(m, dtype=np.bool_)

    if method == NESOR:
        sweeps = budget // m
        if sweeps < 1:
            sweeps = 1
        for _ in range(sweeps):
            for i in range(m):
                ri = row_residual(indptr, indices, data, z, v, i)
                project(indptr, indices, data, z, i, omega * ri / rnsq[i])
                counters[PROJ] += indptr[i + 1] - indptr[i]
            proj += m
            residual_into(indptr, indices, data, z, v, s)
            resnorm = np.sqrt(sum_sq(s))
            if resnorm <= stop_abs:
                break
        return z, s, proj, resnorm

    maintained = gram_mode != GRAM_NONE
    recompute_each = (not maintained) and (method == GK or method == GRK)
    stale = False
    while proj < budget:
        if method == GK:
            i = select_gk(s)
        elif method == RK:
            i = select_rk(rng, cum)
        else:
            i = select_grk(rng, s, rnsq, fro_sq, weights, member)
        if i < 0:
            resnorm = 0.0
            break
        if maintained or recompute_each:
            ri = s[i]
        else:
            ri = row_residual(indptr, indices, data, z, v, i)
        project(indptr, indices, data, z, i, omega * ri / rnsq[i])
        counters[PROJ] += indptr[i + 1] - indptr[i]
        proj += 1
        if maintained:
            counters[RESUPD] += gram_update(s, i, omega * ri / Cdiag[i], gram_mode, Cd, Cp, Ci, Cx)
            if proj % refresh_period == 0:
                residual_into(indptr, indices, data, z, v, s)
            resnorm = np.sqrt(sum_sq(s))
            if resnorm <= stop_abs:
                break
        elif recompute_each:
            residual_into(indptr, indices, data, z, v, s)
            counters[SEL] += nnz
            resnorm = np.sqrt(sum_sq(s))
            if resnorm <= stop_abs:
                break
        else:
            stale = True
            if proj % check_period == 0:
                residual_into(indptr, indices, data, z, v, s)
                stale = False
                resnorm = np.sqrt(sum_sq(s))
                if resnorm <= stop_abs:
                    break
    if stale:
        residual_into(indptr, indices, data, z, v, s)
        resnorm = np.sqrt(sum_sq(s))
    return z, s, proj, resnorm
