# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coordinate-descent sweep kernel.

Mirrors ``pclasso._cd_python.cd_sweeps``; see that module for the contract.
The hot loop is plain C over typed memoryviews and runs without the GIL.
"""

cimport numpy as cnp
from libc.math cimport fabs

ctypedef cnp.int64_t i64


cdef int _sweeps(
    const double[::1, :] X,
    const double[::1, :] Xw,
    double[::1] r,
    double[::1] beta,
    double[::1] abeta,
    const double[::1] v,
    const double[::1] sv,
    const double[::1] adiag,
    double theta,
    double lam,
    const i64[::1] idx,
    const double[::1] ab_flat,
    const i64[::1] ab_off,
    const i64[::1] grp_of,
    const i64[::1] grp_start,
    const i64[::1] grp_size,
    double tol,
    int max_sweeps,
    int* status,
) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_idx = idx.shape[0]
    cdef Py_ssize_t sweep, t, i, j, g0, pk, base, k
    cdef double b_j, z, denom, new, delta, change, max_change

    status[0] = 0
    for sweep in range(max_sweeps):
        max_change = 0.0
        for t in range(n_idx):
            j = <Py_ssize_t> idx[t]
            b_j = beta[j]
            z = 0.0
            for i in range(n):
                z += Xw[i, j] * r[i]
            z += v[j] * b_j - theta * (abeta[j] - adiag[j] * b_j)
            denom = v[j] + theta * adiag[j]
            if fabs(z) <= lam:
                new = 0.0
            elif denom <= 0.0:
                status[0] = 1
                return <int> sweep
            else:
                new = (z - lam if z > 0 else z + lam) / denom
            delta = new - b_j
            if delta != 0.0:
                beta[j] = new
                for i in range(n):
                    r[i] -= delta * X[i, j]
                k = <Py_ssize_t> grp_of[j]
                g0 = <Py_ssize_t> grp_start[k]
                pk = <Py_ssize_t> grp_size[k]
                base = <Py_ssize_t> ab_off[k] + (j - g0) * pk
                for i in range(pk):
                    abeta[g0 + i] += delta * ab_flat[base + i]
                change = fabs(delta) * sv[j]
                if change > max_change:
                    max_change = change
        if max_change < tol:
            status[0] = 2
            return <int> (sweep + 1)
    return max_sweeps


def cd_sweeps(
    const double[::1, :] X not None,
    const double[::1, :] Xw not None,
    double[::1] r not None,
    double[::1] beta not None,
    double[::1] abeta not None,
    const double[::1] v not None,
    const double[::1] sv not None,
    const double[::1] adiag not None,
    double theta,
    double lam,
    const i64[::1] idx not None,
    const double[::1] ab_flat not None,
    const i64[::1] ab_off not None,
    const i64[::1] grp_of not None,
    const i64[::1] grp_start not None,
    const i64[::1] grp_size not None,
    double tol,
    int max_sweeps,
):
    cdef int status = 0
    cdef int n_sweeps
    with nogil:
        n_sweeps = _sweeps(
            X, Xw, r, beta, abeta, v, sv, adiag, theta, lam, idx,
            ab_flat, ab_off, grp_of, grp_start, grp_size, tol, max_sweeps,
            &status,
        )
    if status == 1:
        return n_sweeps, False, 1
    return n_sweeps, status == 2, 0
