# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: coordinate-descent sweep and p-Laplacian gradient.

Semantics match ssdl._kernels_py exactly up to floating-point summation
order; see tests/test_kernels.py for the equivalence checks.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow

BACKEND = "compiled"


def cd_sweep(double[:, ::1] gram, double[:, ::1] target,
             double[:, ::1] codes, double alpha, int sweeps=1):
    # gram must be symmetric (it is D^T D + gamma B^T B at both call
    # sites); the residual maintenance reads row k where the math says
    # column k, keeping the access contiguous.
    cdef Py_ssize_t k_atoms = gram.shape[0]
    cdef Py_ssize_t n_cols = target.shape[1]
    cdef Py_ssize_t n, k, l, t
    cdef double j, s_old, s_new, delta
    cdef double[::1] resid = np.empty(k_atoms)
    cdef double[::1] col = np.empty(k_atoms)

    # Columns are independent, so running all sweeps of one column before
    # moving on is equivalent to whole-matrix sweeps and keeps the residual
    # vector hot in cache.
    for n in range(n_cols):
        for k in range(k_atoms):
            col[k] = codes[k, n]
        for k in range(k_atoms):
            j = target[k, n]
            for l in range(k_atoms):
                j -= gram[k, l] * col[l]
            resid[k] = j
        for t in range(sweeps):
            for k in range(k_atoms):
                s_old = col[k]
                j = resid[k] + gram[k, k] * s_old
                if j > alpha:
                    s_new = (j - alpha) / gram[k, k]
                elif j < -alpha:
                    s_new = (j + alpha) / gram[k, k]
                else:
                    s_new = 0.0
                delta = s_new - s_old
                if delta != 0.0:
                    for l in range(k_atoms):
                        resid[l] -= gram[k, l] * delta
                    col[k] = s_new
        for k in range(k_atoms):
            codes[k, n] = col[k]
    return np.asarray(codes)


def cd_objective(double[:, ::1] gram, double[:, ::1] target,
                 double[:, ::1] codes, double alpha, double const=0.0):
    cdef Py_ssize_t k_atoms = gram.shape[0]
    cdef Py_ssize_t n_cols = target.shape[1]
    cdef Py_ssize_t n, k, l
    cdef double quad = 0.0, lin = 0.0, l1 = 0.0, acc, s
    for n in range(n_cols):
        for k in range(k_atoms):
            s = codes[k, n]
            if s == 0.0:
                continue
            acc = 0.0
            for l in range(k_atoms):
                acc += gram[k, l] * codes[l, n]
            quad += s * acc
            lin += s * target[k, n]
            l1 += fabs(s)
    return const + quad - 2.0 * lin + 2.0 * alpha * l1


def plap_gradient(double[:, ::1] weights, double[:, ::1] qt, double p):
    cdef Py_ssize_t m_dims = qt.shape[0]
    cdef Py_ssize_t n = qt.shape[1]
    cdef Py_ssize_t m, i, j
    cdef double d, ad, pe, phi, wij, lam, qi, scale, num_m, den_m

    gradt_arr = np.zeros((m_dims, n))
    num_arr = np.empty(m_dims)
    den_arr = np.empty(m_dims)
    cdef double[:, ::1] gradt = gradt_arr
    cdef double[::1] num = num_arr
    cdef double[::1] den = den_arr
    cdef double[::1] coupling = np.empty(n)

    for m in range(m_dims):
        num_m = 0.0
        den_m = 0.0
        for i in range(n):
            coupling[i] = 0.0
            den_m += pow(fabs(qt[m, i]), p)
        for i in range(n):
            for j in range(i + 1, n):
                wij = weights[i, j]
                if wij == 0.0:
                    continue
                d = qt[m, i] - qt[m, j]
                ad = fabs(d)
                if ad == 0.0:
                    continue
                pe = pow(ad, p - 1.0)
                phi = pe if d > 0.0 else -pe
                num_m += 2.0 * wij * pe * ad
                coupling[i] += wij * phi
                coupling[j] -= wij * phi
        num[m] = num_m
        den[m] = den_m
        lam = num_m / den_m
        scale = p / den_m
        for i in range(n):
            qi = qt[m, i]
            pe = pow(fabs(qi), p - 1.0)
            phi = pe if qi > 0.0 else (-pe if qi < 0.0 else 0.0)
            gradt[m, i] = scale * (2.0 * coupling[i] - lam * phi)
    return gradt_arr, num_arr, den_arr


def plap_quotients(double[:, ::1] weights, double[:, ::1] qt, double p):
    cdef Py_ssize_t m_dims = qt.shape[0]
    cdef Py_ssize_t n = qt.shape[1]
    cdef Py_ssize_t m, i, j
    cdef double ad, wij, num_m, den_m

    num_arr = np.empty(m_dims)
    den_arr = np.empty(m_dims)
    cdef double[::1] num = num_arr
    cdef double[::1] den = den_arr

    for m in range(m_dims):
        num_m = 0.0
        den_m = 0.0
        for i in range(n):
            den_m += pow(fabs(qt[m, i]), p)
            for j in range(i + 1, n):
                wij = weights[i, j]
                if wij == 0.0:
                    continue
                ad = fabs(qt[m, i] - qt[m, j])
                if ad != 0.0:
                    num_m += 2.0 * wij * pow(ad, p)
        num[m] = num_m
        den[m] = den_m
    return num_arr, den_arr
