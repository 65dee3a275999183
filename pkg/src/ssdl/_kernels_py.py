"""Pure-NumPy implementations of the hot kernels.

These are the reference semantics; ssdl._kernels_c provides a compiled
drop-in replacement. Both are exercised by the test suite and compared by
benchmarks/bench_kernels.py.
"""

import numpy as np

BACKEND = "python"


def cd_sweep(gram, target, codes, alpha, sweeps=1):
    """Cyclic coordinate descent on the codes matrix, in place.

    For every entry (k, n) the scalar subproblem

        min_s  gram[k,k]*s^2 - 2*J*s + 2*alpha*|s|,
        J = target[k,n] - sum_{l != k} gram[k,l]*codes[l,n]

    is solved exactly by soft thresholding: s = sign(J)*max(|J|-alpha, 0)
    / gram[k,k]. Columns are independent, so updating row k for all n at
    once is identical to the scalar (k outer, n inner) sweep order.
    """
    k_atoms = gram.shape[0]
    diag = np.diagonal(gram)
    for _ in range(sweeps):
        for k in range(k_atoms):
            j = target[k] - gram[k] @ codes + diag[k] * codes[k]
            codes[k] = np.sign(j) * np.maximum(np.abs(j) - alpha, 0.0) / diag[k]
    return codes


def cd_objective(gram, target, codes, alpha, const=0.0):
    """Quadratic-plus-l1 objective the sweep minimizes, up to `const`.

    const carries the data term ||x||_F^2 that does not depend on codes.
    """
    quad = float(np.sum(codes * (gram @ codes)))
    lin = float(np.sum(codes * target))
    return const + quad - 2.0 * lin + 2.0 * alpha * float(np.sum(np.abs(codes)))


def plap_gradient(weights, qt, p):
    """Gradient and per-column quotient terms of the embedding objective.

    qt holds the embedding transposed, one column per row (m, i). Returns
    (gradt, num, den) with gradt[m, i] = d f/d q_i^m for

        f_m = num_m / den_m,
        num_m = sum_{i,j} w_ij |q_i - q_j|^p,   den_m = sum_i |q_i|^p.
    """
    m_dims, n = qt.shape
    gradt = np.empty_like(qt)
    num = np.empty(m_dims)
    den = np.empty(m_dims)
    for m in range(m_dims):
        q = qt[m]
        diffs = q[:, None] - q[None, :]
        absd = np.abs(diffs)
        pe = absd ** (p - 1.0)
        num[m] = float(np.sum(weights * (pe * absd)))
        den[m] = float(np.sum(np.abs(q) ** p))
        coupling = np.sum(weights * (np.sign(diffs) * pe), axis=1)
        lam = num[m] / den[m]
        phi_q = np.sign(q) * np.abs(q) ** (p - 1.0)
        gradt[m] = (p / den[m]) * (2.0 * coupling - lam * phi_q)
    return gradt, num, den


def plap_quotients(weights, qt, p):
    """Per-column (num, den) of the embedding objective, without gradient."""
    m_dims, n = qt.shape
    num = np.empty(m_dims)
    den = np.empty(m_dims)
    for m in range(m_dims):
        q = qt[m]
        absd = np.abs(q[:, None] - q[None, :])
        num[m] = float(np.sum(weights * absd**p))
        den[m] = float(np.sum(np.abs(q) ** p))
    return num, den
