"""Compiled inner loops for the power iteration.

Every output entry is accumulated in a fixed order that depends only on the
matrix and on that entry's own column, never on how many other columns are
processed alongside it. This is what makes batch ranking bit-identical to
per-user ranking and independent of how users are split across workers
(BLAS gemm does not give that guarantee).
"""
import numba
import numpy as np


@numba.njit(nogil=True, cache=True)
def csr_matmat(indptr, indices, data, P, out):
    """``out = A @ P`` for CSR ``A`` and C-contiguous dense ``P``."""
    rows, n = out.shape
    if n == 1:
        for i in range(rows):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * P[indices[p], 0]
            out[i, 0] = acc
        return
    for i in range(rows):
        for c in range(n):
            out[i, c] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            a = data[p]
            j = indices[p]
            for c in range(n):
                out[i, c] += a * P[j, c]


@numba.njit(nogil=True, cache=True)
def column_sums(T, out):
    m, n = T.shape
    for c in range(n):
        out[c] = 0.0
    for i in range(m):
        for c in range(n):
            out[c] += T[i, c]


@numba.njit(nogil=True, cache=True)
def redistribute(T, W, PI, residual):
    """Add the deficit ``1 - sum(T[:, c])`` times ``W[:, c]``, renormalize, and
    store the L1 change against ``PI`` in ``residual``. Overwrites ``T``."""
    m, n = T.shape
    sums = np.empty(n)
    column_sums(T, sums)
    for i in range(m):
        for c in range(n):
            T[i, c] += (1.0 - sums[c]) * W[i, c]
    column_sums(T, sums)
    for c in range(n):
        residual[c] = 0.0
    for i in range(m):
        for c in range(n):
            T[i, c] /= sums[c]
            residual[c] += abs(T[i, c] - PI[i, c])
