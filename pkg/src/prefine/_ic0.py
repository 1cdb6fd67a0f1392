"""Zero-fill incomplete Cholesky kernels on CSR lower triangles.

The factor L keeps exactly the sparsity of tril(A). Rows must have
sorted column indices and an explicitly stored diagonal as the last
entry of each row. Factorization reports the first row whose pivot
is non-positive instead of raising, so callers can fall back to a
simpler preconditioner.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def ic0_factor(indptr, indices, data):  # pragma: no cover - compiled
    """Factor tril(A) in place into L; return 0 or 1 + breakdown row."""
    n = indptr.size - 1
    for i in range(n):
        row_start = indptr[i]
        row_end = indptr[i + 1]
        diag_val = 0.0
        for t in range(row_start, row_end):
            j = indices[t]
            # dot of rows i and j over columns < j (two-pointer merge)
            s = data[t]
            pi = row_start
            pj = indptr[j]
            pj_end = indptr[j + 1]
            while pi < t and pj < pj_end and indices[pj] < j:
                ci = indices[pi]
                cj = indices[pj]
                if ci == cj:
                    s -= data[pi] * data[pj]
                    pi += 1
                    pj += 1
                elif ci < cj:
                    pi += 1
                else:
                    pj += 1
            if j == i:
                if s <= 0.0:
                    return i + 1
                diag_val = np.sqrt(s)
                data[t] = diag_val
            else:
                data[t] = s / data[indptr[j + 1] - 1]
        if diag_val == 0.0:
            return i + 1
    return 0


@numba.njit(cache=True)
def lower_solve(indptr, indices, data, b):  # pragma: no cover - compiled
    """Forward substitution L y = b; returns y."""
    n = indptr.size - 1
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        t = indptr[i]
        end = indptr[i + 1] - 1
        while t < end:
            s -= data[t] * y[indices[t]]
            t += 1
        y[i] = s / data[end]
    return y


@numba.njit(cache=True)
def upper_solve_transposed(indptr, indices, data, y):  # pragma: no cover
    """Back substitution with the transpose: solves L^T x = y."""
    n = indptr.size - 1
    x = y.copy()
    for i in range(n - 1, -1, -1):
        end = indptr[i + 1] - 1
        xi = x[i] / data[end]
        x[i] = xi
        t = indptr[i]
        while t < end:
            x[indices[t]] -= data[t] * xi
            t += 1
    return x
