"""Tridiagonal solves with several right-hand sides.

Uses a compiled Thomas sweep when numba is importable and LAPACK ``gtsv``
otherwise.  The systems solved here (Crank-Nicolson matrices and shifted
Laplacians) are diagonally dominant, so the sweep needs no pivoting.
Entries below ``TINY`` are flushed to zero during the forward sweep.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


TINY = 1e-280


def _thomas(lower, diag, upper, rhs):
    n = diag.shape[0]
    k = rhs.shape[1]
    c = np.empty(n, dtype=diag.dtype)
    x = np.empty((n, k), dtype=diag.dtype)
    inv = 1.0 / diag[0]
    c[0] = upper[0] * inv if n > 1 else 0.0
    for j in range(k):
        x[0, j] = rhs[0, j] * inv
    for i in range(1, n):
        inv = 1.0 / (diag[i] - lower[i - 1] * c[i - 1])
        if i < n - 1:
            c[i] = upper[i] * inv
        for j in range(k):
            v = (rhs[i, j] - lower[i - 1] * x[i - 1, j]) * inv
            # flush decaying columns before they reach (very slow) subnormals
            if abs(v.real) < TINY and abs(v.imag) < TINY:
                v = 0.0 * v
            x[i, j] = v
    for i in range(n - 2, -1, -1):
        for j in range(k):
            x[i, j] -= c[i] * x[i + 1, j]
    return x


if numba is not None:
    _thomas_jit = numba.njit(cache=True, nogil=True)(_thomas)
else:  # pragma: no cover
    _thomas_jit = None


def solve_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                      rhs: np.ndarray) -> np.ndarray:
    """Solve ``T x = rhs`` with ``rhs`` of shape ``(n, k)``."""
    dtype = np.result_type(lower, diag, upper, rhs)
    lower = np.ascontiguousarray(lower, dtype=dtype)
    diag = np.ascontiguousarray(diag, dtype=dtype)
    upper = np.ascontiguousarray(upper, dtype=dtype)
    rhs = np.ascontiguousarray(rhs, dtype=dtype)
    if _thomas_jit is not None:
        return _thomas_jit(lower, diag, upper, rhs)
    ab = np.zeros((3, diag.size), dtype=dtype)
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)
