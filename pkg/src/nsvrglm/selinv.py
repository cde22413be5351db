"""Diagonal of a sparse SPD inverse from its LDL' factor (Takahashi recursion).

The factor comes from SuperLU run in symmetric mode, where ``U = D L'``
and the row and column permutations coincide.  Only the entries of the
inverse inside the pattern of ``L`` are formed.
"""

from __future__ import annotations

import numba
import numpy as np

__all__ = ["inverse_diagonal"]


@numba.njit(cache=True)
def _lookup(indptr, indices, col, row):
    # position of (row, col) in a CSC matrix with sorted indices, -1 if absent
    lo, hi = indptr[col], indptr[col + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        r = indices[mid]
        if r == row:
            return mid
        if r < row:
            lo = mid + 1
        else:
            hi = mid
    return -1


@numba.njit(cache=True)
def _takahashi(indptr, indices, lval, d):
    n = d.size
    sig = np.zeros(lval.size)
    out = np.zeros(n)
    diag_pos = np.empty(n, dtype=np.int64)
    for j in range(n):
        diag_pos[j] = _lookup(indptr, indices, j, j)
        if diag_pos[j] < 0:
            return out, False
    for i in range(n - 1, -1, -1):
        start, stop = diag_pos[i] + 1, indptr[i + 1]
        # off-diagonal entries of column i, largest row first
        for a in range(stop - 1, start - 1, -1):
            j = indices[a]
            acc = 0.0
            for b in range(start, stop):
                k = indices[b]
                if k >= j:
                    pos = _lookup(indptr, indices, j, k)
                else:
                    pos = _lookup(indptr, indices, k, j)
                if pos < 0:
                    return out, False
                acc += lval[b] * sig[pos]
            sig[a] = -acc
        acc = 0.0
        for b in range(start, stop):
            acc += lval[b] * sig[b]
        sig[diag_pos[i]] = 1.0 / d[i] - acc
        out[i] = sig[diag_pos[i]]
    return out, True


def _factor_parts(lu):
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise ValueError("factor was not computed with symmetric pivoting")
    L = lu.L.tocsc()
    L.sort_indices()
    d = lu.U.diagonal()
    return L, d


def inverse_diagonal(lu) -> np.ndarray:
    """Diagonal of ``A^-1`` in the original ordering, for ``lu = splu(A)`` in symmetric mode.

    Raises ``ValueError`` when the stored pattern of ``L`` is not closed
    under the recursion (callers then fall back to explicit solves).
    """
    L, d = _factor_parts(lu)
    sig, ok = _takahashi(L.indptr.astype(np.int64), L.indices.astype(np.int64),
                         L.data.astype(float), d.astype(float))
    if not ok:
        raise ValueError("factor pattern is not closed; selected inversion unavailable")
    return sig[lu.perm_c]
