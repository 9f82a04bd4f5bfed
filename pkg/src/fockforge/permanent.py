"""Matrix permanents.

The production path is the Balasubramanian-Bax-Franklin-Glynn formula
walked in Gray-code order: consecutive sign vectors differ in one entry,
so the column sums are updated in O(n) per step and the whole sum costs
O(n 2^n).
"""

from __future__ import annotations

import itertools

import numpy as np

try:
    import numba as _nb
except ImportError:  # pragma: no cover
    _nb = None


def _glynn_gray_py(a: np.ndarray) -> complex:
    n = a.shape[0]
    colsum = a.sum(axis=0)
    delta = np.ones(n, dtype=np.int8)
    total = np.prod(colsum)
    sign = 1.0
    for k in range(1, 1 << (n - 1)):
        # bit that flips between Gray codes k-1 and k; row 0 keeps delta=+1
        i = ((k & -k).bit_length() - 1) + 1
        if delta[i] > 0:
            colsum = colsum - 2 * a[i]
        else:
            colsum = colsum + 2 * a[i]
        delta[i] = -delta[i]
        sign = -sign
        total += sign * np.prod(colsum)
    return complex(total / (1 << (n - 1)))


if _nb is not None:

    @_nb.njit(cache=True)
    def _glynn_gray_nb(a):  # pragma: no cover - compiled
        n = a.shape[0]
        colsum = np.empty(n, dtype=a.dtype)
        for j in range(n):
            s = a[0, j]
            for i in range(1, n):
                s += a[i, j]
            colsum[j] = s
        delta = np.ones(n, dtype=np.int8)
        prod = colsum[0]
        for j in range(1, n):
            prod *= colsum[j]
        total = prod
        sign = 1.0
        for k in range(1, 1 << (n - 1)):
            low = k & -k
            i = 1
            while low > 1:
                low >>= 1
                i += 1
            if delta[i] > 0:
                for j in range(n):
                    colsum[j] -= 2 * a[i, j]
            else:
                for j in range(n):
                    colsum[j] += 2 * a[i, j]
            delta[i] = -delta[i]
            sign = -sign
            prod = colsum[0]
            for j in range(1, n):
                prod *= colsum[j]
            total += sign * prod
        return total / (1 << (n - 1))


def glynn_permanent(a) -> complex:
    """Permanent of a square matrix (the 0 x 0 permanent is 1).

    Raises
    ------
    ValueError
        If ``a`` is not square.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n == 1:
        return complex(a[0, 0])
    a = np.ascontiguousarray(a, dtype=complex)
    if _nb is not None:
        return complex(_glynn_gray_nb(a))
    return _glynn_gray_py(a)


def real_permanent(a) -> float:
    """Permanent of a real matrix (used for distinguishable-photon probabilities)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(a[0, 0])
    a = np.ascontiguousarray(a)
    if _nb is not None:
        return float(_glynn_gray_nb(a))
    return _glynn_gray_py(a).real


def naive_permanent(a) -> complex:
    """Sum over all permutations; an O(n n!) reference."""
    a = np.asarray(a)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    rows = np.arange(n)
    return complex(sum(np.prod(a[rows, list(p)]) for p in itertools.permutations(range(n))))
