"""Sturm-sequence bisection for symmetric tridiagonal matrices."""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _count_below(diag, off2, lam):
    # Number of negative pivots of T - lam*I = number of eigenvalues < lam.
    n = diag.size
    count = 0
    d = diag[0] - lam
    if d < 0.0:
        count += 1
    for i in range(1, n):
        if d == 0.0:
            d = 1e-300
        d = diag[i] - lam - off2[i - 1] / d
        if d < 0.0:
            count += 1
    return count


@numba.njit(cache=True, nogil=True)
def _bisect_lowest(diag, off2, j_max, lo, hi, tol):
    out = np.empty(j_max)
    for j in range(j_max):
        a = lo
        b = hi
        while b - a > tol:
            m = 0.5 * (a + b)
            if m <= a or m >= b:
                break
            if _count_below(diag, off2, m) > j:
                b = m
            else:
                a = m
        out[j] = 0.5 * (a + b)
        # eigenvalue j+1 is not below eigenvalue j
        lo = a
    return out


def gershgorin_bounds(diag, offdiag):
    diag = np.asarray(diag, dtype=float)
    off = np.abs(np.asarray(offdiag, dtype=float))
    radius = np.zeros_like(diag)
    radius[:-1] += off
    radius[1:] += off
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def count_below(diag, offdiag, lam):
    """Number of eigenvalues strictly below ``lam``."""
    diag = np.ascontiguousarray(diag, dtype=float)
    off2 = np.ascontiguousarray(offdiag, dtype=float) ** 2
    return int(_count_below(diag, off2, float(lam)))


def lowest(diag, offdiag, j_max, tol, upper_hint=None):
    """The ``j_max`` smallest eigenvalues, each bracketed to width ``tol``.

    ``upper_hint`` may be any value believed to exceed the j_max-th
    eigenvalue; it is verified by a Sturm count and ignored if wrong.
    """
    diag = np.ascontiguousarray(diag, dtype=float)
    off2 = np.ascontiguousarray(offdiag, dtype=float) ** 2
    lo, hi = gershgorin_bounds(diag, offdiag)
    if upper_hint is not None and upper_hint < hi:
        if _count_below(diag, off2, float(upper_hint)) >= j_max:
            hi = float(upper_hint)
    return _bisect_lowest(diag, off2, int(j_max), lo, hi, float(tol))
