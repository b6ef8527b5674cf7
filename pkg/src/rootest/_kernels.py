"""Hot numeric kernels.

Each kernel has a numba-compiled version and a pure-numpy version with the
same signature. Set ``ROOTEST_NO_NUMBA=1`` to force the numpy path (numba is
also skipped automatically when it cannot be imported).
"""

import math
import os

import numpy as np

_PI_M4 = math.pi ** -0.25
_SQRT2 = math.sqrt(2.0)
# rescale the running pair once it leaves [1e-150, 1e150]; exponent tracked separately
_BIG = 1e150
_LOG_BIG = math.log(_BIG)

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("ROOTEST_NO_NUMBA", "0").lower() in ("", "0", "false", "no")


def hermite_table_numpy(y, size):
    """Orthonormal Hermite functions h_0..h_{size-1} at every point of ``y``.

    Returns an array of shape ``(len(y), size)``. The recurrence runs on the
    functions with the Gaussian factored out; the factor is folded back in
    through a per-point log-scale so nothing overflows for large ``|y|``.
    """
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    out = np.empty((y.size, size))
    if size == 0:
        return out
    log_scale = -0.5 * y * y
    prev = np.zeros_like(y)
    cur = np.full_like(y, _PI_M4)
    out[:, 0] = cur * np.exp(log_scale)
    for j in range(size - 1):
        nxt = math.sqrt(2.0 / (j + 1)) * y * cur - math.sqrt(j / (j + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _BIG
        if big.any():
            cur = np.where(big, cur / _BIG, cur)
            prev = np.where(big, prev / _BIG, prev)
            log_scale = np.where(big, log_scale + _LOG_BIG, log_scale)
        out[:, j + 1] = cur * np.exp(log_scale)
    return out


def christoffel_numpy(y, size):
    """1 / sum_j h_j(y)^2 over j < size; Gauss-Hermite weights times exp(y^2)."""
    tab = hermite_table_numpy(y, size)
    with np.errstate(divide="ignore", over="ignore"):
        # inf far outside the oscillatory region, where every h_j underflows
        return 1.0 / np.einsum("ij,ij->i", tab, tab)


if HAS_NUMBA:

    @njit(cache=True)
    def _hermite_row(yk, size, row):
        log_scale = -0.5 * yk * yk
        prev = 0.0
        cur = _PI_M4
        row[0] = cur * math.exp(log_scale)
        for j in range(size - 1):
            nxt = math.sqrt(2.0 / (j + 1)) * yk * cur - math.sqrt(j / (j + 1)) * prev
            prev = cur
            cur = nxt
            if abs(cur) > _BIG:
                cur /= _BIG
                prev /= _BIG
                log_scale += _LOG_BIG
            row[j + 1] = cur * math.exp(log_scale)

    @njit(cache=True)
    def _hermite_table_nb(y, size):
        out = np.empty((y.size, size))
        if size == 0:
            return out
        for k in range(y.size):
            _hermite_row(y[k], size, out[k])
        return out

    @njit(cache=True)
    def _christoffel_nb(y, size):
        out = np.empty(y.size)
        row = np.empty(size)
        for k in range(y.size):
            _hermite_row(y[k], size, row)
            acc = 0.0
            for j in range(size):
                acc += row[j] * row[j]
            out[k] = 1.0 / acc if acc > 0.0 else np.inf
        return out

    def hermite_table_numba(y, size):
        return _hermite_table_nb(np.ascontiguousarray(y, dtype=np.float64).ravel(), int(size))

    def christoffel_numba(y, size):
        return _christoffel_nb(np.ascontiguousarray(y, dtype=np.float64).ravel(), int(size))

else:  # pragma: no cover
    hermite_table_numba = hermite_table_numpy
    christoffel_numba = christoffel_numpy


if USE_NUMBA:
    hermite_table = hermite_table_numba
    christoffel = christoffel_numba
else:
    hermite_table = hermite_table_numpy
    christoffel = christoffel_numpy


def chart_terms_numpy(table, d, floor):
    """Log-likelihood, ``R d`` and floor-hit count for a real design table.

    ``table[k, j]`` is basis function ``j`` at observation ``k``; the density
    at each observation is ``(table @ d)^2`` clipped below at
    ``floor * max``.
    """
    psi = table @ d
    dens = psi * psi
    cut = floor * dens.max()
    hits = int(np.count_nonzero(dens < cut))
    dens = np.maximum(dens, cut)
    return float(np.sum(np.log(dens))), table.T @ (psi / dens), hits


if HAS_NUMBA:

    @njit(cache=True)
    def _chart_terms_nb(table, d, floor):
        nobs, size = table.shape
        psi = np.empty(nobs)
        top = 0.0
        for k in range(nobs):
            acc = 0.0
            for j in range(size):
                acc += table[k, j] * d[j]
            psi[k] = acc
            if acc * acc > top:
                top = acc * acc
        cut = floor * top
        hits = 0
        loglik = 0.0
        rd = np.zeros(size)
        for k in range(nobs):
            dens = psi[k] * psi[k]
            if dens < cut:
                hits += 1
                dens = cut
            loglik += math.log(dens)
            w = psi[k] / dens
            for j in range(size):
                rd[j] += table[k, j] * w
        return loglik, rd, hits

    def chart_terms_numba(table, d, floor):
        return _chart_terms_nb(table, np.ascontiguousarray(d, dtype=np.float64), float(floor))

else:  # pragma: no cover
    chart_terms_numba = chart_terms_numpy

chart_terms = chart_terms_numba if USE_NUMBA else chart_terms_numpy
