"""Compiled sweeps over the invariant grid ``z * f**k * (1-f)**m``.

The kernels work with the complement ``h = 1 - g``.  In that variable the
steady-state rule reads

    h(z) = (h(fz) + h((1-f)z)) / (1 + h(fz))

and rounding errors are weighted by ``f**k (1-f)**m`` along every lattice
path, so they stay at a few ulps of ``|h|``.  The same rule written for
``g`` sums errors over all lattice paths and loses ~4 digits by ``|z| ~ 10``.
"""

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_DIVISION_GUARD = 1
STATUS_NONFINITE = 2


@njit(cache=True)
def _series(z, coef):
    acc = 0j
    for i in range(coef.shape[0] - 1, -1, -1):
        acc = (acc + coef[i]) * z
    return acc


@njit(cache=True)
def _first_small(lz, k, lf, l1, ls, m_cap):
    # smallest m with lz + k*lf + m*l1 < ls
    q = (lz + k * lf - ls) / (-l1)
    if q < 0.0:
        return 0
    m = int(math.floor(q)) + 1
    return m if m < m_cap else m_cap


@njit(cache=True)
def transform_batch(z, f, coef, small, guard):
    """``(g, h = 1 - g)`` at every entry of ``z`` (one ordered sweep each).

    Only the frontier of the small-modulus region is seeded from the series,
    so the cost per point is ``K * M`` multiply-adds.

    Where ``|g|`` is small, ``1 - h`` would cancel.  ``g`` is then taken from
    the exact product ``g(z) = g((1-f)**m z) / prod_j (1 + h(f (1-f)**j z))``
    along the first two lattice rows, stepping ``m`` down to ``|z| <= 1``.
    """
    n = z.shape[0]
    out = np.empty(n, np.complex128)
    gout = np.empty(n, np.complex128)
    status = np.zeros(n, np.int8)
    lf = math.log(f)
    l1 = math.log1p(-f)
    ls = math.log(small)
    for i in range(n):
        zi = z[i]
        r = abs(zi)
        if not np.isfinite(r):
            out[i] = np.nan
            gout[i] = np.nan
            status[i] = STATUS_NONFINITE
            continue
        if r == 0.0:
            out[i] = 0.0
            gout[i] = 1.0
            continue
        lz = math.log(r)
        if lz < ls:
            out[i] = _series(zi, coef)
            gout[i] = 1.0 - out[i]
            continue
        K = int(math.ceil((ls - lz) / lf))
        M = int(math.ceil((ls - lz) / l1))
        prev = np.empty(M + 1, np.complex128)
        cur = np.empty(M + 1, np.complex128)
        row1 = np.empty(M + 1, np.complex128)
        bad = False
        for k in range(K, -1, -1):
            if k == K:
                ms = 0
            else:
                ms = _first_small(lz, k, lf, l1, ls, M)
            if k > 0:
                upper = _first_small(lz, k - 1, lf, l1, ls, M) - 1
            else:
                upper = 0
            if upper < ms:
                upper = ms
            if upper > M:
                upper = M
            scale_k = math.exp(k * lf)
            for m in range(ms, upper + 1):
                cur[m] = _series(zi * (scale_k * math.exp(m * l1)), coef)
            for m in range(ms - 1, -1, -1):
                den = 1.0 + prev[m]
                if abs(den) < guard:
                    bad = True
                    break
                cur[m] = (prev[m] + cur[m + 1]) / den
            if bad:
                break
            if k == 1:
                row1[:] = cur
            prev, cur = cur, prev
        if bad:
            out[i] = np.nan
            gout[i] = np.nan
            status[i] = STATUS_DIVISION_GUARD
            continue
        out[i] = prev[0]
        # m* = first column with |z| (1-f)**m <= 1
        mstar = 0
        if lz > 0.0 and K >= 1:
            mstar = int(math.ceil(lz / (-l1)))
            if mstar > M:
                mstar = M
        gi = 1.0 - prev[mstar]
        for m in range(mstar):
            gi = gi / (1.0 + row1[m])
        gout[i] = gi
    return gout, out, status


@njit(cache=True)
def complement_grid(z, f, coef, small, guard, K, M):
    """Full ``(K+1, M+1)`` table of ``h`` on the invariant grid of ``z``.

    Returns ``(table, status)``; small-modulus nodes carry series values.
    """
    lf = math.log(f)
    l1 = math.log1p(-f)
    ls = math.log(small)
    lz = math.log(abs(z))
    h = np.empty((K + 1, M + 1), np.complex128)
    for k in range(K, -1, -1):
        for m in range(M, -1, -1):
            lzz = lz + k * lf + m * l1
            if lzz < ls or k == K or m == M:
                h[k, m] = _series(z * math.exp(k * lf + m * l1), coef)
            else:
                den = 1.0 + h[k + 1, m]
                if abs(den) < guard:
                    return h, STATUS_DIVISION_GUARD
                h[k, m] = (h[k + 1, m] + h[k, m + 1]) / den
    return h, STATUS_OK


@njit(cache=True)
def transform_rows(z, f, coef, small, guard, stride, n_rows):
    """``g(z f**(stride*i))`` for ``i < n_rows`` from one lattice sweep of ``z``.

    Rows below the series radius are taken from the series directly.  Returns
    ``(g, status)``.
    """
    lf = math.log(f)
    l1 = math.log1p(-f)
    ls = math.log(small)
    lz = math.log(abs(z))
    out = np.empty(n_rows, np.complex128)
    if lz < ls:
        K = 0
        M = 0
    else:
        K = int(math.ceil((ls - lz) / lf))
        M = int(math.ceil((ls - lz) / l1))
    h, status = complement_grid(z, f, coef, small, guard, K + 1, M)
    if status != STATUS_OK:
        return out, status
    for i in range(n_rows):
        k = stride * i
        if k > K:
            zk = z * math.exp(k * lf)
            out[i] = 1.0 - _series(zk, coef)
            continue
        lzk = lz + k * lf
        mstar = 0
        if lzk > 0.0:
            mstar = int(math.ceil(lzk / (-l1)))
            if mstar > M:
                mstar = M
        gi = 1.0 - h[k, mstar]
        for m in range(mstar):
            gi = gi / (1.0 + h[k + 1, m])
        out[i] = gi
    return out, STATUS_OK
