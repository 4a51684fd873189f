"""Numba kernels for the long-orbit diagnostics.

Scalar per-orbit loops (Lyapunov, occupation histogram, observable series)
and a parallel batch Lyapunov used by parameter sweeps.  The reduced return
map enters through precomputed per-parameter constants:

    P  = L mu^(rho2-rho1)   kick displacement
    zt = P - K4             relaxation depth (z-tilde)
    w  = mu^(2 rho1 - 1)    twist weight
    b  = beta(mu)

fastmath stays off: sweep records are required to be bit-reproducible.
"""

import math

import numpy as np
from numba import njit, prange

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def reduced_step(z, th, P, zt, w, b, a):
    """One application of the reduced return map; returns (z', theta')."""
    s = math.sin(th)
    c = math.cos(th)
    x = z * c
    y = z * s + P
    z1sq = x * x + y * y
    z1 = math.sqrt(z1sq)
    th1 = math.atan2(y, x)
    th_out = th1 + a + 0.5 * b * (w * z * z + 2.0 * w * P * z * s
                                  - w * z1sq / (zt * zt))
    return z1 / zt, th_out % TWO_PI


@njit(cache=True)
def reduced_lyapunov(z0, th0, P, zt, w, b, a, K4, n, burn, n_batches):
    """Top Lyapunov exponent by tangent renormalisation along one orbit.

    Returns (lambda1, stderr, escaped_flag, escape_step); stderr comes from
    batch means over n_batches equal slices of the post-burn log-growth.
    """
    z, th = z0, th0
    tu, tv = 1.0, 1.0
    nrm = math.sqrt(2.0)
    tu /= nrm
    tv /= nrm
    batch = np.zeros(n_batches)
    batch_len = n // n_batches
    total = 0.0
    zlo, zhi = 1.0 / K4 - 1e-9, K4 + 1e-9
    for i in range(burn + n):
        s = math.sin(th)
        c = math.cos(th)
        x = z * c
        y = z * s + P
        z1sq = x * x + y * y
        z1 = math.sqrt(z1sq)
        th1 = math.atan2(y, x)
        uu = z + P * s
        one_m = 1.0 - 1.0 / (zt * zt)
        j11 = uu / (z1 * zt)
        j12 = P * z * c / (z1 * zt)
        j21 = -P * c / z1sq + b * w * uu * one_m
        j22 = z * uu / z1sq + b * w * P * z * c * one_m
        nu = j11 * tu + j12 * tv
        nv = j21 * tu + j22 * tv
        gn = math.sqrt(nu * nu + nv * nv)
        tu, tv = nu / gn, nv / gn
        th_out = th1 + a + 0.5 * b * (w * z * z + 2.0 * w * P * z * s
                                      - w * z1sq / (zt * zt))
        z = z1 / zt
        th = th_out % TWO_PI
        if z < zlo or z > zhi:
            return math.nan, math.nan, True, i
        if i >= burn:
            lg = math.log(gn)
            total += lg
            bidx = (i - burn) // batch_len
            if bidx < n_batches:
                batch[bidx] += lg
    lam = total / n
    mean_b = 0.0
    for k in range(n_batches):
        batch[k] /= batch_len
        mean_b += batch[k]
    mean_b /= n_batches
    var_b = 0.0
    for k in range(n_batches):
        var_b += (batch[k] - mean_b) ** 2
    var_b /= (n_batches - 1)
    stderr = math.sqrt(var_b / n_batches)
    return lam, stderr, False, -1


@njit(cache=True)
def singular_lyapunov(z0, th0, amp, a, n, burn, n_batches):
    """Lyapunov exponent of the singular-limit map (1, pi/2 + amp z sin th + a)."""
    z, th = z0, th0
    tu, tv = 1.0, 1.0
    nrm = math.sqrt(2.0)
    tu /= nrm
    tv /= nrm
    batch = np.zeros(n_batches)
    batch_len = n // n_batches
    total = 0.0
    for i in range(burn + n):
        s = math.sin(th)
        c = math.cos(th)
        nu = 0.0
        nv = amp * s * tu + amp * z * c * tv
        gn = math.sqrt(nu * nu + nv * nv)
        if gn == 0.0:
            return -math.inf, 0.0, False, -1
        tu, tv = nu / gn, nv / gn
        th = (math.pi / 2 + amp * z * s + a) % TWO_PI
        z = 1.0
        if i >= burn:
            lg = math.log(gn)
            total += lg
            bidx = (i - burn) // batch_len
            if bidx < n_batches:
                batch[bidx] += lg
    lam = total / n
    mean_b = 0.0
    for k in range(n_batches):
        batch[k] /= batch_len
        mean_b += batch[k]
    mean_b /= n_batches
    var_b = 0.0
    for k in range(n_batches):
        var_b += (batch[k] - mean_b) ** 2
    var_b /= (n_batches - 1)
    return lam, math.sqrt(var_b / n_batches), False, -1


@njit(cache=True)
def reduced_histogram(z0, th0, P, zt, w, b, a, K4, n, burn, nz, nth):
    """Occupation counts on an (z, theta) grid plus Birkhoff sums.

    Returns (counts, birkhoff, escaped, escape_step) where birkhoff holds
    the sums of [1, sin theta, cos theta, z] over the n recorded iterates.
    """
    counts = np.zeros((nz, nth))
    birk = np.zeros(4)
    z, th = z0, th0
    zlo = 1.0 / K4
    dz = (K4 - zlo) / nz
    dth = TWO_PI / nth
    for i in range(burn + n):
        z, th = reduced_step(z, th, P, zt, w, b, a)
        if th < 0.0:
            th += TWO_PI
        if z < zlo - 1e-9 or z > K4 + 1e-9:
            return counts, birk, True, i
        if i >= burn:
            iz = int((z - zlo) / dz)
            if iz == nz:
                iz -= 1
            it = int(th / dth)
            if it >= nth:
                it = nth - 1
            counts[iz, it] += 1.0
            birk[0] += 1.0
            birk[1] += math.sin(th)
            birk[2] += math.cos(th)
            birk[3] += z
    return counts, birk, False, -1


@njit(cache=True)
def singular_histogram(z0, th0, amp, a, K4, n, burn, nz, nth):
    counts = np.zeros((nz, nth))
    birk = np.zeros(4)
    z, th = z0, th0
    zlo = 1.0 / K4
    dz = (K4 - zlo) / nz
    dth = TWO_PI / nth
    for i in range(burn + n):
        th = (math.pi / 2 + amp * z * math.sin(th) + a) % TWO_PI
        if th < 0.0:
            th += TWO_PI
        z = 1.0
        if i >= burn:
            iz = int((z - zlo) / dz)
            if iz == nz:
                iz -= 1
            it = int(th / dth)
            if it >= nth:
                it = nth - 1
            counts[iz, it] += 1.0
            birk[0] += 1.0
            birk[1] += math.sin(th)
            birk[2] += math.cos(th)
            birk[3] += z
    return counts, birk, False, -1


@njit(cache=True)
def reduced_series(z0, th0, P, zt, w, b, a, K4, n, burn, obs_code):
    """Observable time series along one reduced orbit (0=sin, 1=cos, 2=z)."""
    out = np.empty(n)
    z, th = z0, th0
    for i in range(burn + n):
        z, th = reduced_step(z, th, P, zt, w, b, a)
        if z < 1.0 / K4 - 1e-9 or z > K4 + 1e-9:
            return out[:max(i - burn, 0)], True, i
        if i >= burn:
            if obs_code == 0:
                out[i - burn] = math.sin(th)
            elif obs_code == 1:
                out[i - burn] = math.cos(th)
            else:
                out[i - burn] = z
    return out, False, -1


@njit(cache=True)
def singular_series(z0, th0, amp, a, n, burn, obs_code):
    out = np.empty(n)
    z, th = z0, th0
    for i in range(burn + n):
        th = (math.pi / 2 + amp * z * math.sin(th) + a) % TWO_PI
        if th < 0.0:
            th += TWO_PI
        z = 1.0
        if i >= burn:
            if obs_code == 0:
                out[i - burn] = math.sin(th)
            elif obs_code == 1:
                out[i - burn] = math.cos(th)
            else:
                out[i - burn] = z
    return out, False, -1


@njit(cache=True, parallel=True)
def reduced_lyapunov_batch(z0s, th0s, Ps, zts, ws, bs, a_vals, K4,
                           n, burn, n_batches):
    """Batch Lyapunov over independent parameter/initial-condition sets.

    All inputs are 1-D arrays of equal length; each orbit is independent, so
    the parallel loop leaves every output slot bit-deterministic.
    Returns (lambda1, stderr, escaped) arrays.
    """
    m = z0s.shape[0]
    lams = np.empty(m)
    errs = np.empty(m)
    esc = np.zeros(m, dtype=np.bool_)
    for k in prange(m):
        lam, err, e, _ = reduced_lyapunov(z0s[k], th0s[k], Ps[k], zts[k],
                                          ws[k], bs[k], a_vals[k], K4,
                                          n, burn, n_batches)
        lams[k] = lam
        errs[k] = err
        esc[k] = e
    return lams, errs, esc
