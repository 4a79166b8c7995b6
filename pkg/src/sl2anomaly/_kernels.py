"""Numba kernels for the tight simulation loops.

All kernels are deterministic functions of their inputs; randomness enters
only through pre-drawn atom-index arrays, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi


@njit(cache=True, nogil=True)
def product_log_norm(Ts, idx, renorm_every, theta0):
    """Accumulated log-norm of the matrix product applied to e_theta0.

    Renormalizes the running vector every ``renorm_every`` steps; the log is
    accumulated with Kahan compensation.
    """
    w0 = np.cos(theta0)
    w1 = np.sin(theta0)
    logsum = 0.0
    comp = 0.0
    n = idx.shape[0]
    for i in range(n):
        a = Ts[idx[i]]
        nw0 = a[0, 0] * w0 + a[0, 1] * w1
        nw1 = a[1, 0] * w0 + a[1, 1] * w1
        w0 = nw0
        w1 = nw1
        if (i + 1) % renorm_every == 0:
            nrm = np.sqrt(w0 * w0 + w1 * w1)
            y = np.log(nrm) - comp
            t = logsum + y
            comp = (t - logsum) - y
            logsum = t
            w0 /= nrm
            w1 /= nrm
    nrm = np.sqrt(w0 * w0 + w1 * w1)
    return logsum + np.log(nrm)


@njit(cache=True, nogil=True)
def phase_orbit_sums(Ts, idx, theta0, burn_in):
    """Birkhoff sums of e^{2 i theta_n} and e^{4 i theta_n} along the orbit.

    Returns (re1, im1, re2, im2, count) over the post-burn-in steps.
    """
    th = theta0
    s1r = 0.0
    s1i = 0.0
    s2r = 0.0
    s2i = 0.0
    n = idx.shape[0]
    cnt = 0
    for i in range(n):
        a = Ts[idx[i]]
        c = np.cos(th)
        s = np.sin(th)
        x = a[0, 0] * c + a[0, 1] * s
        y = a[1, 0] * c + a[1, 1] * s
        th = np.arctan2(y, x) % TWO_PI
        if i >= burn_in:
            c2 = np.cos(2.0 * th)
            s2 = np.sin(2.0 * th)
            s1r += c2
            s1i += s2
            s2r += c2 * c2 - s2 * s2
            s2i += 2.0 * c2 * s2
            cnt += 1
    return s1r, s1i, s2r, s2i, cnt


@njit(cache=True, nogil=True)
def phase_histogram(Ts, idx, theta0, burn_in, bins):
    """Histogram of the orbit folded to [0, pi)."""
    th = theta0
    counts = np.zeros(bins, dtype=np.int64)
    n = idx.shape[0]
    half = np.pi
    for i in range(n):
        a = Ts[idx[i]]
        c = np.cos(th)
        s = np.sin(th)
        x = a[0, 0] * c + a[0, 1] * s
        y = a[1, 0] * c + a[1, 1] * s
        th = np.arctan2(y, x) % TWO_PI
        if i >= burn_in:
            t = th % half
            b = int(t / half * bins)
            if b >= bins:
                b = bins - 1
            counts[b] += 1
    return counts
