"""Compiled inner loops for the tridiagonal obstacle problem.

Every routine solves, or iterates towards, the linear complementarity problem

    w >= 0,   A w - b >= 0,   w . (A w - b) = 0,

with ``A = tridiag(-c, a, -c)`` on the interior nodes and homogeneous
Dirichlet values at both ends.
"""

import numpy as np
from numba import njit

BRENNAN_SCHWARTZ = 0
PSOR = 1


@njit(cache=True)
def lcp_brennan_schwartz(a, c, b, out, d, y):
    """Direct solve assuming the contact set is a right-hand interval.

    Forward elimination runs left to right; the projected back substitution
    starts inside the contact region at the right end.
    """
    n = b.shape[0]
    d[1] = a
    y[1] = b[1]
    for j in range(2, n - 1):
        m = c / d[j - 1]
        d[j] = a - c * m
        y[j] = b[j] + m * y[j - 1]
    out[0] = 0.0
    out[n - 1] = 0.0
    nxt = 0.0
    for j in range(n - 2, 0, -1):
        v = (y[j] + c * nxt) / d[j]
        if v < 0.0:
            v = 0.0
        out[j] = v
        nxt = v


@njit(cache=True)
def lcp_violation(a, c, b, w):
    """Largest complementarity defect, in units of ``w`` (residual divided by ``a``)."""
    n = b.shape[0]
    worst = 0.0
    for j in range(1, n - 1):
        r = (a * w[j] - c * (w[j - 1] + w[j + 1]) - b[j]) / a
        if w[j] > 0.0:
            e = abs(r)
        else:
            e = -r if r < 0.0 else 0.0
        if e > worst:
            worst = e
    return worst


@njit(cache=True)
def lcp_psor(a, c, b, w, omega, tol, max_iter):
    """Projected SOR in place on ``w``; returns the sweep count or -1 on failure."""
    n = b.shape[0]
    for it in range(1, max_iter + 1):
        change = 0.0
        for j in range(1, n - 1):
            target = (b[j] + c * (w[j - 1] + w[j + 1])) / a
            v = w[j] + omega * (target - w[j])
            if v < 0.0:
                v = 0.0
            e = abs(v - w[j])
            if e > change:
                change = e
            w[j] = v
        if change < tol:
            return it
    return -1


@njit(cache=True)
def _last_positive(w, threshold):
    for j in range(w.shape[0] - 1, -1, -1):
        if w[j] > threshold:
            return j
    return -1


@njit(cache=True)
def march(g, lam, dt, nt, save_every, method, omega, tol, max_iter, strip):
    """Implicit Euler march of ``W_t - W_xx + W = g`` under ``W >= 0``.

    Returns snapshots, per-step front indices, strips ending one node past
    the last positive node, and solver stats
    ``(total_sweeps, worst_sweeps, worst_violation)``; ``total_sweeps`` is -1
    when PSOR failed, with ``worst_sweeps`` holding the failing step.
    """
    n = g.shape[0]
    a = 1.0 + dt + 2.0 * lam
    n_snap = nt // save_every + 1
    if nt % save_every != 0:
        n_snap += 1
    snaps = np.zeros((n_snap, n))
    snap_steps = np.zeros(n_snap, dtype=np.int64)
    front_k = np.full(nt + 1, -1, dtype=np.int64)
    front_vals = np.zeros((nt + 1, strip))
    w = np.zeros(n)
    b = np.zeros(n)
    d = np.zeros(n)
    y = np.zeros(n)
    out = np.zeros(n)
    total = 0
    worst_it = 0
    worst_viol = 0.0
    si = 1
    for step in range(1, nt + 1):
        for j in range(n):
            b[j] = w[j] + dt * g[j]
        if method == BRENNAN_SCHWARTZ:
            lcp_brennan_schwartz(a, lam, b, out, d, y)
            if lcp_violation(a, lam, b, out) > tol:
                it = lcp_psor(a, lam, b, out, omega, tol, max_iter)
                if it < 0:
                    return snaps, snap_steps, front_k, front_vals, -1, step, 0.0
                total += it
                if it > worst_it:
                    worst_it = it
        else:
            for j in range(n):
                out[j] = w[j]
            it = lcp_psor(a, lam, b, out, omega, tol, max_iter)
            if it < 0:
                return snaps, snap_steps, front_k, front_vals, -1, step, 0.0
            total += it
            if it > worst_it:
                worst_it = it
        v = lcp_violation(a, lam, b, out)
        if v > worst_viol:
            worst_viol = v
        for j in range(n):
            w[j] = out[j]
        k = _last_positive(w, 0.0)
        front_k[step] = k
        if k >= 0:
            for i in range(strip):
                jj = k - strip + 2 + i
                front_vals[step, i] = w[jj] if 0 <= jj < n else 0.0
        if step % save_every == 0 or step == nt:
            for j in range(n):
                snaps[si, j] = w[j]
            snap_steps[si] = step
            si += 1
    return snaps, snap_steps, front_k, front_vals, total, worst_it, worst_viol


@njit(cache=True)
def steady_state(g, h):
    """Discrete perpetual problem ``-W'' + W = g`` under ``W >= 0``."""
    n = g.shape[0]
    c = 1.0 / (h * h)
    a = 1.0 + 2.0 * c
    out = np.zeros(n)
    d = np.zeros(n)
    y = np.zeros(n)
    lcp_brennan_schwartz(a, c, g, out, d, y)
    return out, lcp_violation(a, c, g, out)
