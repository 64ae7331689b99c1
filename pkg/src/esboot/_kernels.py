"""Numba kernels for the GARCH(1,1) filter, QML criterion and optimizer.

Everything in this module is pure float64 arithmetic: no RNG, no Python
objects, no threading state.  Identical inputs give bit-identical outputs,
which is what makes the bootstrap and the Monte Carlo studies reproducible
independently of the worker count.  All kernels release the GIL so they can
run concurrently on a thread pool.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Initialization modes for the truncated filter.
INIT_FIXED = 0  # sigma2_1 = init_value (clamped below at omega)
INIT_OMEGA = 1  # sigma2_1 = omega (exactly scale-homogeneous in theta)


@njit(cache=True, nogil=True)
def garch_filter(eps2, omega, alpha, beta, init_mode, init_value):
    """Truncated volatility filter.

    eps2 holds the squared returns for t = 1..n.  The output has length
    n + 1: entry t - 1 is sigma2_t for t = 1..n+1, so the last entry is the
    one-step-ahead variance used by the ES estimator.
    """
    n = eps2.shape[0]
    sig2 = np.empty(n + 1)
    s = omega if init_mode == INIT_OMEGA else init_value
    if s < omega:
        s = omega
    sig2[0] = s
    for t in range(n):
        s = omega + alpha * eps2[t] + beta * s
        sig2[t + 1] = s
    return sig2


@njit(cache=True, nogil=True)
def garch_filter_grad(eps2, omega, alpha, beta, init_mode, init_value):
    """Filter plus the derivative recursion d sigma2_t / d theta.

    The initial value is treated as constant in theta, so the derivative
    rows start at zero.  Returns (sig2, dsig2) with shapes (n+1,) and
    (n+1, 3); column order is (omega, alpha, beta).
    """
    n = eps2.shape[0]
    sig2 = np.empty(n + 1)
    dsig2 = np.zeros((n + 1, 3))
    s = omega if init_mode == INIT_OMEGA else init_value
    if s < omega:
        s = omega
    sig2[0] = s
    dw = 0.0
    da = 0.0
    db = 0.0
    for t in range(n):
        prev = s
        dw = 1.0 + beta * dw
        da = eps2[t] + beta * da
        db = prev + beta * db
        s = omega + alpha * eps2[t] + beta * prev
        sig2[t + 1] = s
        dsig2[t + 1, 0] = dw
        dsig2[t + 1, 1] = da
        dsig2[t + 1, 2] = db
    return sig2, dsig2


@njit(cache=True, nogil=True)
def qml_criterion(num2, eps2, omega, alpha, beta, init_mode, init_value):
    """Gaussian quasi-log-likelihood (averaged, constants dropped).

    num2 is the squared series in the quadratic term and eps2 the squared
    series driving the filter.  For an ordinary fit the two are the same
    array; the bootstrap criterion puts the resampled squared returns in
    num2 while the filter keeps running on the original ones.
    """
    n = eps2.shape[0]
    s = omega if init_mode == INIT_OMEGA else init_value
    if s < omega:
        s = omega
    acc = 0.0
    for t in range(n):
        if not (s > 0.0 and np.isfinite(s)):
            return -np.inf
        acc += -0.5 * num2[t] / s - 0.5 * np.log(s)
        s = omega + alpha * eps2[t] + beta * s
    acc /= n
    if not np.isfinite(acc):
        return -np.inf
    return acc


@njit(cache=True, nogil=True)
def _project(x, lo, hi, sum_cap):
    """Pull a candidate point back into the feasible box in place.

    Box violations are reflected once and then clipped; the stationarity
    cap alpha + beta <= sum_cap is restored by an even split of the excess.
    """
    for i in range(3):
        v = x[i]
        if v < lo[i]:
            v = lo[i] + (lo[i] - v)
        elif v > hi[i]:
            v = hi[i] - (v - hi[i])
        if v < lo[i]:
            v = lo[i]
        elif v > hi[i]:
            v = hi[i]
        x[i] = v
    excess = x[1] + x[2] - sum_cap
    if excess > 0.0:
        a = x[1] - 0.5 * excess
        b = x[2] - 0.5 * excess
        if a < lo[1]:
            b -= lo[1] - a
            a = lo[1]
        if b < lo[2]:
            a -= lo[2] - b
            b = lo[2]
        x[1] = a
        x[2] = b


@njit(cache=True, nogil=True)
def nelder_mead_qml(num2, eps2, init_mode, init_value, x0, lo, hi, sum_cap,
                    tol_f, tol_x, max_iter):
    """Maximize the QML criterion with a box-constrained Nelder-Mead.

    Standard simplex coefficients (reflect 1, expand 2, contract 1/2,
    shrink 1/2).  Infeasible proposals are projected before evaluation, so
    every vertex the search ever holds is feasible.  The simplex-size test
    is relative to each coordinate's bound span, which keeps the stopping
    rule invariant under rescaling the data together with the box.  Returns
    (theta, value, iterations, converged).
    """
    dim = 3
    npt = dim + 1
    simplex = np.empty((npt, dim))
    fvals = np.empty(npt)
    span = np.empty(dim)
    for j in range(dim):
        w = hi[j] - lo[j]
        span[j] = w if w > 0.0 else 1.0

    for j in range(dim):
        simplex[0, j] = x0[j]
    _project(simplex[0], lo, hi, sum_cap)
    for i in range(dim):
        for j in range(dim):
            simplex[i + 1, j] = simplex[0, j]
        step = 0.05 * abs(simplex[0, i])
        if step == 0.0:
            step = 2.5e-4 * (hi[i] - lo[i])
        simplex[i + 1, i] = simplex[0, i] + step
        _project(simplex[i + 1], lo, hi, sum_cap)
        # A projected vertex can collapse onto the base point; nudge inward.
        same = True
        for j in range(dim):
            if simplex[i + 1, j] != simplex[0, j]:
                same = False
        if same:
            simplex[i + 1, i] = simplex[0, i] - step
            _project(simplex[i + 1], lo, hi, sum_cap)

    for i in range(npt):
        fvals[i] = qml_criterion(num2, eps2, simplex[i, 0], simplex[i, 1],
                                 simplex[i, 2], init_mode, init_value)

    order = np.argsort(-fvals)
    simplex = simplex[order]
    fvals = fvals[order]

    xr = np.empty(dim)
    xe = np.empty(dim)
    xc = np.empty(dim)
    centroid = np.empty(dim)

    iters = 0
    converged = False
    while iters < max_iter:
        iters += 1

        fspread = abs(fvals[0] - fvals[npt - 1])
        xspread = 0.0
        for i in range(1, npt):
            for j in range(dim):
                d = abs(simplex[i, j] - simplex[0, j]) / span[j]
                if d > xspread:
                    xspread = d
        if fspread <= tol_f and xspread <= tol_x:
            converged = True
            break

        for j in range(dim):
            c = 0.0
            for i in range(npt - 1):
                c += simplex[i, j]
            centroid[j] = c / (npt - 1)

        for j in range(dim):
            xr[j] = centroid[j] + (centroid[j] - simplex[npt - 1, j])
        _project(xr, lo, hi, sum_cap)
        fr = qml_criterion(num2, eps2, xr[0], xr[1], xr[2],
                           init_mode, init_value)

        if fr > fvals[0]:
            for j in range(dim):
                xe[j] = centroid[j] + 2.0 * (centroid[j] - simplex[npt - 1, j])
            _project(xe, lo, hi, sum_cap)
            fe = qml_criterion(num2, eps2, xe[0], xe[1], xe[2],
                               init_mode, init_value)
            if fe > fr:
                for j in range(dim):
                    simplex[npt - 1, j] = xe[j]
                fvals[npt - 1] = fe
            else:
                for j in range(dim):
                    simplex[npt - 1, j] = xr[j]
                fvals[npt - 1] = fr
        elif fr > fvals[npt - 2]:
            for j in range(dim):
                simplex[npt - 1, j] = xr[j]
            fvals[npt - 1] = fr
        else:
            if fr > fvals[npt - 1]:
                # outside contraction
                for j in range(dim):
                    xc[j] = centroid[j] + 0.5 * (xr[j] - centroid[j])
            else:
                # inside contraction
                for j in range(dim):
                    xc[j] = centroid[j] - 0.5 * (centroid[j] - simplex[npt - 1, j])
            _project(xc, lo, hi, sum_cap)
            fc = qml_criterion(num2, eps2, xc[0], xc[1], xc[2],
                               init_mode, init_value)
            if fc > fr and fc > fvals[npt - 1]:
                for j in range(dim):
                    simplex[npt - 1, j] = xc[j]
                fvals[npt - 1] = fc
            else:
                # shrink toward the best vertex
                for i in range(1, npt):
                    for j in range(dim):
                        simplex[i, j] = simplex[0, j] + 0.5 * (simplex[i, j] - simplex[0, j])
                    _project(simplex[i], lo, hi, sum_cap)
                    fvals[i] = qml_criterion(num2, eps2, simplex[i, 0],
                                             simplex[i, 1], simplex[i, 2],
                                             init_mode, init_value)

        order = np.argsort(-fvals)
        simplex = simplex[order]
        fvals = fvals[order]

    theta = np.empty(dim)
    for j in range(dim):
        theta[j] = simplex[0, j]
    return theta, fvals[0], iters, converged


@njit(cache=True, nogil=True)
def garch_simulate_kernel(eta, omega, alpha, beta):
    """Exact GARCH recursion driven by the innovation array.

    Starts at the stationary variance omega / (1 - alpha - beta).  Returns
    (eps, sig2) with len(sig2) = len(eta) + 1; sig2[t] is the variance that
    multiplies eta[t], and the final entry is the next-step variance.
    """
    m = eta.shape[0]
    eps = np.empty(m)
    sig2 = np.empty(m + 1)
    s = omega / (1.0 - alpha - beta)
    for t in range(m):
        sig2[t] = s
        e = np.sqrt(s) * eta[t]
        eps[t] = e
        s = omega + alpha * e * e + beta * s
    sig2[m] = s
    return eps, sig2
