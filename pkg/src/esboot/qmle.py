"""Quasi-maximum-likelihood estimation of the GARCH parameters.

The criterion is the averaged Gaussian quasi-log-likelihood

    L_n(theta) = (1/n) sum_t [ -eps_t^2 / (2 sigma2_t(theta)) - log(sigma_t(theta)) ]

with sigma2_t from the truncated filter.  It is maximized over a compact
box by a bounded Nelder-Mead (derivative-free; the analytic filter
derivatives stay dedicated to the covariance plug-ins).  A useful exact
consequence of scale homogeneity: when the filter initialization scales
with theta (init="omega"), any interior maximizer produces residuals whose
second moment is 1 up to optimizer tolerance, because perturbing theta
along (lam^2 omega, lam^2 alpha, beta) changes the criterion by
mean(residual^2)/(2 lam^2) - log(lam), which is stationary at lam=1 only
at unit second moment.  With the default data-driven init the identity
holds up to an O(1/n) start-up term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .volatility import FilterOutput, GarchParams, InitScheme, _resolve_init, _validate_returns

__all__ = ["QmleOptions", "FitResult", "criterion", "default_options", "fit"]

SUM_CAP = 1.0 - 1e-6
MIN_OBS = 50


@dataclass(frozen=True)
class QmleOptions:
    """Search region and optimizer settings.

    bounds is ((omega_lo, omega_hi), (alpha_lo, alpha_hi), (beta_lo, beta_hi));
    together with alpha + beta <= 1 - 1e-6 it defines the compact parameter
    space.  starts lists the multistart points.  tol_f / tol_x are the
    Nelder-Mead stopping tolerances: criterion spread across the simplex,
    and simplex size per coordinate as a fraction of the bound span (so the
    stopping rule does not depend on the scale of the data).
    """

    bounds: tuple[tuple[float, float], ...]
    starts: tuple[tuple[float, float, float], ...]
    tol_f: float = 1e-10
    tol_x: float = 1e-8
    max_iter: int = 2000
    init: InitScheme = "mean_square"

    def __post_init__(self) -> None:
        if len(self.bounds) != 3 or len(self.starts) == 0:
            raise ValueError("bounds must have 3 coordinate ranges and starts be nonempty")
        lo, hi = self.lower(), self.upper()
        if np.any(lo > hi):
            raise ValueError("each bound must satisfy lo <= hi")
        if not self.bounds[0][0] > 0.0:
            raise ValueError("omega lower bound must be positive")
        for s in self.starts:
            p = np.asarray(s, dtype=float)
            if np.any(p < lo) or np.any(p > hi) or p[1] + p[2] > SUM_CAP:
                raise ValueError("start %r lies outside the bounds" % (s,))

    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds], dtype=float)

    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds], dtype=float)


@dataclass(frozen=True)
class FitResult:
    """QML estimate with diagnostics and the fitted filter output.

    residuals are eta_hat_t = eps_t / sigma_t(theta_hat) for t = 1..n.
    init_mode / init_value record the resolved filter initialization so the
    bootstrap can re-evaluate the criterion under identical conventions.
    """

    theta_hat: GarchParams
    loglik: float
    iterations: int
    converged: bool
    filter_at_opt: FilterOutput
    residuals: np.ndarray
    options: QmleOptions = field(repr=False)
    init_mode: int = field(repr=False, default=_kernels.INIT_FIXED)
    init_value: float = field(repr=False, default=0.0)

    @property
    def n(self) -> int:
        return self.residuals.shape[0]

    def is_interior(self, rel_margin: float = 1e-4) -> bool:
        """True when theta_hat sits strictly inside the search region."""
        th = self.theta_hat.as_array()
        lo, hi = self.options.lower(), self.options.upper()
        span = hi - lo
        margin = rel_margin * np.maximum(span, 1e-300)
        inside_box = bool(np.all(th > lo + margin) and np.all(th < hi - margin))
        below_cap = th[1] + th[2] < SUM_CAP - rel_margin
        return inside_box and below_cap


def criterion(params: GarchParams, returns, init: InitScheme = "mean_square") -> float:
    """Evaluate L_n(theta); overflow or a dead filter comes back as -inf."""
    arr = _validate_returns(returns)
    mode, value = _resolve_init(arr, init)
    eps2 = arr * arr
    return float(_kernels.qml_criterion(eps2, eps2, params.omega, params.alpha,
                                        params.beta, mode, value))


def default_options(returns, init: InitScheme = "mean_square") -> QmleOptions:
    """Data-adaptive defaults.

    The box is omega in [1e-8 s2, 10 s2], alpha and beta in [0, 0.999]
    (s2 = sample second moment), capped at alpha + beta <= 1 - 1e-6.  The
    three starts pin the implied unconditional variance at s2 and differ in
    how the persistence splits between alpha and beta, which covers the
    criterion's ridge along alpha + beta.
    """
    arr = _validate_returns(returns)
    s2 = float(np.mean(arr * arr))
    if not s2 > 0.0:
        raise ValueError("returns are identically zero; nothing to fit")
    bounds = ((1e-8 * s2, 10.0 * s2), (0.0, 0.999), (0.0, 0.999))
    starts = (
        (s2 * (1.0 - 0.10 - 0.80), 0.10, 0.80),
        (s2 * (1.0 - 0.30 - 0.50), 0.30, 0.50),
        (s2 * (1.0 - 0.05 - 0.90), 0.05, 0.90),
    )
    return QmleOptions(bounds=bounds, starts=starts, init=init)


def fit(returns, options: QmleOptions | None = None) -> FitResult:
    """Maximize the criterion from every start and keep the best point.

    Non-convergence is reported through the flag, not an exception; the
    Monte Carlo layer decides what to do with such fits.  The result is a
    deterministic function of (returns, options).
    """
    arr = _validate_returns(returns)
    n = arr.shape[0]
    if n < MIN_OBS:
        raise ValueError("need at least %d observations, got %d" % (MIN_OBS, n))
    if options is None:
        options = default_options(arr)
    mode, value = _resolve_init(arr, options.init)
    eps2 = arr * arr
    lo, hi = options.lower(), options.upper()

    best = None
    for start in options.starts:
        x0 = np.asarray(start, dtype=float)
        theta, fval, iters, conv = _kernels.nelder_mead_qml(
            eps2, eps2, mode, value, x0, lo, hi, SUM_CAP,
            options.tol_f, options.tol_x, options.max_iter,
        )
        if best is None or fval > best[1]:
            best = (theta, fval, iters, bool(conv))

    theta, fval, iters, conv = best
    params = GarchParams(float(theta[0]), float(theta[1]), float(theta[2]))
    sig2, dsig2 = _kernels.garch_filter_grad(eps2, params.omega, params.alpha,
                                             params.beta, mode, value)
    filt = FilterOutput(sigma2=sig2, dsigma2=dsig2, D=dsig2 / (2.0 * sig2[:, None]))
    residuals = arr / np.sqrt(sig2[:n])
    return FitResult(
        theta_hat=params,
        loglik=float(fval),
        iterations=int(iters),
        converged=conv,
        filter_at_opt=filt,
        residuals=residuals,
        options=options,
        init_mode=mode,
        init_value=value,
    )
