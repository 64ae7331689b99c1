"""Fixed-design residual bootstrap and the three bootstrap intervals.

One replicate: resample innovations from the residual empirical
distribution, scale them by the ORIGINAL fitted volatility path to get
bootstrap returns, re-estimate theta by QMLE in which the filter keeps
running on the original returns (that is the fixed-design part), then
redo the residual-tail step and the one-step-ahead ES.  Replicates are
embarrassingly parallel; replicate b always draws from the RNG stream
derived from (master_seed, "bootstrap", b), so results are identical for
any worker count.

Intervals from B replicates, with d_b = sqrt(n)(ES*_b - ES_hat) and
G, H the empirical quantile functions of d_b and |d_b| (rank-ceil(p B)
order statistics):

    EP  [ES_hat - G(1-gamma/2)/sqrt(n), ES_hat - G(gamma/2)/sqrt(n)]
    RT  [ES_hat + G(gamma/2)/sqrt(n),   ES_hat + G(1-gamma/2)/sqrt(n)]
    SY  ES_hat -+ H(1-gamma)/sqrt(n)

EP and RT are reflections of each other, so their lengths agree; the
length fields are computed once from the quantile spread, making that
equality exact rather than a floating-point accident.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels, rng
from .es_estimation import mu_hat as residual_tail
from .qmle import SUM_CAP, FitResult
from .volatility import GarchParams

__all__ = [
    "BootstrapContext",
    "BootstrapReplicate",
    "IntervalSet",
    "BootstrapError",
    "bootstrap_criterion",
    "bootstrap_replicate",
    "run",
    "intervals",
]

MIN_REPLICATES = 100
MAX_FAILURE_SHARE = 0.05


class BootstrapError(RuntimeError):
    """Raised when the replicate set is unusable (too many failures)."""


@dataclass(frozen=True)
class BootstrapContext:
    """Immutable inputs shared by all replicates of one bootstrap run."""

    returns: np.ndarray
    fit: FitResult
    alpha: float
    es_hat: float

    def __post_init__(self) -> None:
        n = self.returns.shape[0]
        if self.fit.residuals.shape[0] != n:
            raise ValueError("fit residuals and returns disagree in length")
        if self.fit.filter_at_opt.sigma2.shape[0] != n + 1:
            raise ValueError("fitted volatility path must have length n+1")
        if not self.fit.converged:
            raise ValueError("bootstrap requires a convergent original fit")

    @property
    def n(self) -> int:
        return self.returns.shape[0]


@dataclass(frozen=True)
class BootstrapReplicate:
    theta_star: GarchParams
    mu_star: float
    es_star: float
    converged: bool


@dataclass(frozen=True)
class IntervalSet:
    """EP / RT / SY intervals plus the lengths used for reporting.

    ep_length == rt_length by construction (one shared float); sy is built
    by reflecting its upper endpoint through es_hat, so its centering
    identity hi - es_hat == es_hat - lo is exact too.
    """

    ep: tuple[float, float]
    rt: tuple[float, float]
    sy: tuple[float, float]
    gamma: float
    B_effective: int
    ep_length: float
    rt_length: float
    sy_length: float


def bootstrap_criterion(ctx: BootstrapContext, eps_star: np.ndarray,
                        params: GarchParams) -> float:
    """Bootstrap QML criterion: resampled data, original-design filter."""
    eps2 = ctx.returns * ctx.returns
    return float(_kernels.qml_criterion(
        eps_star * eps_star, eps2, params.omega, params.alpha, params.beta,
        ctx.fit.init_mode, ctx.fit.init_value,
    ))


def bootstrap_replicate(ctx: BootstrapContext, stream: np.random.Generator) -> BootstrapReplicate:
    """One full replicate: resample, refit, re-estimate the tail and ES."""
    n = ctx.n
    fit = ctx.fit
    idx = stream.integers(0, n, size=n)
    eta_star = fit.residuals[idx]
    eps_star = np.sqrt(fit.filter_at_opt.sigma2[:n]) * eta_star

    eps2 = ctx.returns * ctx.returns
    options = fit.options
    theta, _, _, conv = _kernels.nelder_mead_qml(
        eps_star * eps_star, eps2, fit.init_mode, fit.init_value,
        fit.theta_hat.as_array(), options.lower(), options.upper(), SUM_CAP,
        options.tol_f, options.tol_x, options.max_iter,
    )
    params = GarchParams(float(theta[0]), float(theta[1]), float(theta[2]))

    sig2_star = _kernels.garch_filter(eps2, params.omega, params.alpha, params.beta,
                                      fit.init_mode, fit.init_value)
    residuals_star = eps_star / np.sqrt(sig2_star[:n])
    tail = residual_tail(residuals_star, ctx.alpha)
    sigma_next = math.sqrt(float(sig2_star[n]))
    return BootstrapReplicate(
        theta_star=params,
        mu_star=tail.mu_hat,
        es_star=tail.mu_hat * sigma_next,
        converged=bool(conv),
    )


def run(ctx: BootstrapContext, B: int, master_seed: int,
        workers: int = 1) -> list[BootstrapReplicate]:
    """B replicates with per-replicate RNG streams; order-stable in b.

    Fails hard when more than MAX_FAILURE_SHARE of the replicate fits do
    not converge; silent exclusion at such rates would bias the intervals.
    """
    if B < MIN_REPLICATES:
        raise ValueError("B must be at least %d, got %d" % (MIN_REPLICATES, B))

    def one(b: int) -> BootstrapReplicate:
        return bootstrap_replicate(ctx, rng.stream(master_seed, "bootstrap", b))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            replicates = list(pool.map(one, range(B)))
    else:
        replicates = [one(b) for b in range(B)]

    failures = sum(1 for r in replicates if not r.converged)
    if failures > MAX_FAILURE_SHARE * B:
        raise BootstrapError(
            "%d of %d bootstrap fits failed to converge (above the %.0f%% limit)"
            % (failures, B, 100 * MAX_FAILURE_SHARE)
        )
    return replicates


def ceil_rank(p: float, m: int) -> int:
    """Rank ceil(p*m), fuzz-corrected for decimal levels, clipped to [1, m]."""
    x = p * m
    k = int(math.ceil(x - 1e-9 * max(1.0, abs(x))))
    return min(max(k, 1), m)


def intervals(replicates: list[BootstrapReplicate], es_hat: float, n: int,
              gamma: float) -> IntervalSet:
    """EP / RT / SY intervals from the convergent replicates."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    es_stars = np.array([r.es_star for r in replicates if r.converged])
    B_eff = es_stars.size
    if B_eff < MIN_REPLICATES:
        raise BootstrapError(
            "need at least %d convergent replicates, have %d" % (MIN_REPLICATES, B_eff)
        )
    root_n = math.sqrt(n)
    d = np.sort(root_n * (es_stars - es_hat))
    g_lo = float(d[ceil_rank(gamma / 2.0, B_eff) - 1])
    g_hi = float(d[ceil_rank(1.0 - gamma / 2.0, B_eff) - 1])
    hw_lo = g_lo / root_n
    hw_hi = g_hi / root_n
    ep = (es_hat - hw_hi, es_hat - hw_lo)
    rt = (es_hat + hw_lo, es_hat + hw_hi)
    pct_length = hw_hi - hw_lo

    abs_d = np.sort(np.abs(d))
    h = float(abs_d[ceil_rank(1.0 - gamma, B_eff) - 1])
    sy_hi = es_hat + h / root_n
    # Reflect through es_hat instead of subtracting the half-width again:
    # the subtraction 2*es_hat - sy_hi is exact in IEEE arithmetic, so the
    # centering identity survives serialization round-trips.
    sy_lo = 2.0 * es_hat - sy_hi
    sy = (sy_lo, sy_hi)

    return IntervalSet(
        ep=ep,
        rt=rt,
        sy=sy,
        gamma=gamma,
        B_effective=B_eff,
        ep_length=pct_length,
        rt_length=pct_length,
        sy_length=sy_hi - sy_lo,
    )
