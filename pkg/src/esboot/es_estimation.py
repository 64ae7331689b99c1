"""Second-step ES estimation and the delta-method interval.

Given a QML fit, the residual lower tail yields the innovation-ES
estimate mu_hat, the point estimate ES_hat = mu_hat * sigma_{n+1}(theta_hat),
the plug-in asymptotic covariance Gamma_hat of sqrt(n)(theta_hat - theta0,
mu_hat - mu_alpha), and the normal-approximation confidence interval.
No density estimation appears anywhere on this path; every ingredient is a
sample moment, an order statistic, or a filter derivative.

Tail convention: the empirical alpha-quantile is the order statistic of
rank floor(alpha n) + 1, with tail membership "value <= xi_hat" and ties
broken by index order.  Under this convention the tail always has exactly
floor(alpha n) + 1 elements, which is the identity the bootstrap theory
asserts for the resampled residuals as well.

The covariance assembly uses

    Var[(eta - xi)1{eta<xi}]  = p + alpha + alpha(1-alpha) xi (xi + 2 mu) - (alpha mu)^2
    Cov[eta^2, (eta-xi)1{eta<xi}] = alpha mu - (xi p - q)

which follow from expanding the moments of the truncated variable around
p = E[eta^2 1] - alpha and q = E[eta^3 1]; both expansions are pinned
against direct quadrature in the test suite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .qmle import FitResult

__all__ = [
    "EsEstimate",
    "TailEstimate",
    "GammaHat",
    "EstimationError",
    "SingularMatrixError",
    "empirical_quantile",
    "mu_hat",
    "conditional_es",
    "gamma_hat",
    "asymptotic_interval",
]

MAX_CONDITION = 1e12


class EstimationError(RuntimeError):
    """A precondition of the ES pipeline failed (e.g. non-convergent fit)."""


class SingularMatrixError(EstimationError):
    """J_hat is numerically singular; Gamma_hat cannot be assembled."""


@dataclass(frozen=True)
class TailEstimate:
    """Residual-tail summary: quantile, tail mean and tail size."""

    alpha: float
    xi_hat: float
    mu_hat: float
    tail_count: int


@dataclass(frozen=True)
class EsEstimate:
    alpha: float
    xi_hat: float
    mu_hat: float
    sigma_next: float
    es_hat: float
    tail_count: int


@dataclass(frozen=True)
class GammaHat:
    """Plug-in ingredients and the assembled 4x4 covariance matrix.

    Gamma has the block layout [[(kappa-1)/4 J^{-1}, phi J^{-1} Omega],
    [phi Omega' J^{-1}, nu]] in the (theta, mu) coordinates.
    """

    alpha: float
    kappa_hat: float
    Omega_hat: np.ndarray
    J_hat: np.ndarray
    p_hat: float
    q_hat: float
    xi_hat: float
    mu_hat: float
    sigma2_alpha_hat: float
    x_alpha_hat: float
    phi_alpha_hat: float
    nu_alpha_hat: float
    Gamma: np.ndarray


def tail_rank(alpha: float, n: int) -> int:
    """Rank (1-based) of the tail quantile: floor(alpha n) + 1.

    The product alpha*n is fuzz-corrected before flooring so that a level
    stored as the nearest double to a decimal (0.3 * 10 = 2.999...96 in
    floats) still lands on the intended integer.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5), got %r" % (alpha,))
    m = alpha * n
    if m < 1.0 - 1e-9:
        raise ValueError("alpha*n must be at least 1 (got %g)" % m)
    k = int(math.floor(m + 1e-9 * max(1.0, m))) + 1
    if k > n:
        raise ValueError("tail rank %d exceeds sample size %d" % (k, n))
    return k


def empirical_quantile(values, alpha: float) -> tuple[float, np.ndarray]:
    """Empirical alpha-quantile and the index set of the lower tail.

    Returns (xi, tail_indices) where xi is the rank-(floor(alpha n)+1)
    order statistic and tail_indices are the positions of the k smallest
    values in stable (value, index) order, so len(tail_indices) == k even
    under ties.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("values must be a nonempty 1-d array")
    k = tail_rank(alpha, arr.size)
    order = np.argsort(arr, kind="stable")
    tail = order[:k]
    xi = float(arr[tail[-1]])
    return xi, tail


def mu_hat(residuals, alpha: float) -> TailEstimate:
    """Tail mean estimator mu_hat = -(sum of tail residuals) / tail size."""
    arr = np.asarray(residuals, dtype=float)
    xi, tail = empirical_quantile(arr, alpha)
    mu = -float(np.sum(arr[tail])) / tail.size
    return TailEstimate(alpha=alpha, xi_hat=xi, mu_hat=mu, tail_count=int(tail.size))


def conditional_es(fit: FitResult, alpha: float) -> EsEstimate:
    """Point estimate ES_hat = mu_hat * sigma_{n+1}(theta_hat)."""
    _require_converged(fit)
    tail = mu_hat(fit.residuals, alpha)
    sigma_next = float(math.sqrt(fit.filter_at_opt.sigma2[fit.n]))
    return EsEstimate(
        alpha=alpha,
        xi_hat=tail.xi_hat,
        mu_hat=tail.mu_hat,
        sigma_next=sigma_next,
        es_hat=tail.mu_hat * sigma_next,
        tail_count=tail.tail_count,
    )


def gamma_hat(fit: FitResult, alpha: float) -> GammaHat:
    """Plug-in covariance of sqrt(n)(theta_hat - theta0, mu_hat - mu_alpha).

    All moments are sample averages over t = 1..n evaluated at theta_hat:
    kappa from residual fourth powers, Omega and J from the filter's
    D process, p and q from tail residual powers.
    """
    _require_converged(fit)
    res = fit.residuals
    n = fit.n
    D = fit.filter_at_opt.D[:n]

    kappa = float(np.mean(res**4))
    Omega = D.mean(axis=0)
    J = (D.T @ D) / n

    cond = float(np.linalg.cond(J))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularMatrixError(
            "J_hat is numerically singular (condition number %.3e); "
            "this occurs for degenerate fits such as alpha=beta=0" % cond
        )

    xi, tail = empirical_quantile(res, alpha)
    tail_vals = res[tail]
    mu = -float(np.sum(tail_vals)) / tail.size
    p = float(np.sum(tail_vals**2)) / n - alpha
    q = float(np.sum(tail_vals**3)) / n

    var_trunc = p + alpha + alpha * (1.0 - alpha) * xi * (xi + 2.0 * mu) - (alpha * mu) ** 2
    cov_trunc = alpha * mu - (xi * p - q)
    sigma2_alpha = var_trunc / alpha**2
    x_alpha = -cov_trunc / alpha
    phi_alpha = 0.5 * x_alpha - mu * (kappa - 1.0) / 4.0
    nu_alpha = sigma2_alpha - x_alpha * mu + (kappa - 1.0) / 4.0 * mu**2
    if nu_alpha < 0.0:
        warnings.warn(
            "plug-in nu_alpha_hat is negative (%g); the sample is too degenerate "
            "for the asymptotic variance to be meaningful" % nu_alpha,
            RuntimeWarning,
        )

    J_inv = np.linalg.inv(J)
    J_inv = 0.5 * (J_inv + J_inv.T)
    cross = phi_alpha * (J_inv @ Omega)
    Gamma = np.empty((4, 4))
    Gamma[:3, :3] = (kappa - 1.0) / 4.0 * J_inv
    Gamma[:3, 3] = cross
    Gamma[3, :3] = cross
    Gamma[3, 3] = nu_alpha

    return GammaHat(
        alpha=alpha,
        kappa_hat=kappa,
        Omega_hat=Omega,
        J_hat=J,
        p_hat=p,
        q_hat=q,
        xi_hat=xi,
        mu_hat=mu,
        sigma2_alpha_hat=sigma2_alpha,
        x_alpha_hat=x_alpha,
        phi_alpha_hat=phi_alpha,
        nu_alpha_hat=nu_alpha,
        Gamma=Gamma,
    )


def asymptotic_interval(fit: FitResult, es: EsEstimate, gh: GammaHat,
                        gamma: float) -> tuple[float, float]:
    """Delta-method interval ES_hat -+ Phi^{-1}(gamma/2)/sqrt(n) * sqrt(v'Gamma v).

    v stacks mu_hat * d sigma_{n+1}/d theta and sigma_{n+1}; the derivative
    comes from the analytic filter, d sigma/d theta = d sigma2/d theta / (2 sigma).
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    n = fit.n
    sigma_next = es.sigma_next
    dsigma_next = fit.filter_at_opt.dsigma2[n] / (2.0 * sigma_next)
    v = np.empty(4)
    v[:3] = es.mu_hat * dsigma_next
    v[3] = sigma_next
    quad = float(v @ gh.Gamma @ v)
    if quad < 0.0:
        warnings.warn(
            "quadratic form v'Gamma v is negative (%g); clamping to zero" % quad,
            RuntimeWarning,
        )
        quad = 0.0
    half = abs(float(special.ndtri(gamma / 2.0))) * math.sqrt(quad) / math.sqrt(n)
    return es.es_hat - half, es.es_hat + half


def _require_converged(fit: FitResult) -> None:
    if not fit.converged:
        raise EstimationError("QML fit did not converge; ES estimation requires a convergent fit")
