"""Innovation distributions and their lower-tail quantities.

Two laws are supported, both normalized to unit second moment: the standard
normal, and the Student-t with nu > 4 degrees of freedom scaled by
sigma_nu = sqrt((nu-2)/nu).  Besides sampling and density/quantile
evaluation, the module computes the tail quantities that drive the ES
asymptotics,

    xi     lower alpha-quantile (negative for alpha < 1/2)
    mu     -E[eta | eta < xi] > 0
    p      E[eta^2 1{eta < xi}] - alpha
    q      E[eta^3 1{eta < xi}]
    kappa  E[eta^4]

by two independent routes: closed forms and adaptive quadrature.  The
quadrature route is the oracle the closed forms are tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

__all__ = [
    "InnovationDist",
    "TailQuantities",
    "QuadratureError",
    "normal",
    "student_t",
    "pdf",
    "cdf",
    "inv_cdf",
    "sample",
    "tail_quantities_closed",
    "tail_quantities_numeric",
]

NORMAL = "normal"
STUDENT_T = "student_t"

# Quadrature targets: absolute tolerance requested from QUADPACK and the
# ceiling on the error estimate it reports back.
_QUAD_EPSABS = 1e-12
_QUAD_MAX_ERR = 1e-10


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature cannot reach the required tolerance."""


@dataclass(frozen=True)
class InnovationDist:
    """Innovation law with unit second moment.

    kind is "normal" or "student_t"; nu and sigma_nu are populated for the
    Student-t only.  Instances are immutable and safe to share across
    threads.
    """

    kind: str
    nu: float | None = None
    sigma_nu: float | None = None

    def __post_init__(self) -> None:
        if self.kind == NORMAL:
            if self.nu is not None or self.sigma_nu is not None:
                raise ValueError("normal law takes no degrees of freedom")
        elif self.kind == STUDENT_T:
            if self.nu is None or not self.nu > 4.0:
                raise ValueError(
                    "student_t requires nu > 4 (finite fourth moment), got %r" % (self.nu,)
                )
            expected = math.sqrt((self.nu - 2.0) / self.nu)
            if self.sigma_nu is None or abs(self.sigma_nu - expected) > 1e-15:
                raise ValueError("sigma_nu must equal sqrt((nu-2)/nu)")
        else:
            raise ValueError("unknown innovation kind %r" % (self.kind,))


def normal() -> InnovationDist:
    return InnovationDist(NORMAL)


def student_t(nu: float) -> InnovationDist:
    nu = float(nu)
    if not nu > 4.0:
        raise ValueError("student_t requires nu > 4, got %g" % nu)
    return InnovationDist(STUDENT_T, nu=nu, sigma_nu=math.sqrt((nu - 2.0) / nu))


@dataclass(frozen=True)
class TailQuantities:
    alpha: float
    xi: float
    mu: float
    p: float
    q: float
    kappa: float

    def __post_init__(self) -> None:
        if self.xi < 0.0 and not self.mu > 0.0:
            raise ValueError("mu must be positive when xi < 0")
        if self.kappa < 1.0:
            raise ValueError("kappa below the Jensen bound 1")


def pdf(dist: InnovationDist, x):
    if dist.kind == NORMAL:
        return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)
    return stats.t.pdf(x, dist.nu, scale=dist.sigma_nu)


def cdf(dist: InnovationDist, x):
    if dist.kind == NORMAL:
        return special.ndtr(x)
    return stats.t.cdf(x, dist.nu, scale=dist.sigma_nu)


def inv_cdf(dist: InnovationDist, p):
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    if dist.kind == NORMAL:
        out = special.ndtri(p_arr)
    else:
        out = stats.t.ppf(p_arr, dist.nu, scale=dist.sigma_nu)
    return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out


def sample(dist: InnovationDist, n: int, stream: np.random.Generator) -> np.ndarray:
    """n iid draws via the inverse-CDF transform of uniforms.

    The transform (rather than native normal/t samplers) ties the draws to
    the raw uniform stream only, so every consumer of a given RNG stream
    sees the same values regardless of library version details.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    u = stream.random(n)
    # A uniform of exactly 0.0 would map to -inf; nudge into the open interval.
    tiny = np.finfo(float).tiny
    np.clip(u, tiny, 1.0 - 2.2e-16, out=u)
    if dist.kind == NORMAL:
        return special.ndtri(u)
    return dist.sigma_nu * stats.t.ppf(u, dist.nu)


def tail_quantities_closed(dist: InnovationDist, alpha: float) -> TailQuantities:
    """Closed-form tail quantities.

    Normal: xi = Phi^{-1}(alpha), mu = phi(xi)/alpha, p = -xi*phi(xi),
    q = -(2 + xi^2)*phi(xi), kappa = 3.

    Normalized Student-t: with xi = sigma_nu * F_nu^{-1}(alpha) and
    f_{nu-2}, F_{nu-2} the *standard* t density/cdf with nu-2 degrees of
    freedom, mu = f_{nu-2}(xi)/alpha,
    p = F_{nu-2}(xi) - alpha - xi*f_{nu-2}(xi),
    q = -(2*(nu*sigma_nu^2 + xi^2)/(nu-3) + xi^2)*f_{nu-2}(xi),
    kappa = 3*(nu-2)/(nu-4).

    The p expression needs the F_{nu-2}(xi) - alpha term: the truncated
    second moment of the t satisfies
    E[eta^2 1{eta<xi}] = F_{nu-2}(xi) - xi*f_{nu-2}(xi), and F_{nu-2}(xi)
    only collapses to alpha in the normal limit.  Dropping it leaves p off
    by ~0.04 at (nu=6, alpha=0.05), which quadrature flags immediately.
    """
    _check_alpha(alpha)
    if dist.kind == NORMAL:
        xi = float(special.ndtri(alpha))
        phi_xi = math.exp(-0.5 * xi * xi) / math.sqrt(2.0 * math.pi)
        mu = phi_xi / alpha
        p = -xi * phi_xi
        q = -(2.0 + xi * xi) * phi_xi
        kappa = 3.0
    else:
        nu = dist.nu
        s = dist.sigma_nu
        xi = s * float(stats.t.ppf(alpha, nu))
        f_m2 = float(stats.t.pdf(xi, nu - 2.0))
        F_m2 = float(stats.t.cdf(xi, nu - 2.0))
        mu = f_m2 / alpha
        p = F_m2 - alpha - xi * f_m2
        q = -(2.0 * (nu * s * s + xi * xi) / (nu - 3.0) + xi * xi) * f_m2
        kappa = 3.0 * (nu - 2.0) / (nu - 4.0)
    return TailQuantities(alpha=alpha, xi=xi, mu=mu, p=p, q=q, kappa=kappa)


def tail_quantities_numeric(dist: InnovationDist, alpha: float) -> TailQuantities:
    """Quadrature route for the same quantities.

    xi is found by root-finding on the cdf; the truncated moments are
    adaptive Gauss-Kronrod integrals of x^k * f over (-inf, xi], and kappa
    integrates x^4 * f over the whole line.  Independent of the closed
    forms by construction, so the two routes check each other.
    """
    _check_alpha(alpha)
    from scipy.optimize import brentq

    lo, hi = -1e3, 0.0
    xi = float(brentq(lambda x: cdf(dist, x) - alpha, lo, hi, xtol=1e-14, rtol=8.9e-16))

    def moment(k: int, upper: float) -> float:
        val, err = integrate.quad(
            lambda x: x**k * pdf(dist, x), -np.inf, upper,
            epsabs=_QUAD_EPSABS, epsrel=1e-11, limit=400,
        )
        if err > _QUAD_MAX_ERR:
            raise QuadratureError(
                "quadrature for moment %d reached tolerance %.3e > %.1e" % (k, err, _QUAD_MAX_ERR)
            )
        return val

    m1 = moment(1, xi)
    m2 = moment(2, xi)
    m3 = moment(3, xi)
    lower_fourth = moment(4, 0.0)
    kappa = lower_fourth + (lower_fourth if _is_symmetric(dist) else _upper_fourth(dist))
    return TailQuantities(
        alpha=alpha,
        xi=xi,
        mu=-m1 / alpha,
        p=m2 - alpha,
        q=m3,
        kappa=kappa,
    )


def _upper_fourth(dist: InnovationDist) -> float:
    val, err = integrate.quad(
        lambda x: x**4 * pdf(dist, x), 0.0, np.inf,
        epsabs=_QUAD_EPSABS, epsrel=1e-11, limit=400,
    )
    if err > _QUAD_MAX_ERR:
        raise QuadratureError("upper fourth-moment quadrature too loose: %.3e" % err)
    return val


def _is_symmetric(dist: InnovationDist) -> bool:
    # Both supported laws are symmetric; kept explicit for future laws.
    return True


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5), got %r" % (alpha,))
