"""GARCH(1,1) volatility recursion.

Covers the four behaviors the estimation theory needs from a volatility
model: the presample-truncated filter sigma2_t(theta) with its analytic
parameter derivatives, exact path simulation, and the scaling map
theta -> theta_lambda under which the filter is lambda^2-homogeneous.

The model abstraction (VolatilityModel) documents that the theory holds
for a general sigma(.; theta) class; GARCH(1,1) is the one instance
implemented.  Everything is a pure function of its inputs and safe to call
concurrently.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels, distributions

__all__ = [
    "GarchParams",
    "FilterOutput",
    "InitScheme",
    "VolatilityModel",
    "Garch11",
    "filter",
    "simulate",
    "scale_params",
]

# How sigma2_1 is chosen: a fixed positive number, the sample second moment
# of the returns ("mean_square", the default), or omega itself ("omega").
# The "omega" scheme keeps the filter exactly scale-homogeneous in theta,
# which turns two first-order-condition identities into exact statements;
# see the qmle module.  Whatever the scheme, sigma2_1 is clamped below at
# omega so the positivity floor sigma2_t >= omega holds at every index.
InitScheme = Union[float, str]

_INIT_SCHEMES = ("mean_square", "omega")


@dataclass(frozen=True)
class GarchParams:
    """Parameter triple theta = (omega, alpha, beta)."""

    omega: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        for name in ("omega", "alpha", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError("%s must be a finite number, got %r" % (name, v))
        if not self.omega > 0.0:
            raise ValueError("omega must be positive, got %g" % self.omega)
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("alpha and beta must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.alpha, self.beta], dtype=float)

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta


@dataclass(frozen=True)
class FilterOutput:
    """Filtered variance path and its parameter derivatives.

    Row t-1 of each array refers to time t for t = 1..n+1, so the last row
    is the one-step-ahead prediction.  D = dsigma2 / (2 sigma2) is the
    logarithmic-derivative process driving the asymptotic covariance.
    """

    sigma2: np.ndarray
    dsigma2: np.ndarray
    D: np.ndarray


def _resolve_init(returns: np.ndarray, init: InitScheme) -> tuple[int, float]:
    if isinstance(init, str):
        if init == "mean_square":
            return _kernels.INIT_FIXED, float(np.mean(returns * returns))
        if init == "omega":
            return _kernels.INIT_OMEGA, 0.0
        raise ValueError("init must be a positive number or one of %r, got %r" % (_INIT_SCHEMES, init))
    value = float(init)
    if not (math.isfinite(value) and value > 0.0):
        raise ValueError("numeric init must be positive and finite, got %r" % (init,))
    return _kernels.INIT_FIXED, value


def _validate_returns(returns) -> np.ndarray:
    arr = np.ascontiguousarray(returns, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("returns must be a nonempty 1-d array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("returns contain non-finite values")
    return arr


class VolatilityModel(abc.ABC):
    """Volatility model interface: filter, simulate and the scaling map."""

    @abc.abstractmethod
    def filter(self, params: GarchParams, returns, init: InitScheme = "mean_square") -> FilterOutput:
        """Truncated filter with analytic derivatives; outputs length n+1."""

    @abc.abstractmethod
    def simulate(self, params: GarchParams, dist, n: int, burn_in: int,
                 stream: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Exact stationary-start simulation of (returns, sigma2_true)."""

    @abc.abstractmethod
    def scale_params(self, params: GarchParams, lam: float) -> GarchParams:
        """theta_lambda with sigma(x; theta_lambda) = lambda sigma(x; theta)."""


class Garch11(VolatilityModel):
    def filter(self, params: GarchParams, returns, init: InitScheme = "mean_square") -> FilterOutput:
        arr = _validate_returns(returns)
        mode, value = _resolve_init(arr, init)
        sig2, dsig2 = _kernels.garch_filter_grad(
            arr * arr, params.omega, params.alpha, params.beta, mode, value
        )
        D = dsig2 / (2.0 * sig2[:, None])
        return FilterOutput(sigma2=sig2, dsigma2=dsig2, D=D)

    def simulate(self, params: GarchParams, dist, n: int, burn_in: int,
                 stream: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        if not params.persistence < 1.0:
            raise ValueError(
                "simulation requires alpha + beta < 1, got %g" % params.persistence
            )
        if n < 1:
            raise ValueError("n must be at least 1")
        if burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        eta = distributions.sample(dist, n + burn_in, stream)
        eps, sig2 = _kernels.garch_simulate_kernel(eta, params.omega, params.alpha, params.beta)
        return eps[burn_in:], sig2[burn_in:]

    def scale_params(self, params: GarchParams, lam: float) -> GarchParams:
        if not lam > 0.0:
            raise ValueError("lambda must be positive")
        lam2 = lam * lam
        return GarchParams(lam2 * params.omega, lam2 * params.alpha, params.beta)


GARCH11 = Garch11()


def filter(params: GarchParams, returns, init: InitScheme = "mean_square") -> FilterOutput:
    return GARCH11.filter(params, returns, init)


def simulate(params: GarchParams, dist, n: int, burn_in: int,
             stream: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    return GARCH11.simulate(params, dist, n, burn_in, stream)


def scale_params(params: GarchParams, lam: float) -> GarchParams:
    return GARCH11.scale_params(params, lam)
