"""Monte Carlo study harness.

Coverage experiments: simulate S trajectories from a GARCH(1,1) DGP, run
the full estimation-plus-bootstrap pipeline on each, classify every
interval against the true conditional ES
mu_alpha * sigma_{n+1}(theta0), and aggregate coverage/length tables.
Also produces the density comparison between the Monte Carlo distribution
of sqrt(n)(mu_hat - mu_alpha) and the bootstrap distribution of
sqrt(n)(mu* - mu_hat) on one fixed sample.

Determinism contract: trajectory i draws from the stream
(master_seed, "trajectory", i) and its bootstrap from the derived seed
(master_seed, "bootstrap", i), so a StudySummary is a pure function of the
Scenario no matter how many workers execute it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as _scipy_stats

from . import bootstrap, es_estimation, qmle, rng, volatility
from .bootstrap import BootstrapContext, BootstrapError, IntervalSet
from .distributions import InnovationDist, tail_quantities_closed
from .es_estimation import EstimationError
from .volatility import GarchParams

__all__ = [
    "Scenario",
    "TrajectoryRecord",
    "IntervalStats",
    "StudySummary",
    "KdeCurve",
    "DensityComparison",
    "StudyError",
    "INTERVAL_TYPES",
    "classify",
    "run_trajectory",
    "run_study",
    "density_comparison",
    "kde",
]

# The asymptotic interval rides along for diagnostics; the primary study
# output covers the three bootstrap constructions.
INTERVAL_TYPES = ("ep", "rt", "sy", "asym")
BOOTSTRAP_INTERVAL_TYPES = ("ep", "rt", "sy")

MAX_EXCLUDED_SHARE = 0.05


class StudyError(RuntimeError):
    """Raised when too many trajectories fail for the averages to mean much."""


@dataclass(frozen=True)
class Scenario:
    label: str
    theta0: GarchParams
    dist: InnovationDist
    alpha: float
    n: int
    gamma: float = 0.10
    B: int = 500
    S: int = 500
    burn_in: int = 1000
    master_seed: int = 20260814

    def __post_init__(self) -> None:
        if not self.theta0.persistence < 1.0:
            raise ValueError("scenario DGP needs alpha0 + beta0 < 1")
        if self.n < qmle.MIN_OBS or self.S < 1 or self.B < bootstrap.MIN_REPLICATES:
            raise ValueError("scenario sizes out of range (n, S, B) = (%d, %d, %d)"
                             % (self.n, self.S, self.B))
        if not (0.0 < self.alpha < 0.5 and 0.0 < self.gamma < 1.0):
            raise ValueError("alpha must be in (0, 0.5) and gamma in (0, 1)")


@dataclass(frozen=True)
class TrajectoryRecord:
    index: int
    excluded: bool
    reason: Optional[str]
    true_es: float
    es_hat: Optional[float]
    intervals: Optional[IntervalSet]
    asym_interval: Optional[tuple[float, float]]
    outcomes: Optional[dict[str, str]]
    lengths: Optional[dict[str, float]]
    fit_converged: bool
    fit_iterations: int


@dataclass(frozen=True)
class IntervalStats:
    """Counts plus the derived percentages for one interval type.

    above_pct is defined as the complement 100 - coverage - below so the
    three percentages partition 100 exactly; the counts partition the
    included total exactly by construction.
    """

    inside_count: int
    below_count: int
    above_count: int
    included: int
    avg_length: float

    @property
    def coverage_pct(self) -> float:
        return 100.0 * self.inside_count / self.included

    @property
    def below_pct(self) -> float:
        return 100.0 * self.below_count / self.included

    @property
    def above_pct(self) -> float:
        return 100.0 - (self.coverage_pct + self.below_pct)


@dataclass(frozen=True)
class StudySummary:
    scenario: Scenario
    stats: dict[str, IntervalStats]
    included_count: int
    excluded_count: int


def classify(interval: tuple[float, float], true_es: float) -> str:
    """Locate the true ES relative to an interval: inside, below or above.

    "below"/"above" describe where the TRUE value sits relative to the
    interval, matching the table orientation in which upper-tail misses
    (true ES above the interval) dominate at small n.
    """
    lo, hi = interval
    if true_es < lo:
        return "below"
    if true_es > hi:
        return "above"
    return "inside"


def true_mu(dist: InnovationDist, alpha: float) -> float:
    return tail_quantities_closed(dist, alpha).mu


def run_trajectory(scenario: Scenario, index: int) -> TrajectoryRecord:
    """Simulate, fit, estimate, bootstrap and classify one trajectory."""
    stream = rng.stream(scenario.master_seed, "trajectory", index)
    returns, sigma2_true = volatility.simulate(
        scenario.theta0, scenario.dist, scenario.n, scenario.burn_in, stream
    )
    true_es = true_mu(scenario.dist, scenario.alpha) * math.sqrt(float(sigma2_true[scenario.n]))

    fit = qmle.fit(returns)
    if not fit.converged:
        return _excluded(index, true_es, fit, "qmle did not converge")

    try:
        es = es_estimation.conditional_es(fit, scenario.alpha)
        gh = es_estimation.gamma_hat(fit, scenario.alpha)
        asym = es_estimation.asymptotic_interval(fit, es, gh, scenario.gamma)
        ctx = BootstrapContext(returns=returns, fit=fit, alpha=scenario.alpha, es_hat=es.es_hat)
        boot_seed = rng.derive_seed(scenario.master_seed, "bootstrap", index)
        replicates = bootstrap.run(ctx, scenario.B, boot_seed, workers=1)
        ivs = bootstrap.intervals(replicates, es.es_hat, scenario.n, scenario.gamma)
    except (EstimationError, BootstrapError) as exc:
        return _excluded(index, true_es, fit, str(exc))

    outcomes = {
        "ep": classify(ivs.ep, true_es),
        "rt": classify(ivs.rt, true_es),
        "sy": classify(ivs.sy, true_es),
        "asym": classify(asym, true_es),
    }
    lengths = {
        "ep": ivs.ep_length,
        "rt": ivs.rt_length,
        "sy": ivs.sy_length,
        "asym": asym[1] - asym[0],
    }
    return TrajectoryRecord(
        index=index,
        excluded=False,
        reason=None,
        true_es=true_es,
        es_hat=es.es_hat,
        intervals=ivs,
        asym_interval=asym,
        outcomes=outcomes,
        lengths=lengths,
        fit_converged=fit.converged,
        fit_iterations=fit.iterations,
    )


def _excluded(index: int, true_es: float, fit, reason: str) -> TrajectoryRecord:
    return TrajectoryRecord(
        index=index,
        excluded=True,
        reason=reason,
        true_es=true_es,
        es_hat=None,
        intervals=None,
        asym_interval=None,
        outcomes=None,
        lengths=None,
        fit_converged=bool(fit.converged) if fit is not None else False,
        fit_iterations=int(fit.iterations) if fit is not None else 0,
    )


def run_study(scenario: Scenario, workers: int = 1) -> StudySummary:
    """All S trajectories, aggregated; deterministic for any worker count."""
    indices = range(scenario.S)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda i: run_trajectory(scenario, i), indices))
    else:
        records = [run_trajectory(scenario, i) for i in indices]

    included = [r for r in records if not r.excluded]
    excluded_count = scenario.S - len(included)
    if excluded_count > MAX_EXCLUDED_SHARE * scenario.S:
        raise StudyError(
            "%d of %d trajectories excluded (limit %.0f%%): %s"
            % (excluded_count, scenario.S, 100 * MAX_EXCLUDED_SHARE,
               "; ".join(sorted({r.reason for r in records if r.excluded}))[:500])
        )
    if not included:
        raise StudyError("no trajectory survived; nothing to aggregate")

    stats = {}
    m = len(included)
    for kind in INTERVAL_TYPES:
        inside = sum(1 for r in included if r.outcomes[kind] == "inside")
        below = sum(1 for r in included if r.outcomes[kind] == "below")
        above = m - inside - below
        avg_length = sum(r.lengths[kind] for r in included) / m
        stats[kind] = IntervalStats(
            inside_count=inside,
            below_count=below,
            above_count=above,
            included=m,
            avg_length=avg_length,
        )
    return StudySummary(
        scenario=scenario,
        stats=stats,
        included_count=m,
        excluded_count=excluded_count,
    )


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


@dataclass(frozen=True)
class DensityComparison:
    grid: np.ndarray
    sim_density: np.ndarray
    boot_density: np.ndarray
    sim_values: np.ndarray
    boot_values: np.ndarray
    ks_distance: float
    sim_bandwidth: float
    boot_bandwidth: float
    base_index: int


def kde(values, bandwidth: Optional[float] = None, grid: Optional[np.ndarray] = None,
        n_grid: int = 512) -> KdeCurve:
    """Gaussian kernel density estimate with Silverman's default bandwidth."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 30:
        raise ValueError("kde needs at least 30 values")
    if bandwidth is None:
        sd = float(np.std(arr, ddof=1))
        if not sd > 0.0:
            raise ValueError("degenerate sample; pass an explicit bandwidth")
        bandwidth = 1.06 * sd * arr.size ** (-0.2)
    h = float(bandwidth)
    if grid is None:
        grid = np.linspace(arr.min() - 3.0 * h, arr.max() + 3.0 * h, n_grid)
    grid = np.asarray(grid, dtype=float)
    density = np.empty(grid.size)
    norm = 1.0 / (h * math.sqrt(2.0 * math.pi))
    block = 64
    for start in range(0, grid.size, block):
        g = grid[start:start + block, None]
        z = (g - arr[None, :]) / h
        density[start:start + block] = norm * np.mean(np.exp(-0.5 * z * z), axis=1)
    return KdeCurve(grid=grid, density=density, bandwidth=h)


def density_comparison(scenario: Scenario, n_grid: int = 512,
                       workers: int = 1) -> DensityComparison:
    """Monte Carlo vs bootstrap distribution of the mu estimator.

    The Monte Carlo curve pools sqrt(n)(mu_hat_s - mu_alpha) across S
    independent trajectories; the bootstrap curve pools
    sqrt(n)(mu*_b - mu_hat) across B replicates on the first convergent
    trajectory.  Both are KDE-smoothed on a shared grid.
    """
    mu_alpha = true_mu(scenario.dist, scenario.alpha)
    root_n = math.sqrt(scenario.n)

    def one(i: int):
        stream = rng.stream(scenario.master_seed, "trajectory", i)
        returns, _ = volatility.simulate(
            scenario.theta0, scenario.dist, scenario.n, scenario.burn_in, stream
        )
        return returns, qmle.fit(returns)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(one, range(scenario.S)))
    else:
        fits = [one(i) for i in range(scenario.S)]

    sim_values = []
    base = None
    for i, (returns, fit) in enumerate(fits):
        if not fit.converged:
            continue
        tail = es_estimation.mu_hat(fit.residuals, scenario.alpha)
        sim_values.append(root_n * (tail.mu_hat - mu_alpha))
        if base is None:
            base = (i, returns, fit, tail.mu_hat)
    sim_values = np.array(sim_values)
    if sim_values.size < 30 or base is None:
        raise StudyError("too few convergent fits for a density comparison")

    base_index, base_returns, base_fit, base_mu = base
    es = es_estimation.conditional_es(base_fit, scenario.alpha)
    ctx = BootstrapContext(returns=base_returns, fit=base_fit,
                           alpha=scenario.alpha, es_hat=es.es_hat)
    boot_seed = rng.derive_seed(scenario.master_seed, "bootstrap", base_index)
    replicates = bootstrap.run(ctx, scenario.B, boot_seed, workers=workers)
    boot_values = np.array([root_n * (r.mu_star - base_mu)
                            for r in replicates if r.converged])

    h_sim = 1.06 * float(np.std(sim_values, ddof=1)) * sim_values.size ** (-0.2)
    h_boot = 1.06 * float(np.std(boot_values, ddof=1)) * boot_values.size ** (-0.2)
    pad = 3.0 * max(h_sim, h_boot)
    lo = min(sim_values.min(), boot_values.min()) - pad
    hi = max(sim_values.max(), boot_values.max()) + pad
    grid = np.linspace(lo, hi, n_grid)
    sim_curve = kde(sim_values, bandwidth=h_sim, grid=grid)
    boot_curve = kde(boot_values, bandwidth=h_boot, grid=grid)
    ks = float(_scipy_stats.ks_2samp(sim_values, boot_values, method="asymp").statistic)

    return DensityComparison(
        grid=grid,
        sim_density=sim_curve.density,
        boot_density=boot_curve.density,
        sim_values=sim_values,
        boot_values=boot_values,
        ks_distance=ks,
        sim_bandwidth=h_sim,
        boot_bandwidth=h_boot,
        base_index=base_index,
    )
