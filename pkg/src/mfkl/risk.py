"""Empirical estimators: quadratic risk, particle moments, histogram divergences.

The quadratic risk of the particle-average estimator is measured over
independent replicas of the chain, each on its own derived seed; histogram
divergences against grid oracles act as measurable surrogates for the
total-variation and entropy quantities appearing in the theory bounds.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chain import run_chain, sample_initial
from .errors import ConfigurationError, NumericalDomainError
from .rng import RngStream, derive_seed


@dataclass
class RiskEstimate:
    """Across-replica mean squared error of the particle-average estimator."""

    value: float
    std_err: float
    reps: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0.0 or self.std_err < 0.0:
            raise NumericalDomainError("risk estimate must be nonnegative")


def quadratic_risk(
    model,
    f,
    params,
    n_particles,
    reps,
    oracle_mean,
    init_law,
    f_id="f",
    threads=1,
):
    """Mean squared error of ``mean_i f(X_i)`` at the final step.

    ``f`` maps a positions array (N, d) to per-particle values (N,).  Each
    replica runs on seed ``derive(master_seed, k)``; the estimate and its
    standard error are aggregated in replica order, so results do not
    depend on scheduling.
    """
    if reps < 8:
        raise ConfigurationError("quadratic risk needs at least 8 replicas")

    def one_replica(k):
        rng = RngStream(derive_seed(params.master_seed, k))
        init = sample_initial(init_law, n_particles, model.space, rng)
        final, _ = run_chain(model, init, params, observers=(), rng=rng)
        return float(np.mean(np.asarray(f(final.positions), dtype=float)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            estimates = list(pool.map(one_replica, range(reps)))
    else:
        estimates = [one_replica(k) for k in range(reps)]
    sq_errors = (np.asarray(estimates) - oracle_mean) ** 2
    value = float(np.mean(sq_errors))
    std_err = float(np.std(sq_errors, ddof=1) / math.sqrt(reps))
    config = {
        "f": f_id,
        "n": params.n_steps,
        "N": n_particles,
        "h": params.h,
        "gamma": params.gamma,
        "seed": params.master_seed,
    }
    return RiskEstimate(value=value, std_err=std_err, reps=reps, config=config)


@dataclass
class MomentSeries:
    """Per-step particle means of |x|^p and |v|^p for requested orders p."""

    orders: tuple
    position: dict
    velocity: dict

    def position_max(self, p):
        return float(np.max(self.position[p]))

    def velocity_max(self, p):
        return float(np.max(self.velocity[p]))


def empirical_moments(states, orders=(2, 4, 6)):
    """Consume a stream of states into per-order moment time series.

    On the torus the position norm uses the stored representative in
    [0,1)^d, so position moments are bounded there by construction.
    """
    orders = tuple(orders)
    if not orders or any(p not in (2, 4, 6) for p in orders):
        raise ConfigurationError("orders must be a nonempty subset of {2, 4, 6}")
    pos_series = {p: [] for p in orders}
    vel_series = {p: [] for p in orders}
    for state in states:
        x_sq = np.sum(state.positions ** 2, axis=-1)
        v_sq = np.sum(state.velocities ** 2, axis=-1)
        for p in orders:
            half = p // 2
            pos_series[p].append(float(np.mean(x_sq ** half)))
            vel_series[p].append(float(np.mean(v_sq ** half)))
    return MomentSeries(
        orders=orders,
        position={p: np.asarray(v) for p, v in pos_series.items()},
        velocity={p: np.asarray(v) for p, v in vel_series.items()},
    )


def moment_observer_fn(orders=(2, 4, 6)):
    """Observer callback producing (p -> mean|x|^p, mean|v|^p) tuples."""
    orders = tuple(orders)

    def fn(step, state):
        x_sq = np.sum(state.positions ** 2, axis=-1)
        v_sq = np.sum(state.velocities ** 2, axis=-1)
        return tuple(
            (float(np.mean(x_sq ** (p // 2))), float(np.mean(v_sq ** (p // 2))))
            for p in orders
        )

    return fn


def resolve_bin_count(n_bins, n_samples):
    """Bin count, with ``"sturges"`` resolving from the sample size."""
    if n_bins == "sturges":
        n_bins = int(math.ceil(math.log2(max(n_samples, 2)) + 1.0))
        n_bins = max(n_bins, 10)
    if n_bins < 10:
        raise ConfigurationError("need at least 10 histogram bins")
    return int(n_bins)


def histogram_divergence(samples, reference, n_bins=50, kind="tv"):
    """Binned divergence between scalar samples and a grid density.

    ``kind="kl"`` returns ``sum p log(p/q)`` over occupied bins (infinite,
    not an exception, when a reference bin has zero mass under occupied
    samples); ``kind="tv"`` returns half the L1 distance of the bin masses.
    Out-of-range samples are clamped to the domain and counted in a warning.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise ConfigurationError("no samples supplied")
    n_bins = resolve_bin_count(n_bins, samples.size)
    lo, hi = reference.lo, reference.hi
    outside = int(np.sum((samples < lo) | (samples > hi)))
    if outside:
        warnings.warn(
            f"{outside} of {samples.size} samples fell outside [{lo}, {hi}] "
            "and were clamped",
            stacklevel=2,
        )
        samples = np.clip(samples, lo, hi)
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    p_hat = counts / counts.sum()
    q_mass, _ = np.histogram(
        reference.centers, bins=edges, weights=reference.values * reference.dx
    )
    total = q_mass.sum()
    if not total > 0.0:
        raise NumericalDomainError("reference density has no mass on its own domain")
    q_mass = q_mass / total
    if kind == "tv":
        return 0.5 * float(np.sum(np.abs(p_hat - q_mass)))
    if kind == "kl":
        occupied = p_hat > 0.0
        if (q_mass[occupied] == 0.0).any():
            return math.inf
        return float(np.sum(p_hat[occupied] * np.log(p_hat[occupied] / q_mass[occupied])))
    raise ConfigurationError(f"unknown divergence kind {kind!r}")


@dataclass(frozen=True)
class RateFit:
    """Per-step geometric decay rate fitted on the log scale."""

    rate: float
    r_squared: float


def fit_geometric_rate(series):
    """Least-squares geometric rate of a positive series: exp(log-slope)."""
    series = np.asarray(series, dtype=float).reshape(-1)
    if series.size < 10:
        raise ConfigurationError("need at least 10 points to fit a rate")
    if (series <= 0.0).any() or not np.isfinite(series).all():
        raise NumericalDomainError("rate fitting needs strictly positive finite values")
    y = np.log(series)
    t = np.arange(series.size, dtype=float)
    tc = t - t.mean()
    slope = float(np.sum(tc * y) / np.sum(tc * tc))
    intercept = float(y.mean() - slope * t.mean())
    resid = y - intercept - slope * t
    tss = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(resid * resid)) / tss if tss > 0.0 else 1.0
    return RateFit(rate=math.exp(slope), r_squared=r_squared)
