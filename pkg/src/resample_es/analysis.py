"""Convergence-rate estimation, run aggregation and closed-form bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParameterError, TooFewPointsError
from .problem import ProblemSpec
from .rng import SeedSpec
from .strategy import COMPLETED, DIVERGED, UNDERFLOWED, RunTrace, StrategyConfig

__all__ = [
    "LINEAR",
    "LOG",
    "RateEstimate",
    "AggregateCurve",
    "RateEnvelope",
    "estimate_rate",
    "aggregate_runs",
    "rate_envelope",
    "theorem_threshold",
    "corollary_rate",
    "ball_constant",
    "shell_measure",
    "synthetic_trace",
]

LINEAR = "linear-in-n"
LOG = "linear-in-log-n"
SCALES = (LINEAR, LOG)
STATISTICS = ("median", "mean")


@dataclass(frozen=True)
class RateEstimate:
    """Least-squares fit of log-distance against an abscissa.

    ``slope``/``intercept`` use cumulative evaluations as abscissa (or its
    log); ``slope_per_iteration`` uses the iteration index. ``window`` holds
    the first and last iteration index of the fitted points, and
    ``truncated`` is set when the window was cut short by a zero or
    non-finite distance.
    """

    scale: str
    slope: float
    intercept: float
    r_squared: float
    window: tuple[int, int]
    slope_per_iteration: float
    intercept_per_iteration: float
    n_points: int
    truncated: bool = False


@dataclass(frozen=True)
class AggregateCurve:
    """Across-run statistic of log-distance at each evaluation count.

    The ordinate is the statistic of log-distances (not the log of the
    statistic of distances).
    """

    statistic: str
    abscissa: np.ndarray
    ordinate: np.ndarray
    run_count: int
    evals_per_iteration: int
    status_counts: dict = field(default_factory=dict)

    @property
    def n(self) -> np.ndarray:
        return self.abscissa // self.evals_per_iteration

    @property
    def final(self) -> float:
        return float(self.ordinate[-1])


@dataclass(frozen=True)
class RateEnvelope:
    """Spread of per-run rates over a batch.

    ``alpha_low``/``alpha_high`` are the ``delta/2`` and ``1 - delta/2``
    quantiles of the per-iteration rate ``-slope``, an empirical stand-in
    for the pair of exponentials that sandwich ``||x_n||`` with probability
    ``1 - delta``.
    """

    delta: float
    rates: np.ndarray
    alpha_low: float
    alpha_high: float
    alpha_median: float


def _linear_fit(x, y):
    x_mean = x.mean()
    y_mean = y.mean()
    dx = x - x_mean
    dy = y - y_mean
    sxx = float(dx @ dx)
    slope = float(dx @ dy) / sxx
    intercept = y_mean - slope * x_mean
    resid = dy - slope * dx
    ss_tot = float(dy @ dy)
    ss_res = float(resid @ resid)
    if ss_tot == 0.0 or np.ptp(y) == 0.0:
        # A constant series is fitted exactly by a flat line.
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return slope, float(intercept), r2


def _series(source):
    if isinstance(source, RunTrace):
        n = np.asarray(source.n, dtype=float)
        return n, np.asarray(source.evals, dtype=float), np.asarray(source.log_dist, dtype=float)
    if isinstance(source, AggregateCurve):
        evals = np.asarray(source.abscissa, dtype=float)
        return evals / source.evals_per_iteration, evals, np.asarray(source.ordinate, dtype=float)
    raise TypeError(f"cannot estimate a rate from {type(source).__name__}")


def estimate_rate(source, scale: str = LINEAR, burn_in_fraction: float = 0.1,
                  min_points: int = 10) -> RateEstimate:
    """Fit the convergence rate of a trace or an aggregate curve.

    Parameters
    ----------
    source : RunTrace or AggregateCurve
    scale : {"linear-in-n", "linear-in-log-n"}
        Regress log-distance on the evaluation count (log-linear, "fast"
        convergence) or on its logarithm (log-log, "slow" convergence).
    burn_in_fraction : float
        Leading fraction of iterations excluded from the fit.
    min_points : int
        Minimum number of points left to fit.

    Raises
    ------
    TooFewPointsError
        If fewer than ``min_points`` usable points remain.
    """
    if scale not in SCALES:
        raise InvalidParameterError(f"scale must be one of {SCALES}, got {scale!r}")
    if not 0 <= burn_in_fraction < 1:
        raise InvalidParameterError(f"burn_in_fraction must be in [0, 1), got {burn_in_fraction}")
    n, evals, log_dist = _series(source)
    start = int(math.floor(burn_in_fraction * len(n)))
    stop = len(n)
    bad = np.flatnonzero(~np.isfinite(log_dist[start:]))
    truncated = bad.size > 0
    if truncated:
        stop = start + int(bad[0])
    if stop - start < min_points:
        raise TooFewPointsError(
            f"{stop - start} usable points after burn-in, need {min_points}")
    n, evals, y = n[start:stop], evals[start:stop], log_dist[start:stop]
    if scale == LOG:
        n, evals = np.log(n), np.log(evals)
    slope, intercept, r2 = _linear_fit(evals, y)
    slope_it, intercept_it, _ = _linear_fit(n, y)
    return RateEstimate(
        scale=scale,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        window=(start + 1, stop),
        slope_per_iteration=slope_it,
        intercept_per_iteration=intercept_it,
        n_points=stop - start,
        truncated=truncated,
    )


def _padded_log_dist(trace: RunTrace, length: int) -> np.ndarray:
    y = np.asarray(trace.log_dist, dtype=float)
    if len(y) >= length:
        return y[:length]
    # An early-stopped run stays at its terminal value (censored).
    return np.concatenate([y, np.full(length - len(y), y[-1])])


def aggregate_runs(traces, statistic: str = "median") -> AggregateCurve:
    """Median or mean log-distance across runs at each iteration.

    Runs that stopped early (diverged or underflowed) are carried forward
    at their last value, so a diverged run keeps dragging the mean up.
    Curves extend to the shortest completed run; if no run completed, to
    the longest run.
    """
    traces = list(traces)
    if not traces:
        raise InvalidParameterError("aggregate_runs needs at least one trace")
    if statistic not in STATISTICS:
        raise InvalidParameterError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    epi = {t.evals_per_iteration for t in traces}
    if len(epi) != 1:
        raise InvalidParameterError(f"traces mix evaluations per iteration: {sorted(epi)}")
    epi = epi.pop()
    completed = [len(t) for t in traces if t.status == COMPLETED]
    length = min(completed) if completed else max(len(t) for t in traces)
    Y = np.vstack([_padded_log_dist(t, length) for t in traces])
    if statistic == "median":
        ordinate = np.median(Y, axis=0)
    else:
        ordinate = np.mean(Y, axis=0)
    counts = {s: sum(t.status == s for t in traces) for s in (COMPLETED, DIVERGED, UNDERFLOWED)}
    return AggregateCurve(
        statistic=statistic,
        abscissa=np.arange(1, length + 1, dtype=np.int64) * epi,
        ordinate=ordinate,
        run_count=len(traces),
        evals_per_iteration=epi,
        status_counts=counts,
    )


def rate_envelope(traces, delta: float = 0.1, burn_in_fraction: float = 0.1) -> RateEnvelope:
    """Per-run log-linear rates and their ``delta`` quantile band."""
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must be in (0, 1), got {delta}")
    rates = np.array([-estimate_rate(t, LINEAR, burn_in_fraction).slope_per_iteration
                      for t in traces])
    lo, mid, hi = np.quantile(rates, [delta / 2, 0.5, 1 - delta / 2])
    return RateEnvelope(delta, rates, float(lo), float(hi), float(mid))


def theorem_threshold(p: int, d: int, alpha: float, alpha_prime: float) -> float:
    """Smallest noise exponent ``z`` for which a constant ``Y`` suffices.

    ``max(2 (p a' - (a - a') d) / (p a), 2 (2 a' - a) / a)`` for rate
    bounds ``0 < a <= a'``; equals 2 when ``a == a'``.
    """
    if p < 1 or d < 1:
        raise InvalidParameterError(f"p and d must be positive, got p={p}, d={d}")
    if not alpha > 0 or not alpha_prime > 0:
        raise InvalidParameterError("alpha and alpha_prime must be positive")
    if alpha > alpha_prime:
        raise InvalidParameterError(f"alpha ({alpha}) must not exceed alpha_prime ({alpha_prime})")
    first = 2 * (p * alpha_prime - (alpha - alpha_prime) * d) / (p * alpha)
    second = 2 * (2 * alpha_prime - alpha) / alpha
    return max(first, second)


def corollary_rate(alpha: float, lam: int, Y: int) -> float:
    """Bound ``-alpha / (lam * Y)`` on the per-evaluation log-linear rate."""
    if not alpha > 0 or lam < 1 or Y < 1:
        raise InvalidParameterError("alpha, lambda and Y must be positive")
    return -alpha / (lam * Y)


def ball_constant(d: int) -> float:
    """Volume of the unit ball in ``R^d`` via the double-factorial formula."""
    if int(d) != d or d < 1:
        raise InvalidParameterError(f"d must be a positive integer, got {d}")
    d = int(d)
    if d % 2 == 0:
        return (2 * math.pi) ** (d // 2) / math.prod(range(2, d + 1, 2))
    return 2 * (2 * math.pi) ** ((d - 1) // 2) / math.prod(range(1, d + 1, 2))


def shell_measure(v: float, ell: float, d: int, p: int) -> float:
    """Lebesgue measure of ``{x : | ||x||^p - v | <= ell}``.

    For ``v < ell`` the set is the full ball of radius ``(v + ell)^(1/p)``.
    """
    if not ell > 0:
        raise InvalidParameterError(f"ell must be > 0, got {ell}")
    if v < 0:
        raise InvalidParameterError(f"v must be >= 0, got {v}")
    k = ball_constant(d)
    e = d / p
    if v >= ell:
        return k * ((v + ell) ** e - (v - ell) ** e)
    return k * (v + ell) ** e


def synthetic_trace(dist, evals_per_iteration: int = 1, status: str = COMPLETED) -> RunTrace:
    """Wrap a distance sequence as a trace, e.g. to test rate fits."""
    dist = np.asarray(dist, dtype=float)
    n = np.arange(1, len(dist) + 1)
    with np.errstate(divide="ignore"):
        log_dist = np.log(dist)
    return RunTrace(
        problem=ProblemSpec(d=1),
        config=StrategyConfig(mu=1, lam=1, Y=1, budget=max(1, len(dist))),
        seed=SeedSpec(0),
        n=n,
        evals=n * evals_per_iteration,
        dist=dist,
        log_dist=log_dist,
        sigma=np.ones_like(dist),
        status=status,
    )
