"""Monte Carlo estimates of how often noise can flip the ES ranking.

At a state ``(x_n, sigma_n)`` the ``lam`` offspring ``x_n + sigma_n N_d`` are
sampled and each is evaluated ``Y`` times. With a threshold
``delta_n = delta0 * exp(-gamma n)`` three events are counted per trial:

* proximity: some pair has true fitnesses within ``delta_n``;
* noise excess: some offspring's averaged noise is at least ``delta_n / 2``;
* misranking: some pair with strictly ordered true fitness has the
  opposite (or tied) order after averaging.

Misranking implies one of the other two events, so on shared trials the
misranking frequency never exceeds the sum of the other two.

Probes place the optimum at the origin; the noisy sphere is isotropic, so
only ``||x_n||`` and ``sigma_n`` matter.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from .exceptions import InvalidParameterError
from .problem import ProblemSpec, power_of_two_scale, safe_norm
from .rng import SeedSpec, Stream
from .strategy import RunTrace, StrategyConfig

__all__ = [
    "ProbeConfig",
    "ProbeEstimate",
    "ProbeEntry",
    "MisrankReport",
    "binomial_interval",
    "admissible_gamma",
    "proximity_exponent",
    "probe_pair_proximity",
    "probe_noise_excess",
    "probe_misranking",
    "probe_schedule",
]

CHUNK = 20_000
SYNTHETIC = "synthetic"
REPLAY = "replay"


@dataclass(frozen=True)
class ProbeEstimate:
    estimate: float
    half_width: float
    count: int
    trials: int


def binomial_interval(count: int, trials: int, level: float = 0.95) -> ProbeEstimate:
    """Proportion with a two-sided confidence half-width.

    Normal approximation, switching to Clopper-Pearson when the count is 0
    or ``trials``; the half-width is then the distance to the far bound.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    p = count / trials
    a = 1.0 - level
    if 0 < count < trials:
        z = stats.norm.ppf(1 - a / 2)
        hw = z * math.sqrt(p * (1 - p) / trials)
    elif count == 0:
        hw = float(stats.beta.ppf(1 - a / 2, 1, trials))
    else:
        hw = 1.0 - float(stats.beta.ppf(a / 2, trials, 1))
    return ProbeEstimate(p, hw, int(count), int(trials))


def admissible_gamma(alpha: float, alpha_prime: float, p: int, d: int, z: float,
                     m: float = 1.0) -> tuple[float, float]:
    """Interval of ``gamma`` for which both decay exponents are positive.

    Lower end from ``d (a - a') + m gamma - m p a' > 0``, upper end from
    ``a z p - 2 gamma > 0``. The interval may be empty (lower >= upper).
    """
    lo = p * alpha_prime - d * (alpha - alpha_prime) / m
    hi = alpha * z * p / 2.0
    return lo, hi


def proximity_exponent(ell: float, d: int, p: int) -> float:
    """The exponent ``m`` with ``ell**m == max(ell, ell**(d/p))``."""
    return 1.0 if ell >= ell ** (d / p) else d / p


def _check_trials(trials):
    if int(trials) != trials or trials < 1:
        raise InvalidParameterError(f"trials must be a positive integer, got {trials}")


def _chunks(trials):
    left = int(trials)
    while left > 0:
        k = min(CHUNK, left)
        yield k
        left -= k


def _offspring_scale(x_n, sigma_n):
    return power_of_two_scale(max(float(safe_norm(x_n)), float(sigma_n)))


def _any_close_pair(true, delta):
    if true.shape[-1] < 2:
        return np.zeros(true.shape[0], dtype=bool)
    s = np.sort(true, axis=-1)
    return np.min(np.diff(s, axis=-1), axis=-1) <= delta


def _any_misranked(true, noisy):
    below = true[:, :, None] < true[:, None, :]
    flipped = noisy[:, :, None] >= noisy[:, None, :]
    return np.any(below & flipped, axis=(1, 2))


def _sample_offspring(x_n, sigma_n, lam, trials, stream, scale):
    x_n = np.asarray(x_n, dtype=float)
    G = stream.gaussians((trials, lam, x_n.shape[-1]))
    return (x_n / scale) + (sigma_n / scale) * G


def probe_pair_proximity(x_n, sigma_n: float, lam: int, delta_n: float, p: int,
                         trials: int, stream: Stream) -> ProbeEstimate:
    """Frequency of a pair of offspring with ``| ||a||^p - ||b||^p | <= delta_n``."""
    _check_trials(trials)
    if not sigma_n > 0 or not delta_n > 0:
        raise InvalidParameterError("sigma_n and delta_n must be > 0")
    scale = _offspring_scale(x_n, sigma_n)
    delta = delta_n / scale**p
    count = 0
    for k in _chunks(trials):
        X = _sample_offspring(x_n, sigma_n, lam, k, stream, scale)
        true = np.sqrt(np.einsum("...i,...i->...", X, X)) ** p
        count += int(np.count_nonzero(_any_close_pair(true, delta)))
    return binomial_interval(count, trials)


def probe_noise_excess(x_samples, z: float, p: int, Y: int, delta_n: float,
                       noise_kind: str, trials: int, stream: Stream,
                       noise_scale: float = 1.0) -> ProbeEstimate:
    """Frequency of some fixed point whose ``Y``-averaged noise reaches ``delta_n / 2``."""
    _check_trials(trials)
    X = np.atleast_2d(np.asarray(x_samples, dtype=float))
    spec = ProblemSpec(d=X.shape[1], p=p, z=z, noise=noise_kind, noise_scale=noise_scale)
    lam = X.shape[0]
    count = 0
    for k in _chunks(trials):
        eta = spec.draw_noise(stream, (k, lam, int(Y)))
        _, _, noise = spec.scaled_values(X, eta)
        count += int(np.count_nonzero(np.any(np.abs(noise) >= delta_n / 2, axis=-1)))
    return binomial_interval(count, trials)


def _state_counts(x_n, sigma_n, lam, Y, spec, delta_n, trials, stream):
    scale = _offspring_scale(x_n, sigma_n)
    delta = delta_n / scale**spec.p
    counts = np.zeros(3, dtype=np.int64)
    for k in _chunks(trials):
        X = _sample_offspring(x_n, sigma_n, lam, k, stream, scale)
        eta = spec.draw_noise(stream, (k, lam, int(Y)))
        r = np.sqrt(np.einsum("...i,...i->...", X, X))
        true, noise = spec.fitness_parts(r, eta, scale)
        counts[0] += np.count_nonzero(_any_close_pair(true, delta))
        counts[1] += np.count_nonzero(np.any(np.abs(noise) >= delta / 2, axis=-1))
        counts[2] += np.count_nonzero(_any_misranked(true, true + noise))
    return counts


def probe_misranking(x_n, sigma_n: float, lam: int, Y: int, spec: ProblemSpec,
                     trials: int, stream: Stream) -> ProbeEstimate:
    """Frequency of at least one misranked offspring pair after ``Y``-averaging.

    A pair counts when ``f(a) < f(b)`` but ``y(a) >= y(b)``; pairs with equal
    true fitness are never misranked.
    """
    _check_trials(trials)
    if not sigma_n > 0:
        raise InvalidParameterError("sigma_n must be > 0")
    spec = replace(spec, optimum=None)
    counts = _state_counts(x_n, sigma_n, lam, Y, spec, 1.0, trials, stream)
    return binomial_interval(int(counts[2]), trials)


@dataclass(frozen=True)
class ProbeConfig:
    """Where and how hard to probe.

    ``gamma=None`` selects 0.8 times the upper end of the admissible
    interval. Synthetic states follow ``||x_n|| = C exp(-alpha n)`` and
    ``sigma_n = V exp(-alpha n)``; replayed states come from a trace.
    """

    gamma: float | None = None
    trials: int = 100_000
    iterations: tuple[int, ...] = (10, 20, 40, 80)
    state_source: str = SYNTHETIC
    alpha: float = 0.05
    alpha_prime: float | None = None
    C: float = 1.0
    V: float = 1.0
    delta0: float = 1.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise InvalidParameterError("; ".join(problems))
        object.__setattr__(self, "iterations", tuple(int(n) for n in self.iterations))

    def violations(self) -> list[str]:
        out = []
        if self.gamma is not None and not self.gamma > 0:
            out.append(f"gamma must be > 0, got {self.gamma}")
        if int(self.trials) != self.trials or self.trials < 100:
            out.append(f"trials must be an integer >= 100, got {self.trials}")
        if not self.iterations or any(int(n) < 1 for n in self.iterations):
            out.append("iterations must be a non-empty list of positive integers")
        if self.state_source not in (SYNTHETIC, REPLAY):
            out.append(f"state_source must be {SYNTHETIC!r} or {REPLAY!r}")
        if not self.alpha > 0:
            out.append("alpha must be > 0")
        if self.alpha_prime is not None and self.alpha_prime < self.alpha:
            out.append("alpha_prime must be >= alpha")
        if not self.C > 0 or not self.V > 0 or not self.delta0 > 0:
            out.append("C, V and delta0 must be > 0")
        return out

    @property
    def alpha_upper(self) -> float:
        return self.alpha if self.alpha_prime is None else self.alpha_prime


@dataclass(frozen=True)
class ProbeEntry:
    n: int
    dist: float
    sigma: float
    delta: float
    m: float
    proximity: ProbeEstimate
    noise_excess: ProbeEstimate
    misranking: ProbeEstimate


@dataclass(frozen=True)
class MisrankReport:
    gamma: float
    gamma_interval: tuple[float, float]
    entries: list[ProbeEntry] = field(default_factory=list)

    @property
    def partial_sum(self) -> float:
        """Sum of misranking estimates over the probed iterations."""
        return float(sum(e.misranking.estimate for e in self.entries))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["partial_sum"] = self.partial_sum
        return out


def probe_schedule(cfg: ProbeConfig, spec: ProblemSpec, strategy_cfg: StrategyConfig,
                   seed: SeedSpec, trace: RunTrace | None = None) -> MisrankReport:
    """Run all three probes at every requested iteration on shared trials.

    Iteration ``n`` draws from ``seed.child(k)``, ``k`` its position in
    ``cfg.iterations``.
    """
    lo, hi = admissible_gamma(cfg.alpha, cfg.alpha_upper, spec.p, spec.d, spec.z)
    gamma = cfg.gamma if cfg.gamma is not None else 0.8 * hi
    if not gamma > 0:
        raise InvalidParameterError(f"no positive gamma available (upper end {hi})")
    spec0 = replace(spec, optimum=None)
    u = np.full(spec.d, 1.0 / math.sqrt(spec.d))
    entries = []
    for k, n in enumerate(cfg.iterations):
        if cfg.state_source == REPLAY:
            if trace is None:
                raise InvalidParameterError("replay probes need a trace")
            if n > len(trace):
                raise InvalidParameterError(f"trace has {len(trace)} iterations, probe asked for {n}")
            dist, sigma = float(trace.dist[n - 1]), float(trace.sigma[n - 1])
        else:
            dist = cfg.C * math.exp(-cfg.alpha * n)
            sigma = cfg.V * math.exp(-cfg.alpha * n)
        delta = cfg.delta0 * math.exp(-gamma * n)
        ell = delta / dist**spec.p if dist > 0 else math.inf
        counts = _state_counts(dist * u, sigma, strategy_cfg.lam, strategy_cfg.Y, spec0,
                               delta, cfg.trials, seed.child(k).stream())
        entries.append(ProbeEntry(
            n=n,
            dist=dist,
            sigma=sigma,
            delta=delta,
            m=proximity_exponent(ell, spec.d, spec.p),
            proximity=binomial_interval(int(counts[0]), cfg.trials),
            noise_excess=binomial_interval(int(counts[1]), cfg.trials),
            misranking=binomial_interval(int(counts[2]), cfg.trials),
        ))
    return MisrankReport(gamma=gamma, gamma_interval=(lo, hi), entries=entries)
