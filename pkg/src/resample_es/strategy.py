"""(mu, lambda) evolution strategy with self-adaptive step-sizes and a
constant number of resamplings per offspring.

Each iteration generates ``lam`` offspring round-robin from the ``mu``
parents (offspring ``j`` mutates parent ``j mod mu``), evaluates each one
``Y`` times, averages, and keeps the ``mu`` offspring with the smallest
averages. Parents never survive.

Randomness comes from three streams per run, one per draw role (step-size
mutation, point mutation, fitness noise). Each iteration consumes ``lam``
step-size draws and ``lam * d`` point draws whatever ``Y`` is, so runs that
differ only in ``Y`` or in the noise model share their mutation draws.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np

from .exceptions import BudgetExhausted, InvalidParameterError
from .problem import ProblemSpec, power_of_two_scale, safe_norm
from .rng import ROLE_NOISE, ROLE_SIGMA, ROLE_X, DrawBuffer, SeedSpec, Stream

__all__ = [
    "StrategyConfig",
    "ESState",
    "IterationRecord",
    "IterationResult",
    "RunStreams",
    "RunTrace",
    "mutate",
    "select_survivors",
    "es_iteration",
    "run_es",
    "UNDERFLOW_LIMIT",
    "DIVERGENCE_LIMIT",
]

log = logging.getLogger(__name__)

UNDERFLOW_LIMIT = 1e-300
DIVERGENCE_LIMIT = 1e150

COMPLETED = "completed"
DIVERGED = "diverged"
UNDERFLOWED = "underflowed"
STATUSES = (COMPLETED, DIVERGED, UNDERFLOWED)


@dataclass(frozen=True)
class StrategyConfig:
    """Parameters of one ES run.

    Parameters
    ----------
    mu, lam : int
        Parent and offspring counts, ``1 <= mu <= lam``.
    Y : int
        Resamplings averaged per offspring evaluation.
    budget : int
        Maximum number of fitness evaluations; must pay for at least one
        iteration (``lam * Y``).
    sigma0 : float, optional
        Initial step-size of every parent. Defaults to
        ``||x0 - x*|| / d``.
    tau : float, optional
        Step-size learning rate. Defaults to ``1 / (2 d)``.
    x0 : array-like, optional
        Initial point shared by all parents. Defaults to ``x*`` plus the
        unit vector ``(1, ..., 1) / sqrt(d)``.
    """

    mu: int = 2
    lam: int = 4
    Y: int = 12
    budget: int = 500_000
    sigma0: float | None = None
    tau: float | None = None
    x0: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise InvalidParameterError("; ".join(problems))
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in np.ravel(self.x0)))

    def violations(self) -> list[str]:
        out = []
        for name in ("mu", "lam", "Y", "budget"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                out.append(f"{name} must be a positive integer, got {v}")
        if not out:
            if self.mu > self.lam:
                out.append(f"mu ({self.mu}) must not exceed lambda ({self.lam})")
            if self.budget < self.lam * self.Y:
                out.append(f"budget ({self.budget}) is below lambda*Y ({self.lam * self.Y})")
        if self.sigma0 is not None and not self.sigma0 > 0:
            out.append(f"sigma0 must be > 0, got {self.sigma0}")
        if self.tau is not None and not self.tau > 0:
            out.append(f"tau must be > 0, got {self.tau}")
        return out

    @property
    def evals_per_iteration(self) -> int:
        return self.lam * self.Y

    @property
    def max_iterations(self) -> int:
        return self.budget // self.evals_per_iteration

    def tau_for(self, d: int) -> float:
        return self.tau if self.tau is not None else 1.0 / (2 * d)

    def initial_state(self, spec: ProblemSpec) -> "ESState":
        if self.x0 is None:
            x0 = spec.x_star + np.full(spec.d, 1.0 / np.sqrt(spec.d))
        else:
            x0 = np.asarray(self.x0, dtype=float)
        dist = float(safe_norm(spec.offset(x0)))
        if self.sigma0 is not None:
            sigma0 = self.sigma0
        elif dist > 0:
            sigma0 = dist / spec.d
        else:
            sigma0 = 1.0 / spec.d
        return ESState(
            x=np.tile(x0, (self.mu, 1)),
            sigma=np.full(self.mu, float(sigma0)),
            n=0,
            evals=0,
            dist=dist,
        )


@dataclass
class ESState:
    """Parents (row 0 is the current best) and bookkeeping."""

    x: np.ndarray
    sigma: np.ndarray
    n: int
    evals: int
    dist: float


class IterationRecord(NamedTuple):
    n: int
    evals_used: int
    dist: float
    sigma: float
    log_dist: float


class IterationResult(NamedTuple):
    """Everything one iteration produced.

    ``values`` are the averaged noisy fitnesses of the offspring divided by
    ``scale**p``; ``order`` is their stable ascending argsort.
    """

    state: ESState
    record: IterationRecord
    offspring_x: np.ndarray
    offspring_sigma: np.ndarray
    values: np.ndarray
    order: np.ndarray
    scale: float


class RunStreams:
    """The three role streams of one run, prefetched in blocks."""

    def __init__(self, seed: SeedSpec, spec: ProblemSpec, cfg: StrategyConfig):
        lam = cfg.lam
        self.sigma = DrawBuffer(seed.child(ROLE_SIGMA).stream(), (lam,))
        self.x = DrawBuffer(seed.child(ROLE_X).stream(), (lam, spec.d))
        self.noise = DrawBuffer(seed.child(ROLE_NOISE).stream(), (lam, cfg.Y),
                                sampler=spec.draw_noise)


def mutate(parent_x, parent_sigma: float, tau: float, stream: Stream):
    """Self-adaptive mutation of one parent.

    The step-size is perturbed first, ``sigma' = sigma * exp(tau * g)``,
    and the new point is ``x + sigma' * G`` with ``g`` one scalar and ``G``
    one ``d``-dimensional standard normal draw, in that order.
    """
    if not parent_sigma > 0:
        raise InvalidParameterError(f"parent_sigma must be > 0, got {parent_sigma}")
    parent_x = np.asarray(parent_x, dtype=float)
    g = stream.gaussian()
    G = stream.gaussian_vector(parent_x.shape[-1])
    child_sigma = parent_sigma * np.exp(tau * g)
    return parent_x + child_sigma * G, float(child_sigma)


def select_survivors(values, mu: int) -> np.ndarray:
    """Indices of the ``mu`` smallest values; ties keep the lower index first."""
    return np.argsort(values, kind="stable")[:mu]


def es_iteration(state: ESState, spec: ProblemSpec, cfg: StrategyConfig,
                 streams: RunStreams) -> IterationResult:
    """Advance the ES by one generation.

    Raises
    ------
    BudgetExhausted
        If ``state.evals + lam * Y`` would exceed ``cfg.budget``.
    """
    lam, mu = cfg.lam, cfg.mu
    if state.evals + lam * cfg.Y > cfg.budget:
        raise BudgetExhausted(
            f"{cfg.budget - state.evals} evaluations left, iteration needs {lam * cfg.Y}")
    tau = cfg.tau_for(spec.d)
    parents = np.arange(lam) % mu

    g = streams.sigma.take()
    G = streams.x.take()
    eta = streams.noise.take()

    child_sigma = state.sigma[parents] * np.exp(tau * g)
    child_x = state.x[parents] + child_sigma[:, None] * G

    # A power-of-two rescale leaves every comparison intact and avoids underflow.
    scale = power_of_two_scale(state.dist)
    r, true, noise = spec.scaled_values(child_x, eta, scale)
    values = true + noise
    order = np.argsort(values, kind="stable")
    keep = order[:mu]

    n = state.n + 1
    evals = state.evals + lam * cfg.Y
    dist = float(r[keep[0]] * scale)
    new_state = ESState(x=child_x[keep], sigma=child_sigma[keep], n=n, evals=evals, dist=dist)
    record = IterationRecord(
        n=n,
        evals_used=evals,
        dist=dist,
        sigma=float(child_sigma[keep[0]]),
        log_dist=float(np.log(dist)) if dist > 0 else -np.inf,
    )
    return IterationResult(new_state, record, child_x, child_sigma, values, order, scale)


@dataclass
class RunTrace:
    """Per-iteration history of one seeded run, stored column-wise."""

    problem: ProblemSpec
    config: StrategyConfig
    seed: SeedSpec
    n: np.ndarray
    evals: np.ndarray
    dist: np.ndarray
    log_dist: np.ndarray
    sigma: np.ndarray
    status: str = COMPLETED

    def __len__(self):
        return len(self.n)

    @property
    def records(self) -> Iterator[IterationRecord]:
        for row in zip(self.n, self.evals, self.dist, self.sigma, self.log_dist):
            yield IterationRecord(int(row[0]), int(row[1]), float(row[2]),
                                  float(row[3]), float(row[4]))

    @property
    def evals_per_iteration(self) -> int:
        return int(self.evals[0] // self.n[0])


def _status_of(dist: float, sigma: float) -> str | None:
    if dist < UNDERFLOW_LIMIT or sigma < UNDERFLOW_LIMIT:
        return UNDERFLOWED
    if dist > DIVERGENCE_LIMIT:
        return DIVERGED
    return None


def run_es(spec: ProblemSpec, cfg: StrategyConfig, seed: SeedSpec) -> RunTrace:
    """Iterate until the budget is spent, or the run under- or overflows.

    The trace is a deterministic function of ``(spec, cfg, seed)``.
    """
    streams = RunStreams(seed, spec, cfg)
    state = cfg.initial_state(spec)
    total = cfg.max_iterations
    dist = np.empty(total)
    sigma = np.empty(total)
    status = COMPLETED
    k = 0
    while k < total:
        res = es_iteration(state, spec, cfg, streams)
        state = res.state
        dist[k] = res.record.dist
        sigma[k] = res.record.sigma
        k += 1
        stop = _status_of(res.record.dist, res.record.sigma)
        if stop is not None:
            status = stop
            log.debug("run %s stopped at iteration %d: %s", seed.stream_path, k, stop)
            break
    n = np.arange(1, k + 1)
    with np.errstate(divide="ignore"):
        log_dist = np.log(dist[:k])
    return RunTrace(
        problem=spec,
        config=cfg,
        seed=seed,
        n=n,
        evals=n * cfg.evals_per_iteration,
        dist=dist[:k],
        log_dist=log_dist,
        sigma=sigma[:k],
        status=status,
    )


def with_Y(cfg: StrategyConfig, Y: int) -> StrategyConfig:
    return replace(cfg, Y=int(Y))
