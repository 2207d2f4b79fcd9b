from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resample_es import ProblemSpec, SeedSpec, StrategyConfig, run_es
from resample_es.analysis import estimate_rate
from resample_es.exceptions import BudgetExhausted, InvalidParameterError
from resample_es.strategy import (COMPLETED, ESState, RunStreams, es_iteration, mutate,
                                  select_survivors)


class ZeroStream:
    """Stand-in stream whose every draw is zero."""

    def gaussian(self):
        return 0.0

    def gaussian_vector(self, d):
        return np.zeros(d)


class Rows:
    def __init__(self, rows):
        self.rows = list(rows)

    def take(self):
        return np.asarray(self.rows.pop(0), dtype=float)


class FixedStreams:
    def __init__(self, g, G, eta):
        self.sigma, self.x, self.noise = Rows([g]), Rows([G]), Rows([eta])


def test_mutate_with_zero_draws_is_identity():
    x, s = mutate([1.0, 2.0], 0.5, 0.1, ZeroStream())
    np.testing.assert_array_equal(x, [1.0, 2.0])
    assert s == 0.5


def test_mutate_draw_order_and_formula():
    tau, sigma = 1 / 30, 0.7
    ref = SeedSpec(6).stream()
    g, G = ref.gaussian(), ref.gaussian_vector(15)
    x, s = mutate(np.ones(15), sigma, tau, SeedSpec(6).stream())
    assert s == pytest.approx(sigma * np.exp(tau * g))
    np.testing.assert_allclose(x, 1.0 + s * G)


def test_log_step_size_is_gaussian_with_sd_tau():
    stream = SeedSpec(13).stream()
    tau = 1 / 30
    logs = np.array([np.log(mutate([0.0], 1.0, tau, stream)[1]) for _ in range(50_000)])
    assert abs(logs.mean()) < 4 * tau / np.sqrt(len(logs))
    assert logs.std() == pytest.approx(tau, rel=0.02)


def test_mutate_rejects_nonpositive_sigma():
    with pytest.raises(InvalidParameterError):
        mutate([0.0], 0.0, 0.1, ZeroStream())


def test_select_survivors_against_python_sort():
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = rng.integers(0, 4, size=8).astype(float)  # plenty of ties
        ref = sorted(range(8), key=lambda j: v[j])[:3]
        assert select_survivors(v, 3).tolist() == ref


def test_tie_keeps_lower_index():
    spec = ProblemSpec(d=2, noise="zero")
    cfg = StrategyConfig(mu=1, lam=2, Y=1, budget=10, sigma0=1.0)
    state = ESState(x=np.zeros((1, 2)), sigma=np.ones(1), n=0, evals=0, dist=1.0)
    # Both offspring at distance 1: the first one wins.
    res = es_iteration(state, spec, cfg, FixedStreams([0, 0], [[1, 0], [-1, 0]], [[0], [0]]))
    np.testing.assert_array_equal(res.state.x[0], [1.0, 0.0])
    res = es_iteration(state, spec, cfg, FixedStreams([0, 0], [[-1, 0], [1, 0]], [[0], [0]]))
    np.testing.assert_array_equal(res.state.x[0], [-1.0, 0.0])


def test_no_elitism():
    # Parents at the optimum, offspring pushed away: the best parent is still discarded.
    spec = ProblemSpec(d=2, noise="zero")
    cfg = StrategyConfig(mu=1, lam=2, Y=1, budget=10)
    state = ESState(x=np.zeros((1, 2)), sigma=np.ones(1), n=0, evals=0, dist=0.0)
    res = es_iteration(state, spec, cfg, FixedStreams([0, 0], [[3, 0], [0, 2]], [[0], [0]]))
    np.testing.assert_array_equal(res.state.x[0], [0.0, 2.0])
    assert res.record.dist == pytest.approx(2.0)


def test_parents_assigned_round_robin():
    spec = ProblemSpec(d=1, noise="zero")
    cfg = StrategyConfig(mu=2, lam=4, Y=1, budget=8)
    state = ESState(x=np.array([[10.0], [20.0]]), sigma=np.array([1.0, 2.0]), n=0, evals=0,
                    dist=10.0)
    res = es_iteration(state, spec, cfg,
                       FixedStreams(np.zeros(4), np.ones((4, 1)), np.zeros((4, 1))))
    np.testing.assert_allclose(res.offspring_x[:, 0], [11, 22, 11, 22])
    np.testing.assert_allclose(res.offspring_sigma, [1, 2, 1, 2])


@pytest.mark.parametrize("Y,budget", [(1, 10), (3, 100), (12, 500), (5, 20)])
def test_budget_is_never_exceeded(Y, budget):
    spec = ProblemSpec(d=3)
    cfg = StrategyConfig(Y=Y, budget=budget)
    trace = run_es(spec, cfg, SeedSpec(1))
    assert trace.evals[-1] == (budget // (4 * Y)) * 4 * Y <= budget
    np.testing.assert_array_equal(np.diff(trace.evals), 4 * Y)


def test_budget_exhausted_raised():
    spec = ProblemSpec(d=3)
    cfg = StrategyConfig(Y=2, budget=8)
    streams = RunStreams(SeedSpec(0), spec, cfg)
    state = es_iteration(cfg.initial_state(spec), spec, cfg, streams).state
    with pytest.raises(BudgetExhausted):
        es_iteration(state, spec, cfg, streams)


def test_single_iteration_budget():
    trace = run_es(ProblemSpec(d=2), StrategyConfig(Y=3, budget=12), SeedSpec(0))
    assert len(trace) == 1 and trace.evals.tolist() == [12]


def test_budget_below_one_iteration_invalid():
    with pytest.raises(InvalidParameterError):
        StrategyConfig(Y=3, budget=11)


def test_runs_are_deterministic():
    spec = ProblemSpec(d=5)
    cfg = StrategyConfig(Y=2, budget=4000)
    a, b = run_es(spec, cfg, SeedSpec(3, (1,))), run_es(spec, cfg, SeedSpec(3, (1,)))
    np.testing.assert_array_equal(a.dist, b.dist)
    np.testing.assert_array_equal(a.sigma, b.sigma)
    c = run_es(spec, cfg, SeedSpec(3, (2,)))
    assert not np.array_equal(a.dist, c.dist)


def test_noise_free_run_converges():
    spec = ProblemSpec(d=15, noise="zero")
    trace = run_es(spec, StrategyConfig(Y=1, budget=40_000), SeedSpec(0))
    assert trace.status == COMPLETED
    est = estimate_rate(trace)
    assert est.slope_per_iteration < 0 and est.r_squared > 0.95


@given(shift=st.floats(-10, 10), seed=st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_shift_invariance_of_selection(shift, seed):
    spec = ProblemSpec(d=4)
    cfg = StrategyConfig(mu=3, lam=7, Y=2, budget=1000)
    res = es_iteration(cfg.initial_state(spec), spec, cfg, RunStreams(SeedSpec(seed), spec, cfg))
    assert select_survivors(res.values + shift, 3).tolist() == res.order[:3].tolist()


def test_noise_free_decisions_do_not_depend_on_Y():
    spec = ProblemSpec(d=6, noise="zero")
    cfg1 = StrategyConfig(Y=1, budget=10**6)
    cfg10 = replace(cfg1, Y=10)
    s1, s10 = RunStreams(SeedSpec(2), spec, cfg1), RunStreams(SeedSpec(2), spec, cfg10)
    a = b = cfg1.initial_state(spec)
    for _ in range(200):
        ra, rb = es_iteration(a, spec, cfg1, s1), es_iteration(b, spec, cfg10, s10)
        np.testing.assert_array_equal(ra.order, rb.order)
        a, b = ra.state, rb.state
    np.testing.assert_array_equal(a.x, b.x)


def test_initial_state_defaults(sphere15, reference_strategy):
    st0 = reference_strategy.initial_state(sphere15)
    assert st0.dist == pytest.approx(1.0)
    assert st0.x.shape == (2, 15)
    np.testing.assert_allclose(st0.sigma, 1 / 15)
    assert reference_strategy.tau_for(15) == pytest.approx(1 / 30)
    assert reference_strategy.evals_per_iteration == 48
