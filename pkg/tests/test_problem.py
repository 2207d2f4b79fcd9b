import numpy as np
import pytest

from resample_es import ProblemSpec, SeedSpec, averaged_fitness, expected_fitness, sample_fitness
from resample_es.exceptions import DimensionError, InvalidParameterError
from resample_es.problem import power_of_two_scale, safe_norm


def test_expected_fitness_examples():
    spec = ProblemSpec(d=3, p=2, z=2.1)
    assert expected_fitness(spec, [1.0, 2.0, 2.0]) == pytest.approx(9.0)
    spec = ProblemSpec(d=2, p=1, z=0.0, optimum=(1.0, 1.0))
    assert expected_fitness(spec, [4.0, 5.0]) == pytest.approx(5.0)
    assert expected_fitness(spec, [1.0, 1.0]) == 0.0


def test_noise_vanishes_at_optimum():
    spec = ProblemSpec(d=4, optimum=(1, 2, 3, 4))
    s = SeedSpec(0).stream()
    assert sample_fitness(spec, spec.x_star, s) == 0.0
    assert s.consumed == 1


def test_zero_exponent_gives_unit_noise():
    # z = 0: additive standard normal noise independent of the distance
    spec = ProblemSpec(d=2, p=2, z=0.0)
    s1, s2 = SeedSpec(5).stream(), SeedSpec(5).stream()
    f = sample_fitness(spec, [3.0, 4.0], s1)
    assert f == pytest.approx(25.0 + s2.gaussian())


@pytest.mark.parametrize("Y", [1, 3, 12])
def test_averaged_fitness_unbiased(Y):
    spec = ProblemSpec(d=3, p=2, z=2.1)
    x = np.array([0.5, -0.2, 0.3])
    s = SeedSpec(1, (Y,)).stream()
    vals = np.array([averaged_fitness(spec, x, Y, s) for _ in range(100_000)])
    se = vals.std() / np.sqrt(len(vals))
    assert abs(vals.mean() - expected_fitness(spec, x)) < 3 * se
    assert s.consumed == 100_000 * Y


def test_variance_law_across_radii():
    spec = ProblemSpec(d=5, p=2, z=2.1)
    u = np.ones(5) / np.sqrt(5)
    ratios = []
    for r in (0.1, 1.0, 10.0):
        s = SeedSpec(2, (int(r * 10),)).stream()
        vals = np.array([sample_fitness(spec, r * u, s) for _ in range(40_000)])
        ratios.append(vals.var() / r ** (spec.p * spec.z))
    assert max(ratios) / min(ratios) < 1.10
    assert np.allclose(ratios, 1.0, rtol=0.05)


def test_averaging_divides_variance():
    spec = ProblemSpec(d=2, p=2, z=2.0)
    x = np.array([1.0, 0.0])
    s = SeedSpec(3).stream()
    vals = np.array([averaged_fitness(spec, x, 100, s) for _ in range(20_000)])
    assert vals.var() == pytest.approx(1 / 100, rel=0.10)


def test_uniform_noise_variance():
    spec = ProblemSpec(d=1, p=2, z=2.0, noise="uniform", noise_scale=2.0)
    assert spec.noise_variance == pytest.approx(4 / 3)
    s = SeedSpec(8).stream()
    vals = np.array([sample_fitness(spec, [1.0], s) for _ in range(50_000)])
    assert vals.var() == pytest.approx(4 / 3, rel=0.05)
    assert np.all(np.abs(vals - 1.0) <= 2.0)


def test_zero_noise_is_deterministic_but_consumes():
    spec = ProblemSpec(d=2, noise="zero")
    s = SeedSpec(0).stream()
    assert averaged_fitness(spec, [1.0, 1.0], 7, s) == pytest.approx(2.0)
    assert s.consumed == 7


def test_dimension_mismatch():
    spec = ProblemSpec(d=3)
    with pytest.raises(DimensionError):
        expected_fitness(spec, [1.0, 2.0])
    with pytest.raises(DimensionError):
        ProblemSpec(d=2, optimum=(1.0, 2.0, 3.0))


@pytest.mark.parametrize("kwargs", [dict(d=0), dict(d=2, p=0), dict(d=2, z=-1.0),
                                    dict(d=2, noise="cauchy"),
                                    dict(d=2, noise="uniform", noise_scale=0.0)])
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidParameterError):
        ProblemSpec(**kwargs)


def test_bad_resampling_count():
    with pytest.raises(InvalidParameterError):
        averaged_fitness(ProblemSpec(d=1), [1.0], 0, SeedSpec(0).stream())


def test_x_star_is_a_copy():
    spec = ProblemSpec(d=2)
    spec.x_star[0] = 5.0
    assert spec.x_star[0] == 0.0


def test_scaling_helpers():
    assert power_of_two_scale(0.0) == 1.0
    assert power_of_two_scale(float("inf")) == 1.0
    for v in (1e-200, 3.0, 1e100):
        s = power_of_two_scale(v)
        assert 0.5 <= s / v <= 2.0 and np.log2(s) == int(np.log2(s))
    assert float(safe_norm([1e-200, 1e-200])) == pytest.approx(np.sqrt(2) * 1e-200)


def test_tiny_distances_keep_their_ranking():
    # ||x||^2 ~ 1e-340 underflows in float64; rescaled values still order the points.
    spec = ProblemSpec(d=3, z=2.1, noise="zero")
    X = np.array([np.full(3, 1e-170), np.full(3, 2e-170), np.full(3, 1.5e-170)])
    scale = power_of_two_scale(1e-170)
    r, true, _ = spec.scaled_values(X, np.zeros((3, 1)), scale)
    assert np.all(true > 0)
    assert np.argsort(true).tolist() == [0, 2, 1]
    assert r[1] / r[0] == pytest.approx(2.0)
    f = averaged_fitness(ProblemSpec(d=3, z=2.1), np.full(3, 1e-150), 12, SeedSpec(0).stream())
    assert np.isfinite(f) and f != 0.0
