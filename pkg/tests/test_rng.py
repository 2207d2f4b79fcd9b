import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resample_es.exceptions import InvalidParameterError
from resample_es.rng import DrawBuffer, SeedSpec, gaussian_scalar, gaussian_vector


@given(seed=st.integers(0, 2**64 - 1), path=st.lists(st.integers(0, 2**32), max_size=3))
@settings(max_examples=30, deadline=None)
def test_same_seed_same_sequence(seed, path):
    a = SeedSpec(seed, tuple(path)).stream()
    b = SeedSpec(seed, tuple(path)).stream()
    assert [gaussian_scalar(a) for _ in range(5)] == [gaussian_scalar(b) for _ in range(5)]


def test_stream_advances():
    s = SeedSpec(1).stream()
    x, y = gaussian_scalar(s), gaussian_scalar(s)
    assert x != y
    assert s.consumed == 2


def test_moments_of_a_million_draws():
    s = SeedSpec(7).stream()
    g = s.gaussians(1_000_000)
    # 5 standard errors on mean and variance
    assert abs(g.mean()) < 5e-3
    assert abs(g.var() - 1.0) < 5 * np.sqrt(2 / 1e6)


def test_vector_of_dimension_one_is_a_scalar_draw():
    a, b = SeedSpec(3).stream(), SeedSpec(3).stream()
    v = gaussian_vector(a, 1)
    assert v.shape == (1,)
    assert v[0] == gaussian_scalar(b)


def test_vector_covariance_is_identity():
    s = SeedSpec(11).stream()
    V = np.array([gaussian_vector(s, 3) for _ in range(100_000)])
    assert np.all(np.abs(np.cov(V.T) - np.eye(3)) < 0.03)


@pytest.mark.parametrize("d", [0, -2])
def test_bad_dimension(d):
    with pytest.raises(InvalidParameterError):
        gaussian_vector(SeedSpec(0).stream(), d)


def test_sibling_streams_uncorrelated():
    root = SeedSpec(99, (5,))
    a = root.child(0).stream().gaussians(200_000)
    b = root.child(1).stream().gaussians(200_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_children_differ_from_parent():
    root = SeedSpec(4)
    assert root.child(0).stream().gaussian() != root.stream().gaussian()


@pytest.mark.parametrize("bad", [-1, 2**64])
def test_seed_range(bad):
    with pytest.raises(InvalidParameterError):
        SeedSpec(bad)


def test_negative_path_rejected():
    with pytest.raises(InvalidParameterError):
        SeedSpec(0, (1, -1))


@given(rows=st.integers(1, 40), block=st.integers(1, 7), cols=st.integers(1, 5))
@settings(max_examples=40, deadline=None)
def test_draw_buffer_matches_row_by_row_draws(rows, block, cols):
    buf = DrawBuffer(SeedSpec(12).stream(), (cols,), block_rows=block)
    ref = SeedSpec(12).stream()
    for _ in range(rows):
        np.testing.assert_array_equal(buf.take(), ref.gaussians((cols,)))
