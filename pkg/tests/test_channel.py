import numpy as np
import pytest

from scnwd import ChannelParams, llr_matrix, llr_vector, stream


def test_noise_variance_formula():
    p = ChannelParams(0.0, 0.5)
    assert p.noise_var == pytest.approx(1.0)
    p2 = ChannelParams(2.0, 0.49)
    assert p2.noise_var == pytest.approx(1.0 / (2 * 0.49 * 10 ** 0.2))


def test_rate_validation():
    with pytest.raises(ValueError):
        ChannelParams(1.0, 1.5)


def test_llr_moments():
    p = ChannelParams(1.4, 0.49)
    x = llr_vector(10**6, p, stream(7, 0))
    mean = 2.0 / p.noise_var
    var = 4.0 / p.noise_var
    se_mean = np.sqrt(var / x.size)
    assert abs(x.mean() - mean) < 3 * se_mean
    assert abs(x.var() - var) / var < 0.01


def test_noiseless_limit_all_positive():
    p = ChannelParams(40.0, 0.49)
    x = llr_vector(10**4, p, stream(7, 1))
    assert x.min() > 0


def test_determinism_and_stream_independence():
    p = ChannelParams(1.0, 0.5)
    a = llr_vector(100, p, stream(3, 5, 9))
    b = llr_vector(100, p, stream(3, 5, 9))
    c = llr_vector(100, p, stream(3, 5, 10))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_llr_matrix_matches_vector_layout():
    p = ChannelParams(1.0, 0.5)
    m = llr_matrix((3, 50), p, stream(1, 2))
    assert m.shape == (3, 50)


def test_rejects_bad_length():
    with pytest.raises(ValueError):
        llr_vector(0, ChannelParams(1.0, 0.5), stream(0))
