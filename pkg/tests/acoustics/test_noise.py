import math

import numpy as np
import pytest

from src.acoustics.noise import NOISE_KINDS, add_ambient_noise, ambient_noise, mix_at_snr
from src.acoustics.simulator import BinauralRir
from src.errors import ConfigurationError, DegenerateInputError


@pytest.mark.parametrize("kind", NOISE_KINDS)
@pytest.mark.parametrize("snr_db", [-5.0, 10.0, 30.0])
def test_mix_hits_requested_snr(rng, kind, snr_db):
    clean = rng.standard_normal((2, 4000))
    mixed = mix_at_snr(clean, snr_db, kind, 8000, seed=5)
    noise = mixed - clean
    measured = 10.0 * math.log10(np.sum(clean**2) / np.sum(noise**2))
    assert measured == pytest.approx(snr_db, abs=1e-6)


def test_noise_is_seeded():
    a = ambient_noise(2, 500, "pink", 8000, seed=3)
    b = ambient_noise(2, 500, "pink", 8000, seed=3)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a[0], a[1])


def test_burst_is_gated():
    burst = ambient_noise(1, 4000, "burst", 8000, seed=11)[0]
    assert np.count_nonzero(burst == 0.0) > 1000


def test_infinite_snr_returns_clean_copy(rng):
    clean = rng.standard_normal((2, 100))
    out = mix_at_snr(clean, math.inf, "white", 8000, seed=0)
    np.testing.assert_array_equal(out, clean)
    assert out is not clean


def test_bad_inputs(rng):
    with pytest.raises(ConfigurationError):
        mix_at_snr(rng.standard_normal((2, 10)), 10.0, "brown", 8000, seed=0)
    with pytest.raises(ConfigurationError):
        mix_at_snr(rng.standard_normal((2, 10)), math.nan, "white", 8000, seed=0)
    with pytest.raises(DegenerateInputError):
        mix_at_snr(np.zeros((2, 10)), 10.0, "white", 8000, seed=0)


def test_add_ambient_noise_keeps_rate(rng):
    echo = BinauralRir(rng.standard_normal((2, 300)), 8000)
    noisy = add_ambient_noise(echo, "white", 20.0, seed=1)
    assert noisy.sample_rate == 8000
    assert noisy.samples.shape == echo.samples.shape
