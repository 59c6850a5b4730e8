import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddsp_vocoder.core import AudioBuffer
from ddsp_vocoder.spectral import (
    amp_log,
    amp_log_derivative,
    frame_signal,
    hann_window,
    irfft,
    overlap_add,
    rfft,
    spectrogram_set,
    stft_log_mag,
)

GAIN = 10 ** (72 / 20)


def direct_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def test_hann_endpoint_and_centre():
    w = hann_window(256)
    assert w[0] == 0.0
    assert w[128] == 1.0


def test_hann_halves_sum_to_one():
    w = hann_window(256)
    np.testing.assert_allclose(w[:128] + w[128:], 1.0, atol=1e-12)


def test_hann_matches_closed_form():
    n = np.arange(512)
    np.testing.assert_allclose(hann_window(512), 0.5 * (1 - np.cos(2 * np.pi * n / 512)), atol=1e-15)


@pytest.mark.parametrize("size", [0, 1, 255])
def test_hann_rejects_bad_sizes(size):
    with pytest.raises(ValueError):
        hann_window(size)


def test_cola_sliding_sum():
    w = hann_window(256)
    total = overlap_add(np.tile(w, (20, 1)), 128)
    np.testing.assert_allclose(total[128:-128], 1.0, atol=1e-12)


def test_amp_log_zero_maps_to_zero():
    assert amp_log(0.0) == 0.0


def test_amp_log_branch_point():
    assert amp_log(math.e / GAIN) == pytest.approx(1.0, abs=1e-12)
    below = amp_log(math.e / GAIN * (1 - 1e-13))
    assert below == pytest.approx(1.0, abs=1e-12)


def test_amp_log_of_one():
    mpmath.mp.dps = 40
    expected = float(mpmath.log(mpmath.power(10, mpmath.mpf("3.6"))))
    assert amp_log(1.0) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(8.2893, abs=1e-4)


def test_amp_log_rejects_negative():
    with pytest.raises(ValueError):
        amp_log(-1e-9)


@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=50))
def test_amp_log_monotone(values):
    y = np.sort(np.array(values))
    out = amp_log(y)
    assert np.all(np.diff(out) >= 0)
    assert np.all(out >= 0)


def test_amp_log_derivative_matches_central_difference():
    y = np.geomspace(1e-6, 1.0, 200)
    h = y * 1e-6
    numeric = (amp_log(y + h) - amp_log(y - h)) / (2 * h)
    np.testing.assert_allclose(amp_log_derivative(y), numeric, rtol=1e-6)


@pytest.mark.parametrize("n", [512, 1024, 2048])
def test_fft_round_trip_and_parseval(n):
    x = np.random.default_rng(n).standard_normal(n)
    spec = rfft(x)
    back = irfft(spec, n)
    assert np.linalg.norm(back - x) / np.linalg.norm(x) < 1e-10
    weights = np.full(n // 2 + 1, 2.0)
    weights[[0, -1]] = 1.0
    energy_freq = np.sum(weights * np.abs(spec) ** 2) / n
    assert energy_freq == pytest.approx(np.sum(x**2), rel=1e-10)


def test_fft_matches_direct_dft():
    x = np.random.default_rng(5).standard_normal(512)
    np.testing.assert_allclose(rfft(x), direct_dft(x)[:257], atol=1e-9)


def test_stft_of_silence_is_zero():
    for c in (512, 1024, 2048):
        assert not np.any(stft_log_mag(np.zeros(3000), c))


def test_sine_peak_bin():
    n = np.arange(24000)
    x = np.sin(2 * np.pi * 1500 * n / 24000)
    mags = stft_log_mag(AudioBuffer(x), 512)
    # direct DFT of one windowed frame as the oracle
    frame = x[1280 : 1280 + 512] * hann_window(512)
    oracle = np.abs(direct_dft(frame)[:257])
    assert int(np.argmax(oracle)) == 32
    assert int(np.argmax(mags[10])) == 32
    # compare magnitudes: the O(N^2) oracle rounds at ~1e-12, which the
    # linear amp_log branch would amplify by gain/e
    spec = np.abs(rfft(frame))
    np.testing.assert_allclose(spec, oracle, atol=1e-10)
    np.testing.assert_allclose(mags[10], amp_log(spec), atol=1e-12)


def test_frame_count_and_zero_padding():
    mags = stft_log_mag(np.ones(24000), 512)
    assert mags.shape == (188, 257)
    frames = frame_signal(np.arange(300.0), 256, 128)
    assert frames.shape == (3, 256)
    assert np.all(frames[2, 44:] == 0) and frames[2, 43] == 299.0
    assert stft_log_mag(np.zeros(0), 512).shape == (0, 257)


def test_overlap_add_is_adjoint_of_framing(rng):
    x = rng.standard_normal(1000)
    y = rng.standard_normal((8, 512))
    lhs = np.sum(frame_signal(x, 512, 128) * y)
    rhs = np.dot(x, overlap_add(y, 128, len(x)))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_spectrogram_set_shapes_and_determinism(config, rng):
    x = rng.uniform(-0.5, 0.5, 5000)
    a = spectrogram_set(AudioBuffer(x), config)
    b = spectrogram_set(AudioBuffer(x.copy()), config)
    assert len(a) == 3
    assert [m.shape[1] for m in a.mags] == [257, 513, 1025]
    assert all(m.shape[0] == 40 for m in a.mags)
    for ma, mb in zip(a.mags, b.mags):
        assert np.array_equal(ma, mb)
        assert np.all(ma >= 0)
    zero = spectrogram_set(AudioBuffer(np.zeros(5000)), config)
    assert all(not np.any(m) for m in zero.mags)
