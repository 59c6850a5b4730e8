import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_track
from ddsp_vocoder.core import FeatureFrame, FeatureTrack, TrackValidationError
from ddsp_vocoder.synth import (
    SynthState,
    draw_noise,
    extrapolate_periodicity,
    extrapolation_matrix,
    impulse_offsets,
    make_rng,
    periodic_impulse_response,
    periodicity_band_centers,
    render_aperiodic_frame,
    render_periodic_frame,
    synthesize,
    synthesize_parts,
    synthesize_reference,
)

ONES = np.ones(12)
ZEROS = np.zeros(12)


def simulate_impulses(f0_per_frame, hop=128, sr=24000):
    """Exact rational phase accumulation, one sample at a time."""
    phase = Fraction(0)
    out = []
    for f0 in f0_per_frame:
        inc = Fraction(f0) / sr
        hits = []
        for n in range(hop):
            phase += inc
            if phase >= 1:
                phase -= 1
                hits.append(n)
        out.append(hits)
    return out


def run_offsets(f0_per_frame, config):
    phase = 0.0
    out = []
    for f0 in f0_per_frame:
        offs, counts, nxt = impulse_offsets(np.array([phase]), np.array([float(f0)]), config)
        out.append(list(offs[0, : counts[0]]))
        phase = float(nxt[0])
    return out


# --- periodicity extrapolation ---------------------------------------------


def test_extrapolation_constants(config):
    np.testing.assert_array_equal(extrapolate_periodicity(ZEROS), np.zeros(257))
    np.testing.assert_allclose(extrapolate_periodicity(ONES), np.ones(257), atol=1e-15)


def reference_interp(p12, centers, bins):
    out = []
    for b in bins:
        if b <= centers[0]:
            out.append(p12[0])
        elif b >= centers[-1]:
            out.append(p12[-1])
        else:
            j = int(np.searchsorted(centers, b)) - 1
            t = (b - centers[j]) / (centers[j + 1] - centers[j])
            out.append((1 - t) * p12[j] + t * p12[j + 1])
    return np.array(out)


def test_extrapolation_ramp_matches_piecewise_linear_oracle(config):
    ramp = np.linspace(0, 1, 12)
    out = extrapolate_periodicity(ramp)
    assert np.all(np.diff(out) >= -1e-15)
    assert out.min() >= 0 and out.max() <= 1
    oracle = reference_interp(ramp, periodicity_band_centers(config), np.arange(257))
    np.testing.assert_allclose(out, oracle, atol=1e-14)


def test_band_centres_are_mel_spaced(config):
    centers = periodicity_band_centers(config)
    mel = 2595 * np.log10(1 + centers * 24000 / 512 / 700)
    np.testing.assert_allclose(np.diff(mel), np.diff(mel)[0], rtol=1e-9)
    assert 0 < centers[0] < centers[-1] < 256


def test_extrapolation_matrix_rows_are_convex(config):
    m = extrapolation_matrix(config)
    assert m.shape == (257, 12)
    assert np.all(m >= 0)
    np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-15)


def test_extrapolation_rejects_out_of_range():
    with pytest.raises(ValueError):
        extrapolate_periodicity(np.full(12, 1.5))


# --- impulse response -------------------------------------------------------


def test_impulse_response_zero_periodicity():
    assert not np.any(periodic_impulse_response(np.zeros(257), np.random.default_rng(0).normal(size=257)))


def test_impulse_response_unit_filter_is_centred_delta():
    h = periodic_impulse_response(np.ones(257), np.zeros(257))
    expected = np.zeros(512)
    expected[256] = 1.0
    np.testing.assert_allclose(h, expected, atol=1e-10)


def test_impulse_response_parseval(rng):
    p, v = rng.uniform(0, 1, 257), rng.normal(-1, 1, 257)
    h = periodic_impulse_response(p, v)
    mag = np.exp(v) * p
    full = np.concatenate([mag, mag[-2:0:-1]])  # Hermitian-symmetric magnitude, 512 bins
    assert np.sum(h**2) == pytest.approx(np.sum(full**2) / 512, rel=1e-10)


def test_impulse_response_is_symmetric_about_centre(rng):
    h = periodic_impulse_response(rng.uniform(0, 1, 257), rng.normal(size=257))
    np.testing.assert_allclose(h[257:], h[255:0:-1], atol=1e-12)


# --- impulse timing ---------------------------------------------------------


def test_unvoiced_frame_renders_nothing_and_keeps_phase():
    state = SynthState.create(0)
    state.running_phase = 0.3
    buf = render_periodic_frame(FeatureFrame(0.0, ONES, np.zeros(257)), state)
    assert buf.shape == (640,) and not np.any(buf)
    assert state.running_phase == 0.3


def test_period_equal_to_hop_gives_one_impulse_per_frame(config):
    got = run_offsets([187.5] * 10, config)
    assert got == simulate_impulses([Fraction(375, 2)] * 10)
    assert all(frame == [127] for frame in got)


def test_fifty_hz_gives_four_impulses_in_fifteen_frames(config):
    got = run_offsets([50.0] * 15, config)
    assert got == simulate_impulses([50] * 15)
    assert sum(len(f) for f in got) == 4
    assert max(len(f) for f in got) <= 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([0] + list(range(50, 801, 7))), min_size=1, max_size=40))
def test_impulse_positions_match_exact_simulation(f0s):
    from ddsp_vocoder.core import DEFAULT_CONFIG

    assert run_offsets(f0s, DEFAULT_CONFIG) == simulate_impulses(f0s)


def test_periodic_frame_places_scaled_responses():
    state = SynthState.create(0)
    frame = FeatureFrame(187.5, ONES, np.zeros(257))
    buf = render_periodic_frame(frame, state)
    expected = np.zeros(640)
    expected[127 + 256] = 1 / math.sqrt(187.5)
    np.testing.assert_allclose(buf, expected, atol=1e-12)


def test_zero_periodicity_skips_frame_but_advances_phase():
    state = SynthState.create(0)
    buf = render_periodic_frame(FeatureFrame(100.0, ZEROS, np.zeros(257)), state)
    assert not np.any(buf)
    assert state.running_phase == pytest.approx(128 * 100 / 24000)


# --- aperiodic path ---------------------------------------------------------


def test_fully_periodic_frame_has_no_noise():
    state = SynthState.create(3)
    buf = render_aperiodic_frame(FeatureFrame(0.0, ONES, np.zeros(257)), state)
    assert buf.shape == (512,) and not np.any(buf)


def test_noise_stream_is_chunking_invariant():
    whole = draw_noise(make_rng(11), 128 * 6)
    rng = make_rng(11)
    parts = np.concatenate([draw_noise(rng, 128) for _ in range(6)])
    assert np.array_equal(whole, parts)
    assert np.all(np.abs(whole) <= 1 / math.sqrt(24000))


def test_unit_filter_noise_reconstructs_the_noise_stream(config):
    # Hann halves overlap-add to one, so with v = 0 and p = 0 the aperiodic
    # output is the raw noise delayed by half a noise window
    n = 400
    track = FeatureTrack.constant(n, 0.0, 0.0, 0.0)
    _, ap = synthesize_parts(track, config, seed=5)
    noise = draw_noise(make_rng(5), n * 128)
    # the last 128 samples only see the falling half of the final window
    np.testing.assert_allclose(ap[128:-128], noise[: n * 128 - 256], atol=1e-15)
    np.testing.assert_allclose(ap[:128], 0.0, atol=1e-15)
    expected_rms = 1 / math.sqrt(3 * 24000)
    assert np.sqrt(np.mean(ap[128:-128] ** 2)) == pytest.approx(expected_rms, rel=0.05)


def test_aperiodic_frame_is_deterministic(rng):
    frame = FeatureFrame(0.0, rng.uniform(0, 1, 12), rng.normal(size=257))
    a = [render_aperiodic_frame(frame, s) for s in [SynthState.create(9)] for _ in range(3)]
    b = [render_aperiodic_frame(frame, s) for s in [SynthState.create(9)] for _ in range(3)]
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


# --- whole-utterance synthesis ----------------------------------------------


def test_empty_track_gives_empty_audio():
    assert len(synthesize(FeatureTrack.empty())) == 0


def test_output_length(config, rng):
    assert len(synthesize(random_track(rng, 37))) == 37 * 128


def test_silent_features_give_near_silence():
    audio = synthesize(FeatureTrack.constant(200, 150.0, 0.0, -40.0), seed=1)
    assert np.sqrt(np.mean(audio.samples**2)) < 1e-6


def test_pitch_shows_up_in_spectrum():
    audio = synthesize(FeatureTrack.constant(375, 120.0, 1.0, -1.0), seed=0).samples
    spec = np.abs(np.fft.rfft(audio * np.hanning(len(audio))))
    freqs = np.fft.rfftfreq(len(audio), 1 / 24000)
    df = freqs[1]
    band = freqs > 60
    peaks = freqs[band][spec[band] > 0.5 * spec[band].max()]
    assert abs(peaks.min() - 120.0) <= df
    # every strong component sits on a harmonic of 120 Hz
    assert np.all(np.abs(peaks / 120 - np.round(peaks / 120)) * 120 <= df * 1.001)


def test_batched_synthesis_matches_frame_loop(rng):
    track = random_track(rng, 60, f0_range=(60, 700))
    track = track.replace(f0=np.where(rng.uniform(size=60) < 0.2, 0.0, track.f0))
    fast = synthesize(track, seed=4).samples
    slow = synthesize_reference(track, seed=4).samples
    np.testing.assert_allclose(fast, slow, atol=1e-15)


def test_invalid_track_raises(rng):
    track = random_track(rng, 5)
    bad = track.replace(f0=np.array([100.0, 100.0, 20000.0, 100.0, 100.0]))
    with pytest.raises(TrackValidationError) as err:
        synthesize(bad)
    assert err.value.violations[0].index == 2


@pytest.mark.parametrize("f0", [80.0, 120.0, 200.0, 320.0])
def test_periodic_energy_is_independent_of_f0(f0):
    audio = synthesize(FeatureTrack.constant(375, f0, 1.0, 0.0), seed=0).samples
    rms = np.sqrt(np.mean(audio[512:-512] ** 2))
    assert rms == pytest.approx(1 / math.sqrt(24000), rel=0.10)


def test_output_is_linear_in_filter_gain(rng):
    track = random_track(rng, 30)
    g = 3.7
    base = synthesize(track, seed=2).samples
    scaled = synthesize(track.replace(v=track.v + math.log(g)), seed=2).samples
    np.testing.assert_allclose(scaled, g * base, rtol=1e-12, atol=1e-17)


def test_periodic_plus_aperiodic_is_the_output(rng):
    track = random_track(rng, 50)
    per, ap = synthesize_parts(track, seed=8)
    assert np.array_equal(synthesize(track, seed=8).samples, per + ap)
    only_per, none_ap = synthesize_parts(track.replace(p=np.ones_like(track.p)), seed=8)
    assert not np.any(none_ap)
    none_per, only_ap = synthesize_parts(track.replace(p=np.zeros_like(track.p)), seed=8)
    assert not np.any(none_per)


def test_determinism(rng):
    track = random_track(rng, 40)
    assert np.array_equal(synthesize(track, seed=6).samples, synthesize(track, seed=6).samples)
    assert not np.array_equal(synthesize(track, seed=6).samples, synthesize(track, seed=7).samples)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 29), st.integers(0, 2**31))
def test_frame_locality(t, seed):
    rng = np.random.default_rng(seed)
    track = random_track(rng, 30)
    p, v = np.array(track.p), np.array(track.v)
    p[t] = rng.uniform(0, 1, 12)
    v[t] += rng.normal(0, 1, 257)
    a = synthesize(track, seed=1).samples
    b = synthesize(track.replace(p=p, v=v), seed=1).samples
    changed = np.flatnonzero(a != b)
    assert changed.size > 0
    assert changed.min() >= t * 128 - 256
    assert changed.max() < t * 128 + 640
    # tighter bound from the buffer layout: [t*hop - 256, t*hop + 384)
    assert changed.max() < t * 128 + 384
