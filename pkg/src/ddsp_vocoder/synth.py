"""Source-filter vocoder: filtered impulse train plus filtered noise, overlap-added.

Both excitation paths share the filter magnitude ``exp(v)``; the periodic path
sees ``exp(v) * p`` and the aperiodic path ``exp(v) * (1 - p)``, where ``p`` is
the 12-band periodicity interpolated to the 257 linear bins.

Every frame is centered ``fft_size // 2`` samples into its buffers. That
latency is trimmed, so frame ``t`` is centered at output sample ``t * hop``
and the output has exactly ``frames * hop`` samples.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided, sliding_window_view

from ddsp_vocoder.core import (
    DEFAULT_CONFIG,
    AudioBuffer,
    FeatureFrame,
    FeatureTrack,
    VocoderConfig,
    require_valid,
)
from ddsp_vocoder.spectral import hann_window, irfft, overlap_add, rfft

# phase values this close below an integer count as a wrap; absorbs rounding
# in f0/sample_rate so periods that divide the hop land on exact samples
PHASE_TOL = 1e-9

# highest frequency covered by the periodicity bands
PERIODICITY_MAX_HZ = 12000.0


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _band_centers(dims: int, sample_rate_hz: int, fft_size: int) -> np.ndarray:
    top = hz_to_mel(min(PERIODICITY_MAX_HZ, sample_rate_hz / 2))
    centers_hz = mel_to_hz((np.arange(dims) + 0.5) * top / dims)
    return centers_hz * fft_size / sample_rate_hz


def periodicity_band_centers(config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Band centers as fractional linear-frequency bins.

    The range 0..12 kHz is cut into equal mel-width bands; each center is the
    midpoint of its band on the mel axis.
    """
    return _band_centers(config.periodicity_dims, config.sample_rate_hz, config.fft_size)


@functools.lru_cache(maxsize=8)
def _extrapolation_matrix(fft_size: int, sample_rate_hz: int, dims: int) -> np.ndarray:
    centers = _band_centers(dims, sample_rate_hz, fft_size)
    bins = np.arange(fft_size // 2 + 1, dtype=np.float64)
    eye = np.eye(dims)
    m = np.stack([np.interp(bins, centers, eye[j]) for j in range(dims)], axis=1)
    m.setflags(write=False)
    return m


def extrapolation_matrix(config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    """(257, 12) matrix M with ``p257 = M @ p12``.

    Rows are non-negative and sum to one, so constants are preserved and
    [0, 1] maps into [0, 1].
    """
    return _extrapolation_matrix(config.fft_size, config.sample_rate_hz, config.periodicity_dims)


def extrapolate_periodicity(p12, config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Piecewise-linear interpolation of band periodicity to every FFT bin.

    Accepts a single 12-vector or a (frames, 12) array.
    """
    p12 = np.asarray(p12, dtype=np.float64)
    if p12.shape[-1] != config.periodicity_dims:
        raise ValueError(f"expected {config.periodicity_dims} periodicity bands, got {p12.shape[-1]}")
    if np.any(~np.isfinite(p12)) or np.any((p12 < 0) | (p12 > 1)):
        raise ValueError("periodicity must lie in [0, 1]")
    return p12 @ extrapolation_matrix(config).T


def half_shift_signs(fft_size: int) -> np.ndarray:
    """(-1)^k per rfft bin: a 180 degree phase step, i.e. a delay of fft_size/2."""
    return np.where(np.arange(fft_size // 2 + 1) % 2 == 0, 1.0, -1.0)


def periodic_impulse_response(p257, v257, config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Zero-phase filter ``exp(v) * p`` as a 512-sample response centered on sample 256."""
    mag = np.exp(np.asarray(v257, dtype=np.float64)) * np.asarray(p257, dtype=np.float64)
    return irfft(mag * half_shift_signs(config.fft_size), config.fft_size, axis=-1)


def noise_window(config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Hann window of ``noise_window_size`` centered in an ``fft_size`` buffer, zeros elsewhere."""
    w = np.zeros(config.fft_size)
    start = (config.fft_size - config.noise_window_size) // 2
    w[start : start + config.noise_window_size] = hann_window(config.noise_window_size)
    return w


def noise_scale(config: VocoderConfig = DEFAULT_CONFIG) -> float:
    return 1.0 / math.sqrt(config.sample_rate_hz)


def draw_noise(rng: np.random.Generator, n: int, config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    """``n`` uniform samples in [-1, 1) scaled by 1/sqrt(sample_rate).

    Draws are sequential doubles from the generator, so drawing per frame or
    for the whole utterance at once gives the same stream.
    """
    return (rng.random(n) * 2.0 - 1.0) * noise_scale(config)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 (O'Neill 2014, 128-bit LCG state with XSL-RR output), seeded via SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed))


def impulse_offsets(phase, f0, config: VocoderConfig = DEFAULT_CONFIG):
    """Impulse positions inside each frame and the phase carried to the next frame.

    ``phase`` and ``f0`` are per-frame arrays. The phase advances by
    ``f0 / sample_rate`` per sample and an impulse fires at sample ``n`` when
    it wraps past an integer during that sample. Returns ``(offsets, counts,
    next_phase)`` with ``offsets`` shaped (frames, max_count) and padded with -1.
    """
    phase = np.asarray(phase, dtype=np.float64)
    f0 = np.asarray(f0, dtype=np.float64)
    hop = config.frame_shift
    inc = f0 / config.sample_rate_hz
    end = phase + hop * inc
    counts = np.where(inc > 0, np.floor(end + PHASE_TOL), 0).astype(np.int64)
    max_count = int(counts.max()) if counts.size else 0
    m = np.arange(1, max_count + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.ceil((m[None, :] - phase[..., None] - PHASE_TOL) / inc[..., None]) - 1
    valid = m[None, :] <= counts[..., None]
    offsets = np.where(valid, np.clip(pos, 0, hop - 1), -1).astype(np.int64)
    next_phase = np.maximum(end - counts, 0.0)
    return offsets, counts, next_phase


@dataclass
class SynthState:
    """Mutable per-utterance state for frame-by-frame rendering."""

    running_phase: float = 0.0
    noise_buffer: np.ndarray = field(default_factory=lambda: np.zeros(DEFAULT_CONFIG.fft_size))
    rng: np.random.Generator = field(default_factory=lambda: make_rng(0))
    output_accumulator: list = field(default_factory=list)

    @classmethod
    def create(cls, seed: int, config: VocoderConfig = DEFAULT_CONFIG) -> "SynthState":
        return cls(0.0, np.zeros(config.fft_size), make_rng(seed), [])


def render_periodic_frame(frame: FeatureFrame, state: SynthState,
                          config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    buf = np.zeros(config.periodic_buffer_len)
    offsets, counts, next_phase = impulse_offsets(
        np.array([state.running_phase]), np.array([frame.f0]), config
    )
    state.running_phase = float(next_phase[0])
    p257 = extrapolate_periodicity(frame.p, config)
    if counts[0] == 0 or not np.any(p257):
        return buf
    h = periodic_impulse_response(p257, frame.v, config) / math.sqrt(frame.f0)
    for t in offsets[0, : counts[0]]:
        buf[t : t + config.fft_size] += h
    return buf


def render_aperiodic_frame(frame: FeatureFrame, state: SynthState,
                           config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    hop = config.frame_shift
    state.noise_buffer = np.concatenate([state.noise_buffer[hop:], draw_noise(state.rng, hop, config)])
    p257 = extrapolate_periodicity(frame.p, config)
    mag = np.exp(frame.v) * (1.0 - p257)
    spec = rfft(state.noise_buffer) * mag
    return irfft(spec, config.fft_size) * noise_window(config)


def synthesize_reference(track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG,
                         seed: int = 0) -> AudioBuffer:
    """Frame-at-a-time synthesis through :class:`SynthState`; slow but literal."""
    require_valid(track, config)
    hop, n = config.frame_shift, len(track)
    raw = np.zeros(n * hop + config.fft_size)
    state = SynthState.create(seed, config)
    for i, frame in enumerate(track):
        per = render_periodic_frame(frame, state, config)
        ap = render_aperiodic_frame(frame, state, config)
        raw[i * hop : i * hop + per.shape[0]] += per
        raw[i * hop : i * hop + ap.shape[0]] += ap
    lat = config.fft_size // 2
    return AudioBuffer(raw[lat : lat + n * hop], config.sample_rate_hz)


@dataclass
class ForwardPlan:
    """Everything the batched forward pass computes that does not depend on v or p.

    Impulse positions follow from f0 only and the noise from the seed only;
    the gradient code holds both fixed.
    """

    num_frames: int
    offsets: np.ndarray  # (frames, max_impulses), -1 padded
    counts: np.ndarray  # (frames,)
    scales: np.ndarray  # (frames,) 1/sqrt(f0), 0 for unvoiced
    noise_spectra: np.ndarray  # (frames, bins) complex rfft of the noise buffer


def plan_forward(track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG, seed: int = 0) -> ForwardPlan:
    n = len(track)
    hop = config.frame_shift
    f0 = track.f0
    start_phase = np.empty(n)
    inc = f0 / config.sample_rate_hz
    phase = 0.0
    for i in range(n):
        start_phase[i] = phase
        # same arithmetic as impulse_offsets so both paths agree bit-exactly
        end = phase + hop * inc[i]
        if inc[i] > 0:
            phase = max(end - math.floor(end + PHASE_TOL), 0.0)
    offsets, counts, _ = impulse_offsets(start_phase, f0, config)
    with np.errstate(divide="ignore"):
        scales = np.where(f0 > 0, 1.0 / np.sqrt(np.where(f0 > 0, f0, 1.0)), 0.0)

    noise = draw_noise(make_rng(seed), n * hop, config)
    padded = np.concatenate([np.zeros(config.fft_size - hop), noise])
    if n:
        buffers = sliding_window_view(padded, config.fft_size)[::hop]
        spectra = rfft(buffers, axis=-1)
    else:
        spectra = np.zeros((0, config.spectrum_bins), dtype=complex)
    return ForwardPlan(n, offsets, counts, scales, spectra)


def _trim(raw: np.ndarray, n_frames: int, config: VocoderConfig) -> np.ndarray:
    lat = config.fft_size // 2
    return raw[lat : lat + n_frames * config.frame_shift]


def offset_view(bufs: np.ndarray, hop: int, length: int) -> np.ndarray:
    """(frames, hop, length) view with ``view[i, t] is bufs[i, t : t + length]``."""
    rows, width = bufs.shape
    if width < hop - 1 + length:
        raise ValueError("buffer too short for the offset view")
    s0, s1 = bufs.strides
    return as_strided(bufs, shape=(rows, hop, length), strides=(s0, s1, s1))


def render_periodic(plan: ForwardPlan, mag_periodic: np.ndarray,
                    config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Aligned periodic signal for per-bin periodic magnitudes ``exp(v) * p257``."""
    n, N, hop = plan.num_frames, config.fft_size, config.frame_shift
    raw = np.zeros(n * hop + N)
    active = np.flatnonzero(plan.counts > 0)
    if active.size:
        spec = mag_periodic[active] * plan.scales[active, None]
        spec *= half_shift_signs(N)
        h = irfft(spec, N, axis=-1)
        # view[i, t] is raw[i*hop + t : i*hop + t + N]
        view = as_strided(raw, shape=(n, hop, N), strides=(hop * raw.itemsize, raw.itemsize, raw.itemsize))
        counts = plan.counts[active]
        offsets = plan.offsets[active]
        # frames whose index differs by a multiple of `stride` never share output samples
        stride = -(-config.periodic_buffer_len // hop)
        residue = active % stride
        for slot in range(offsets.shape[1]):
            has = counts > slot
            for r in range(stride):
                sel = np.flatnonzero(has & (residue == r))
                if sel.size:
                    view[active[sel], offsets[sel, slot]] += h[sel]
    return _trim(raw, n, config)


def render_aperiodic(plan: ForwardPlan, mag_aperiodic: np.ndarray,
                     config: VocoderConfig = DEFAULT_CONFIG) -> np.ndarray:
    n, N = plan.num_frames, config.fft_size
    if n == 0:
        return np.zeros(0)
    bufs = irfft(plan.noise_spectra * mag_aperiodic, N, axis=-1) * noise_window(config)
    total = n * config.frame_shift + N
    return _trim(overlap_add(bufs, config.frame_shift, total), n, config)


def synthesize_parts(track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG,
                     seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Periodic and aperiodic signals separately; ``synthesize`` returns their sum."""
    require_valid(track, config)
    plan = plan_forward(track, config, seed)
    mag = np.exp(track.v)
    p257 = track.p @ extrapolation_matrix(config).T
    return (
        render_periodic(plan, mag * p257, config),
        render_aperiodic(plan, mag * (1.0 - p257), config),
    )


def synthesize(track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG, seed: int = 0) -> AudioBuffer:
    """Render a feature track to ``len(track) * frame_shift`` samples.

    Deterministic in (track, config, seed). Raises TrackValidationError on
    invalid features.
    """
    periodic, aperiodic = synthesize_parts(track, config, seed)
    return AudioBuffer(periodic + aperiodic, config.sample_rate_hz)
