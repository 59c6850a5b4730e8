"""Analytic gradient of the multi-window STFT loss w.r.t. periodicity and filter.

The forward graph is

    v, p12 -> p257 = M p12 -> mag_per = e^v p257, mag_ap = e^v (1 - p257)
           -> irfft / filtered noise -> overlap-add -> audio
           -> |STFT_c| -> amp_log -> L1 against the target

With f0 and the seed fixed, impulse positions and the noise spectra are
constants, so the audio is linear in (mag_per, mag_ap) and the chain below is
exact. Only amp_log, the magnitude and the L1 are nonlinear.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ddsp_vocoder.core import (
    DEFAULT_CONFIG,
    AudioBuffer,
    FeatureTrack,
    GradientTrack,
    VocoderConfig,
    require_valid,
)
from ddsp_vocoder.loss import pad_pair
from ddsp_vocoder.spectral import (
    amp_log,
    amp_log_derivative,
    frame_signal,
    hann_window,
    irfft,
    overlap_add,
    rfft,
    stft,
)
from ddsp_vocoder.synth import (
    extrapolation_matrix,
    half_shift_signs,
    noise_window,
    offset_view,
    plan_forward,
    render_aperiodic,
    render_periodic,
)


def _rfft_adjoint_weights(n: int) -> np.ndarray:
    """Bin multiplicities of a one-sided spectrum: 1 at DC and Nyquist, 2 between."""
    c = np.full(n // 2 + 1, 2.0)
    c[0] = c[-1] = 1.0
    return c


def mw_stft_loss_and_audio_grad(x_ref, x_pred, config: VocoderConfig = DEFAULT_CONFIG):
    """Loss value and dL/d x_pred (same length as the padded pair)."""
    ref, pred = pad_pair(x_ref, x_pred)
    grad = np.zeros(len(pred))
    if len(pred) == 0:
        return 0.0, grad
    hop = config.frame_shift
    loss = 0.0
    for c, weight in zip(config.loss_fft_sizes, config.loss_weights_stft):
        s_pred = stft(pred, c, hop)
        mag = np.abs(s_pred)
        x_ref_c = amp_log(np.abs(stft(ref, c, hop)), config.gain_db)
        x_pred_c = amp_log(mag, config.gain_db)
        diff = x_pred_c - x_ref_c
        scale = weight / diff.size
        loss += scale * np.abs(diff).sum()

        # dL/d|S|, then through |S| (derivative taken as 0 at |S| = 0)
        g_mag = scale * np.sign(diff) * amp_log_derivative(mag, config.gain_db)
        with np.errstate(invalid="ignore", divide="ignore"):
            phase = np.where(mag > 0, s_pred / np.where(mag > 0, mag, 1.0), 0.0)
        g_spec = g_mag * phase
        # adjoint of rfft on real input: dL/dy_n = Re sum_k G_k e^{+2 pi i k n / N}
        g_frames = irfft(g_spec / _rfft_adjoint_weights(c), c, axis=-1) * c
        g_frames *= hann_window(c)
        grad += overlap_add(g_frames, hop, len(pred))
    return float(loss), grad


def _raw_grad(g_aligned: np.ndarray, n_frames: int, config: VocoderConfig) -> np.ndarray:
    """Scatter an aligned-audio gradient back onto the untrimmed synthesis buffer."""
    lat = config.fft_size // 2
    raw = np.zeros(n_frames * config.frame_shift + config.fft_size)
    raw[lat : lat + len(g_aligned)] = g_aligned
    return raw


def feature_grads_from_audio_grad(track: FeatureTrack, g_audio: np.ndarray,
                                  config: VocoderConfig = DEFAULT_CONFIG, seed: int = 0,
                                  plan=None) -> GradientTrack:
    """Backpropagate dL/d(audio) to dL/dp12 and dL/dv with impulses and noise held fixed."""
    n = len(track)
    N, hop = config.fft_size, config.frame_shift
    if n == 0:
        return GradientTrack(np.zeros((0, config.periodicity_dims)), np.zeros((0, config.spectrum_bins)))
    if plan is None:
        plan = plan_forward(track, config, seed)
    ext = extrapolation_matrix(config)
    mag = np.exp(track.v)
    p257 = track.p @ ext.T
    raw = _raw_grad(g_audio[: n * hop], n, config)
    c_over_n = _rfft_adjoint_weights(N) / N

    # periodic path: correlate each frame's gradient window with its impulses
    g640 = sliding_window_view(raw, config.periodic_buffer_len)[::hop][:n]
    view = offset_view(np.ascontiguousarray(g640), hop, N)
    q = np.zeros((n, N))
    for slot in range(plan.offsets.shape[1]):
        rows = np.flatnonzero(plan.counts > slot)
        q[rows] += view[rows, plan.offsets[rows, slot]]
    q *= plan.scales[:, None]
    g_mag_per = c_over_n * half_shift_signs(N) * rfft(q, axis=-1).real

    # aperiodic path: windowed gradient against the fixed noise spectrum
    g512 = frame_signal(raw, N, hop)[:n] * noise_window(config)
    g_mag_ap = c_over_n * (plan.noise_spectra * np.conj(rfft(g512, axis=-1))).real

    d_v = g_mag_per * mag * p257 + g_mag_ap * mag * (1.0 - p257)
    d_p257 = (g_mag_per - g_mag_ap) * mag
    d_p = d_p257 @ ext
    return GradientTrack(d_p, d_v)


def loss_and_grad(track: FeatureTrack, target, config: VocoderConfig = DEFAULT_CONFIG,
                  seed: int = 0) -> tuple[float, GradientTrack]:
    """Multi-window STFT loss of ``synthesize(track, seed)`` against ``target`` and its gradient.

    No gradient is produced for f0.
    """
    if isinstance(target, AudioBuffer) and target.sample_rate_hz != config.sample_rate_hz:
        raise ValueError(
            f"target sample rate {target.sample_rate_hz} != vocoder rate {config.sample_rate_hz}"
        )
    require_valid(track, config)
    plan = plan_forward(track, config, seed)
    mag = np.exp(track.v)
    p257 = track.p @ extrapolation_matrix(config).T
    audio = render_periodic(plan, mag * p257, config) + render_aperiodic(plan, mag * (1.0 - p257), config)
    loss, g_audio = mw_stft_loss_and_audio_grad(target, audio, config)
    return loss, feature_grads_from_audio_grad(track, g_audio, config, seed, plan)


def _target_mags(target, length: int, config: VocoderConfig):
    ref = np.zeros(max(length, len(target)))
    ref[: len(target)] = target
    return [amp_log(np.abs(stft(ref, c, config.frame_shift)), config.gain_db)
            for c in config.loss_fft_sizes]


def _abs_residuals(track, ref_mags, config, seed) -> list[np.ndarray]:
    from ddsp_vocoder.synth import synthesize

    audio = synthesize(track, config, seed).samples
    out = []
    for c, ref in zip(config.loss_fft_sizes, ref_mags):
        frames = frame_signal(audio, c, config.frame_shift)
        n = ref.shape[0]
        if frames.shape[0] < n:
            frames = np.concatenate([frames, np.zeros((n - frames.shape[0], c))])
        pred = amp_log(np.abs(rfft(frames * hann_window(c), axis=-1)), config.gain_db)
        out.append((np.abs(pred - ref), np.sign(pred - ref)))
    return out


def _central_difference(track, target, t, field, k, eps, config, seed) -> tuple[float, int]:
    target = target.samples if isinstance(target, AudioBuffer) else np.asarray(target, dtype=np.float64)
    ref_mags = _target_mags(target, len(track) * config.frame_shift, config)
    p, v = np.array(track.p), np.array(track.v)
    arr = p if field == "p" else v
    x0 = arr[t, k]
    arr[t, k] = x0 + eps
    up = _abs_residuals(FeatureTrack(track.f0, p, v), ref_mags, config, seed)
    arr[t, k] = x0 - eps
    down = _abs_residuals(FeatureTrack(track.f0, p, v), ref_mags, config, seed)
    total = 0.0
    crossings = 0
    for weight, (a, sa), (b, sb) in zip(config.loss_weights_stft, up, down):
        total += weight * np.sum(a - b) / a.size
        crossings += int(np.count_nonzero(sa != sb))
    return total / (2 * eps), crossings


def central_difference(track, target, t: int, field: str, k: int, eps: float,
                       config: VocoderConfig = DEFAULT_CONFIG, seed: int = 0) -> float:
    """``(L(x + eps) - L(x - eps)) / (2 eps)`` for one coordinate of p or v.

    The two losses are differenced per spectrogram element before summing,
    which keeps cancellation error well below the truncation error.
    """
    return _central_difference(track, target, t, field, k, eps, config, seed)[0]


def finite_diff_check(track: FeatureTrack, target, config: VocoderConfig = DEFAULT_CONFIG,
                      seed: int = 0, eps: float = 1e-5, trials: int = 64, rng_seed: int = 0,
                      return_details: bool = False):
    """Max relative error between analytic and central-difference gradients.

    Samples ``trials`` random (frame, coordinate) pairs across p and v. For p,
    coordinates are perturbed inward if a step would leave [0, 1].

    A sample is degenerate when some spectrogram residual changes sign between
    x - eps and x + eps: the L1 kink then sits inside the stencil and the
    difference quotient is not a derivative estimate. Degenerate samples are
    reported in the details (last field True) and left out of the maximum.

    Meaningful for eps up to about 1e-2; larger steps are accepted but the
    truncation error then dominates.
    """
    if not (math.isfinite(eps) and eps > 0):
        raise ValueError("eps must be positive and finite")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _, grads = loss_and_grad(track, target, config, seed)
    rng = np.random.default_rng(rng_seed)
    n_p, n_v = config.periodicity_dims, config.spectrum_bins
    details = []
    worst = 0.0
    for _ in range(trials):
        t = int(rng.integers(len(track)))
        j = int(rng.integers(n_p + n_v))
        p, v = np.array(track.p), np.array(track.v)
        if j < n_p:
            field, k, arr, analytic = "p", j, p, grads.d_p[t, j]
        else:
            field, k, arr, analytic = "v", j - n_p, v, grads.d_v[t, j - n_p]
        x0 = arr[t, k]
        if field == "p" and not eps <= x0 <= 1.0 - eps:
            x0 = min(max(x0, eps), 1.0 - eps)
            arr[t, k] = x0
            _, moved = loss_and_grad(FeatureTrack(track.f0, p, v), target, config, seed)
            analytic = moved.d_p[t, k]
        numeric, crossings = _central_difference(
            FeatureTrack(track.f0, p, v), target, t, field, k, eps, config, seed
        )
        rel = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-12)
        degenerate = crossings > 0
        if not degenerate:
            worst = max(worst, rel)
        details.append((t, field, k, analytic, numeric, rel, degenerate))
    return (worst, details) if return_details else worst


def random_smooth_track(num_frames: int, rng: np.random.Generator,
                        config: VocoderConfig = DEFAULT_CONFIG, v_offset: float = -2.0) -> FeatureTrack:
    """Voiced track with p strictly inside (0, 1) and smooth |v| < 5, for gradient checks."""
    f0 = rng.uniform(90.0, 260.0, num_frames)
    p = rng.uniform(0.1, 0.9, (num_frames, config.periodicity_dims))
    k = np.linspace(0.0, 1.0, config.spectrum_bins)
    v = np.full((num_frames, config.spectrum_bins), v_offset)
    for harmonic in range(1, 5):
        amp = rng.normal(0.0, 0.6 / harmonic, (num_frames, 1))
        shift = rng.uniform(0, 2 * np.pi, (num_frames, 1))
        v += amp * np.cos(np.pi * harmonic * k[None, :] + shift)
    return FeatureTrack(f0, p, np.clip(v, -4.9, 4.9))


def gradcheck_problem(num_frames: int, seed: int, config: VocoderConfig = DEFAULT_CONFIG):
    """A random track, and a target rendered from a different random track and noise seed."""
    rng = np.random.default_rng(seed)
    track = random_smooth_track(num_frames, rng, config)
    other = random_smooth_track(num_frames, rng, config, v_offset=-3.0)
    from ddsp_vocoder.synth import synthesize

    target = synthesize(other, config, seed + 1)
    return track, target
