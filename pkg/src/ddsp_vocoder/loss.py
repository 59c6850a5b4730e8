"""Training objectives: reference MSE, multi-window STFT loss, LSGAN arithmetic."""

from __future__ import annotations

import math

import numpy as np

from ddsp_vocoder.core import DEFAULT_CONFIG, AudioBuffer, VocoderConfig
from ddsp_vocoder.spectral import stft_log_mag

NUM_BANDS = 8
BAND_STRIDE = 32
BAND_OVERLAP = 8


def refmse_loss(f0_pred, f0_ref, p_pred, p_ref, config: VocoderConfig = DEFAULT_CONFIG) -> float:
    """``lambda_f0 * mean((f0 - f0~)^2) + lambda_p / d_p * mean_t sum_j (p - p~)^2``."""
    f0_pred = np.asarray(f0_pred, dtype=np.float64)
    f0_ref = np.asarray(f0_ref, dtype=np.float64)
    p_pred = np.asarray(p_pred, dtype=np.float64)
    p_ref = np.asarray(p_ref, dtype=np.float64)
    if f0_pred.shape != f0_ref.shape or p_pred.shape != p_ref.shape:
        raise ValueError("prediction and reference shapes differ")
    if p_pred.ndim != 2 or p_pred.shape[0] != f0_pred.shape[0]:
        raise ValueError("f0 and p frame counts differ")
    if f0_pred.size == 0:
        return 0.0
    loss_f0 = config.lambda_f0 * np.mean((f0_ref - f0_pred) ** 2)
    loss_p = config.lambda_p / config.periodicity_dims * np.mean(np.sum((p_ref - p_pred) ** 2, axis=1))
    return float(loss_f0 + loss_p)


def _samples(x) -> np.ndarray:
    return x.samples if isinstance(x, AudioBuffer) else np.asarray(x, dtype=np.float64)


def pad_pair(x_ref, x_pred) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad the shorter signal to the longer one's length."""
    a, b = _samples(x_ref), _samples(x_pred)
    n = max(len(a), len(b))
    if len(a) < n:
        a = np.concatenate([a, np.zeros(n - len(a))])
    if len(b) < n:
        b = np.concatenate([b, np.zeros(n - len(b))])
    return a, b


def mw_stft_loss(x_ref, x_pred, config: VocoderConfig = DEFAULT_CONFIG) -> float:
    """Weighted sum over FFT sizes of the mean absolute log-spectrogram difference."""
    a, b = pad_pair(x_ref, x_pred)
    if len(a) == 0:
        return 0.0
    total = 0.0
    for c, weight in zip(config.loss_fft_sizes, config.loss_weights_stft):
        xa = stft_log_mag(a, c, config.frame_shift, config.gain_db)
        xb = stft_log_mag(b, c, config.frame_shift, config.gain_db)
        total += weight * np.abs(xa - xb).sum() / xa.size
    return float(total)


def band_ranges(num_bins: int = 257) -> list[tuple[int, int]]:
    """Half-open bin ranges of the 8 discriminator bands.

    Band k is a 32-bin core ``[32k, 32k + 32)`` widened by 8 bins on each
    side and clipped to the spectrum: interior bands are 48 wide, the first is
    40 wide and the last also takes the Nyquist bin (41 wide). Neighbouring
    bands therefore share 16 bins.
    """
    out = []
    for k in range(NUM_BANDS):
        lo = max(0, BAND_STRIDE * k - BAND_OVERLAP)
        hi = BAND_STRIDE * k + BAND_STRIDE + BAND_OVERLAP
        if k == NUM_BANDS - 1:
            hi = num_bins
        out.append((lo, min(num_bins, hi)))
    return out


def band_split(spec, num_bins: int = 257) -> list[np.ndarray]:
    """Slice the last axis of a (frames, 257) or (257,) spectrogram into the 8 bands."""
    spec = np.asarray(spec)
    if spec.shape[-1] != num_bins:
        raise ValueError(f"expected {num_bins} bins on the last axis, got {spec.shape[-1]}")
    return [spec[..., lo:hi] for lo, hi in band_ranges(num_bins)]


def lsgan_losses(scores_real, scores_fake, lambda_adv: float = 50.0) -> tuple[float, float]:
    """Least-squares GAN losses for one discriminator's patch scores.

    Returns ``(d_loss, g_loss)``; each mean is over that discriminator's
    patch count.
    """
    real = np.asarray(scores_real, dtype=np.float64)
    fake = np.asarray(scores_fake, dtype=np.float64)
    if real.size == 0 or fake.size == 0:
        raise ValueError("score arrays must be non-empty")
    d_loss = np.mean((real - 1.0) ** 2) + np.mean(fake**2)
    g_loss = lambda_adv * np.mean((fake - 1.0) ** 2)
    return float(d_loss), float(g_loss)


def multiband_lsgan_losses(real_per_band, fake_per_band, lambda_adv: float = 50.0) -> tuple[float, float]:
    """Sum of :func:`lsgan_losses` over the band discriminators."""
    if len(real_per_band) != len(fake_per_band):
        raise ValueError("band counts differ")
    d_total = g_total = 0.0
    for real, fake in zip(real_per_band, fake_per_band):
        d, g = lsgan_losses(real, fake, lambda_adv)
        d_total += d
        g_total += g
    return d_total, g_total


def generator_loss(refmse: float, mw_stft: float, adv: float = 0.0) -> float:
    """Total generator objective; ``adv = 0`` is the pretraining objective."""
    terms = (refmse, mw_stft, adv)
    if not all(math.isfinite(t) for t in terms):
        raise ValueError("loss terms must be finite")
    return float(refmse + mw_stft + adv)
