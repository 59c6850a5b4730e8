"""FFT/STFT primitives, the Hann window and the amplified log."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ddsp_vocoder.core import DEFAULT_CONFIG, AudioBuffer, VocoderConfig

# Real FFT primitives. numpy's pocketfft is exact to rounding for every size
# used here, batches over leading axes and runs single-threaded.
rfft = np.fft.rfft
irfft = np.fft.irfft


def hann_window(size: int) -> np.ndarray:
    """Periodic Hann window, ``0.5 * (1 - cos(2 pi n / size))``.

    Halves overlap-add to exactly one: ``w[n] + w[n + size//2] == 1``.
    """
    if size < 2 or size % 2:
        raise ValueError(f"hann_window needs an even size >= 2, got {size}")
    n = np.arange(size)
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)
    # pin the COLA partner to the complement so the pair sums to 1 bit-exactly
    half = size // 2
    w[half:] = 1.0 - w[:half]
    return w


def amp_gain(gain_db: float) -> float:
    return 10.0 ** (gain_db / 20.0)


def amp_log(y, gain_db: float = 72.0):
    """Amplify by ``gain_db`` then take ``ln`` above e, stay linear (scaled by 1/e) below.

    Works on scalars and arrays; maps 0 to 0 and is continuous (C1) at the branch.
    """
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("amp_log is defined for y >= 0 only")
    z = y * amp_gain(gain_db)
    out = np.where(z >= math.e, np.log(np.maximum(z, math.e)), z / math.e)
    return out.item() if out.ndim == 0 else out


def amp_log_derivative(y, gain_db: float = 72.0):
    """d amp_log / dy; ``1/y`` on the log branch, ``gain/e`` on the linear branch."""
    y = np.asarray(y, dtype=np.float64)
    g = amp_gain(gain_db)
    z = y * g
    lin = g / math.e
    out = np.where(z >= math.e, 1.0 / np.maximum(y, math.e / g), lin)
    return out.item() if out.ndim == 0 else out


def num_stft_frames(num_samples: int, hop: int) -> int:
    return -(-num_samples // hop)


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """(ceil(len/hop), frame_len) view of ``x``; frame t starts at t*hop, zero-padded past the end."""
    n_frames = num_stft_frames(len(x), hop)
    if n_frames == 0:
        return np.zeros((0, frame_len))
    padded = np.zeros((n_frames - 1) * hop + frame_len)
    padded[: len(x)] = x
    return sliding_window_view(padded, frame_len)[::hop]


def overlap_add(frames: np.ndarray, hop: int, length: int | None = None) -> np.ndarray:
    """Sum frame t into ``out[t*hop : t*hop + frame_len]``; adjoint of :func:`frame_signal`.

    Accumulates in a fixed order, so results are bit-reproducible.
    """
    n_frames, frame_len = frames.shape
    total = (n_frames - 1) * hop + frame_len if n_frames else 0
    if frame_len % hop == 0 and n_frames:
        blocks = frame_len // hop
        out = np.zeros((n_frames + blocks - 1, hop))
        for j in range(blocks):
            out[j : j + n_frames] += frames[:, j * hop : (j + 1) * hop]
        out = out.reshape(-1)
    else:
        out = np.zeros(total)
        for t in range(n_frames):
            out[t * hop : t * hop + frame_len] += frames[t]
    if length is None:
        return out
    if length <= out.shape[0]:
        return out[:length]
    return np.concatenate([out, np.zeros(length - out.shape[0])])


def stft(samples: np.ndarray, fft_size: int, hop: int = 128) -> np.ndarray:
    """Complex STFT with a periodic Hann window the size of the FFT."""
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    if hop <= 0:
        raise ValueError("hop must be positive")
    frames = frame_signal(np.asarray(samples, dtype=np.float64), fft_size, hop)
    return rfft(frames * hann_window(fft_size), axis=-1)


def stft_log_mag(audio, fft_size: int, hop: int = 128, gain_db: float = 72.0) -> np.ndarray:
    """``amp_log(|STFT|)``, shape (ceil(len/hop), fft_size/2 + 1)."""
    samples = audio.samples if isinstance(audio, AudioBuffer) else audio
    return amp_log(np.abs(stft(samples, fft_size, hop)), gain_db)


@dataclass(frozen=True, eq=False)
class SpectrogramSet:
    fft_sizes: tuple[int, ...]
    mags: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.mags)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.mags[i]


def spectrogram_set(audio, config: VocoderConfig = DEFAULT_CONFIG) -> SpectrogramSet:
    mags = tuple(
        stft_log_mag(audio, c, config.frame_shift, config.gain_db) for c in config.loss_fft_sizes
    )
    return SpectrogramSet(config.loss_fft_sizes, mags)
