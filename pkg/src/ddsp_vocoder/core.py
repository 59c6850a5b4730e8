"""Domain types and configuration shared by every vocoder module."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VocoderConfig:
    sample_rate_hz: int = 24000
    frame_shift: int = 128
    fft_size: int = 512
    spectrum_bins: int = 257
    noise_window_size: int = 256
    periodic_buffer_len: int = 640
    loss_fft_sizes: tuple[int, ...] = (512, 1024, 2048)
    loss_weights_stft: tuple[float, ...] = (25.7, 51.3, 102.5)
    gain_db: float = 72.0
    lambda_f0: float = 50.0
    lambda_p: float = 30.0
    lambda_adv: float = 50.0
    periodicity_dims: int = 12
    # FLOP counting knobs, see perf.count_flops
    exp_flops_per_bin: float = 1.0
    reference_f0_hz: float = 200.0

    def __post_init__(self):
        object.__setattr__(self, "loss_fft_sizes", tuple(int(c) for c in self.loss_fft_sizes))
        object.__setattr__(self, "loss_weights_stft", tuple(float(w) for w in self.loss_weights_stft))
        errors = self.check()
        if errors:
            raise ValueError("invalid VocoderConfig: " + "; ".join(errors))

    def check(self) -> list[str]:
        errors = []
        if self.spectrum_bins != self.fft_size // 2 + 1 or self.fft_size % 2:
            errors.append("spectrum_bins must equal fft_size/2 + 1")
        if self.frame_shift <= 0 or self.fft_size % self.frame_shift:
            errors.append("frame_shift must divide fft_size")
        if self.periodic_buffer_len != self.fft_size + self.frame_shift:
            errors.append("periodic_buffer_len must equal fft_size + frame_shift")
        if self.noise_window_size % 2 or not 2 <= self.noise_window_size <= self.fft_size:
            errors.append("noise_window_size must be even and within [2, fft_size]")
        if len(self.loss_fft_sizes) != len(self.loss_weights_stft):
            errors.append("loss_fft_sizes and loss_weights_stft differ in length")
        for c in self.loss_fft_sizes:
            if c < 2 or c & (c - 1):
                errors.append(f"loss FFT size {c} is not a power of two")
        weights = (*self.loss_weights_stft, self.lambda_f0, self.lambda_p, self.lambda_adv)
        if any(not w > 0 for w in weights):
            errors.append("all loss weights must be strictly positive")
        if self.periodicity_dims < 1:
            errors.append("periodicity_dims must be positive")
        return errors

    @property
    def gain(self) -> float:
        """Amplitude gain corresponding to ``gain_db``."""
        return 10.0 ** (self.gain_db / 20.0)

    @property
    def frames_per_second(self) -> float:
        return self.sample_rate_hz / self.frame_shift

    @property
    def feature_dims(self) -> int:
        return 1 + self.periodicity_dims + self.spectrum_bins

    def num_frames(self, num_samples: int) -> int:
        return math.ceil(num_samples / self.frame_shift)


DEFAULT_CONFIG = VocoderConfig()


@dataclass(frozen=True)
class FeatureFrame:
    """One frame of vocoder input.

    ``f0`` is in Hz with 0 meaning unvoiced, ``p`` is the band-wise
    periodicity in [0, 1] and ``v`` the natural-log filter magnitude per
    linear frequency bin.
    """

    f0: float
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f0", float(self.f0))
        object.__setattr__(self, "p", _frozen(self.p))
        object.__setattr__(self, "v", _frozen(self.v))


@dataclass(frozen=True, eq=False)
class FeatureTrack:
    """A sequence of frames stored as arrays: f0 (T,), p (T, 12), v (T, 257)."""

    f0: np.ndarray
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=np.float64).reshape(-1)
        p = np.asarray(self.p, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        n = f0.shape[0]
        if p.size == 0 and n == 0:
            p = p.reshape(0, p.shape[-1] if p.ndim == 2 else DEFAULT_CONFIG.periodicity_dims)
        if v.size == 0 and n == 0:
            v = v.reshape(0, v.shape[-1] if v.ndim == 2 else DEFAULT_CONFIG.spectrum_bins)
        if p.ndim != 2 or v.ndim != 2 or p.shape[0] != n or v.shape[0] != n:
            raise ValueError(
                f"inconsistent track shapes: f0 {f0.shape}, p {p.shape}, v {v.shape}"
            )
        object.__setattr__(self, "f0", _frozen(f0))
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "v", _frozen(v))

    def __len__(self) -> int:
        return self.f0.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureTrack):
            return NotImplemented
        return (
            np.array_equal(self.f0, other.f0)
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.v, other.v)
        )

    __hash__ = None

    def frame(self, i: int) -> FeatureFrame:
        return FeatureFrame(self.f0[i], self.p[i], self.v[i])

    def __iter__(self):
        return (self.frame(i) for i in range(len(self)))

    @classmethod
    def from_frames(cls, frames: Sequence[FeatureFrame], config: VocoderConfig = DEFAULT_CONFIG):
        if not frames:
            return cls.empty(config)
        return cls(
            np.array([fr.f0 for fr in frames]),
            np.stack([fr.p for fr in frames]),
            np.stack([fr.v for fr in frames]),
        )

    @classmethod
    def empty(cls, config: VocoderConfig = DEFAULT_CONFIG):
        return cls(
            np.zeros(0),
            np.zeros((0, config.periodicity_dims)),
            np.zeros((0, config.spectrum_bins)),
        )

    @classmethod
    def constant(cls, num_frames: int, f0: float, p: float | np.ndarray, v: float | np.ndarray,
                 config: VocoderConfig = DEFAULT_CONFIG):
        """Track repeating the same features in every frame."""
        f0s = np.full(num_frames, float(f0))
        ps = np.broadcast_to(np.asarray(p, dtype=np.float64), (num_frames, config.periodicity_dims))
        vs = np.broadcast_to(np.asarray(v, dtype=np.float64), (num_frames, config.spectrum_bins))
        return cls(f0s, ps, vs)

    def replace(self, **changes) -> "FeatureTrack":
        fields = {"f0": self.f0, "p": self.p, "v": self.v}
        fields.update(changes)
        return FeatureTrack(**fields)


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int = 24000

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(np.asarray(self.samples).reshape(-1)))
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class GradientTrack:
    """Per-frame partial derivatives of a scalar loss w.r.t. p (T, 12) and v (T, 257)."""

    d_p: np.ndarray
    d_v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d_p", _frozen(self.d_p))
        object.__setattr__(self, "d_v", _frozen(self.d_v))
        if self.d_p.shape[0] != self.d_v.shape[0]:
            raise ValueError("d_p and d_v frame counts differ")

    def __len__(self) -> int:
        return self.d_p.shape[0]


class Violation(NamedTuple):
    index: int
    field: str
    reason: str


class TrackValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        shown = ", ".join(f"frame {v.index}: {v.field} {v.reason}" for v in self.violations[:10])
        more = "" if len(self.violations) <= 10 else f" (+{len(self.violations) - 10} more)"
        super().__init__(f"invalid feature track: {shown}{more}")


def validate_track(track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG) -> list[Violation]:
    """Return every invariant violation as (frame index, field, reason)."""
    out: list[Violation] = []
    if track.p.shape[1] != config.periodicity_dims:
        out.append(Violation(-1, "p", f"dimension {track.p.shape[1]} != {config.periodicity_dims}"))
    if track.v.shape[1] != config.spectrum_bins:
        out.append(Violation(-1, "v", f"dimension {track.v.shape[1]} != {config.spectrum_bins}"))
    if out:
        return out
    nyquist = config.sample_rate_hz / 2
    f0 = track.f0
    p_finite = np.all(np.isfinite(track.p), axis=1)
    with np.errstate(invalid="ignore"):
        checks = [
            ("f0", "non-finite", ~np.isfinite(f0)),
            ("f0", "negative", f0 < 0),
            ("f0", "nyquist", f0 >= nyquist),
            ("p", "non-finite", ~p_finite),
            ("p", "out-of-range", p_finite & np.any((track.p < 0) | (track.p > 1), axis=1)),
            ("v", "non-finite", ~np.all(np.isfinite(track.v), axis=1)),
        ]
    for name, reason, mask in checks:
        out.extend(Violation(int(i), name, reason) for i in np.flatnonzero(mask))
    out.sort(key=lambda viol: viol.index)
    return out


def require_valid(track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG) -> None:
    violations = validate_track(track, config)
    if violations:
        raise TrackValidationError(violations)
