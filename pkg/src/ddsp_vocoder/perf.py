"""FLOP accounting for the synthesis path and a real-time-factor benchmark."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ddsp_vocoder.core import DEFAULT_CONFIG, FeatureTrack, VocoderConfig
from ddsp_vocoder.synth import synthesize

CONVENTIONS = (
    "fft: 5*N*log2(N) flops per N-point real FFT or inverse FFT",
    "complex multiply: 6 flops per bin",
    "real multiply or add: 1 flop; multiply-add: 2 flops (1 MAC = 2 flops)",
    "exp(v): exp_flops_per_bin flops per bin",
    "impulses per frame: reference_f0_hz * frame_shift / sample_rate_hz",
    "periodicity interpolation: 2 multiplies + 1 add per bin",
)


def fft_flops(n: int) -> float:
    return 5.0 * n * math.log2(n)


@dataclass(frozen=True)
class FlopsReport:
    stages: dict = field(default_factory=dict)  # flops per frame
    frames_per_second: float = 187.5
    conventions: tuple[str, ...] = CONVENTIONS

    @property
    def flops_per_frame(self) -> float:
        return float(sum(self.stages.values()))

    @property
    def mflops_total(self) -> float:
        """MFLOPS needed per second of audio."""
        return self.flops_per_frame * self.frames_per_second / 1e6

    def as_pairs(self) -> list[tuple[str, object]]:
        pairs = [(f"stage_{k}", v) for k, v in self.stages.items()]
        pairs += [
            ("flops_per_frame", self.flops_per_frame),
            ("frames_per_second", self.frames_per_second),
            ("mflops_total", round(self.mflops_total, 4)),
        ]
        pairs += [(f"convention_{i}", c) for i, c in enumerate(self.conventions)]
        return pairs


def count_flops(config: VocoderConfig = DEFAULT_CONFIG) -> FlopsReport:
    N = config.fft_size
    bins = config.spectrum_bins
    impulses = config.reference_f0_hz * config.frame_shift / config.sample_rate_hz
    stages = {
        "periodic_ifft": fft_flops(N),
        "noise_fft": fft_flops(N),
        "noise_ifft": fft_flops(N),
        "exp_v": config.exp_flops_per_bin * bins,
        "extrapolation": 3.0 * bins,
        # e^v*p, 1/sqrt(f0) and sign, 1-p, e^v*(1-p): 4 real ops per bin;
        # noise spectrum times aperiodic filter: one complex multiply per bin
        "spectral_multiplies": 4.0 * bins + 6.0 * bins,
        "noise_generation": 2.0 * config.frame_shift,
        "window": float(config.noise_window_size),
        "overlap_add": impulses * N + config.noise_window_size,
    }
    return FlopsReport(stages, config.frames_per_second)


def rtf_lower_bound(report: FlopsReport, machine_gflops: float) -> float:
    """RTF implied by the FLOP count on a machine sustaining ``machine_gflops``."""
    return report.mflops_total * 1e6 / (machine_gflops * 1e9)


@dataclass(frozen=True)
class RtfStats:
    times_s: tuple[float, ...]
    audio_seconds: float

    @property
    def rtfs(self) -> np.ndarray:
        return np.asarray(self.times_s) / self.audio_seconds

    @property
    def median(self) -> float:
        return float(np.median(self.rtfs))

    @property
    def p95(self) -> float:
        return float(np.percentile(self.rtfs, 95))

    def as_pairs(self) -> list[tuple[str, object]]:
        return [
            ("audio_seconds", self.audio_seconds),
            ("repeats", len(self.times_s)),
            ("rtf_median", round(self.median, 6)),
            ("rtf_p95", round(self.p95, 6)),
        ]


def bench_rtf(track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG, seed: int = 0,
              repeats: int = 5, warmup: int = 2) -> RtfStats:
    """Time ``synthesize`` single-threaded; warm-up runs are discarded."""
    audio_seconds = len(track) * config.frame_shift / config.sample_rate_hz
    if audio_seconds < 1.0:
        raise ValueError("benchmark track must cover at least one second of audio")
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    times = []
    with threadpool_limits(limits=1):
        for _ in range(warmup):
            synthesize(track, config, seed)
        for _ in range(repeats):
            start = time.perf_counter()
            synthesize(track, config, seed)
            times.append(time.perf_counter() - start)
    return RtfStats(tuple(times), audio_seconds)


def benchmark_track(seconds: float, config: VocoderConfig = DEFAULT_CONFIG, seed: int = 0) -> FeatureTrack:
    """Speech-like synthetic features: gliding f0, unvoiced stretches, a moving formant."""
    n = config.num_frames(int(round(seconds * config.sample_rate_hz)))
    rng = np.random.default_rng(seed)
    t = np.arange(n) / config.frames_per_second
    f0 = 140.0 + 40.0 * np.sin(2 * np.pi * 0.7 * t)
    f0[(np.sin(2 * np.pi * 0.45 * t) > 0.8)] = 0.0
    k = np.arange(config.spectrum_bins)
    centre = 30 + 15 * np.sin(2 * np.pi * 0.3 * t)
    v = -4.0 + 2.5 * np.exp(-0.5 * ((k[None, :] - centre[:, None]) / 6.0) ** 2) - 1.5 * k / k[-1]
    p = np.clip(np.linspace(0.95, 0.2, config.periodicity_dims)[None, :]
                + 0.05 * rng.standard_normal((n, config.periodicity_dims)), 0.0, 1.0)
    p[f0 == 0] = 0.0
    return FeatureTrack(f0, p, v)
