"""Differentiable source-filter vocoder: synthesis, losses, gradients, benchmarks."""

from ddsp_vocoder.core import (
    FeatureFrame,
    FeatureTrack,
    AudioBuffer,
    GradientTrack,
    TrackValidationError,
    Violation,
    VocoderConfig,
    validate_track,
)
from ddsp_vocoder.synth import synthesize
from ddsp_vocoder.loss import mw_stft_loss
from ddsp_vocoder.grad import loss_and_grad

__all__ = [
    "AudioBuffer",
    "FeatureFrame",
    "FeatureTrack",
    "GradientTrack",
    "TrackValidationError",
    "Violation",
    "VocoderConfig",
    "loss_and_grad",
    "mw_stft_loss",
    "synthesize",
    "validate_track",
]
