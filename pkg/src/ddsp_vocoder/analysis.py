"""Analysis-by-synthesis: fit periodicity and filter tracks to target audio.

Given the target and its f0 track, p and v are optimized directly with Adam
on the multi-window STFT loss, using the gradients from :mod:`ddsp_vocoder.grad`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ddsp_vocoder.core import DEFAULT_CONFIG, AudioBuffer, FeatureTrack, VocoderConfig
from ddsp_vocoder.grad import loss_and_grad

log = logging.getLogger(__name__)

INIT_P = 0.5
INIT_V = -2.0


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 1e-6
    grad_clip_norm: float = 1.0
    max_iters: int = 2000
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


def clip_by_global_norm(grads, max_norm: float):
    """Scale all gradients together so their joint L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(np.sum(np.square(g)) for g in grads)))
    if max_norm > 0 and total > max_norm:
        return [g * (max_norm / total) for g in grads], total
    return list(grads), total


def adam_step(params, grads, moment1, moment2, step_index: int, opt: OptimizerConfig = OptimizerConfig()):
    """One AdamW update over a list of arrays.

    Gradients are clipped by global norm first, weight decay is decoupled
    (applied to the parameters, not the gradient). Returns new lists
    ``(params, moment1, moment2)``; inputs are not modified.
    """
    if step_index < 1:
        raise ValueError("step_index starts at 1")
    if not (len(params) == len(grads) == len(moment1) == len(moment2)):
        raise ValueError("params, grads and moments must have the same length")
    for p, g, m, v in zip(params, grads, moment1, moment2):
        if not (np.shape(p) == np.shape(g) == np.shape(m) == np.shape(v)):
            raise ValueError(f"shape mismatch: {np.shape(p)}, {np.shape(g)}, {np.shape(m)}, {np.shape(v)}")
    grads, _ = clip_by_global_norm(grads, opt.grad_clip_norm)
    b1, b2 = opt.beta1, opt.beta2
    bias1 = 1.0 - b1**step_index
    bias2 = 1.0 - b2**step_index
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, moment1, moment2):
        m = b1 * np.asarray(m) + (1.0 - b1) * g
        v = b2 * np.asarray(v) + (1.0 - b2) * np.square(g)
        p = np.asarray(p, dtype=np.float64) * (1.0 - opt.learning_rate * opt.weight_decay)
        p = p - opt.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + opt.epsilon)
        new_p.append(p)
        new_m.append(m)
        new_v.append(v)
    return new_p, new_m, new_v


def initial_track(f0_track, config: VocoderConfig = DEFAULT_CONFIG) -> FeatureTrack:
    n = len(f0_track)
    return FeatureTrack.constant(n, 0.0, INIT_P, INIT_V, config).replace(f0=np.asarray(f0_track, dtype=np.float64))


def estimate_features(target: AudioBuffer, f0_track, config: VocoderConfig = DEFAULT_CONFIG,
                      opt: OptimizerConfig = OptimizerConfig(), seed: int = 0,
                      callback=None) -> tuple[FeatureTrack, list[float]]:
    """Recover p and v for ``target`` with f0 given.

    Runs ``opt.max_iters`` Adam steps from p = 0.5, v = -2, projecting p back
    onto [0, 1] after every step. Returns the lowest-loss iterate and the loss
    of every evaluated iterate (``max_iters + 1`` entries, the first at the
    initialization).
    """
    samples = target.samples if isinstance(target, AudioBuffer) else np.asarray(target, dtype=np.float64)
    f0_track = np.asarray(f0_track, dtype=np.float64).reshape(-1)
    expected = config.num_frames(len(samples))
    if len(f0_track) != expected:
        raise ValueError(f"f0 track has {len(f0_track)} frames, audio needs {expected}")

    track = initial_track(f0_track, config)
    params = [np.array(track.p), np.array(track.v)]
    m1 = [np.zeros_like(x) for x in params]
    m2 = [np.zeros_like(x) for x in params]
    history: list[float] = []
    best_loss, best = np.inf, track

    for it in range(opt.max_iters + 1):
        track = FeatureTrack(f0_track, params[0], params[1])
        loss, grads = loss_and_grad(track, samples, config, seed)
        history.append(loss)
        if loss < best_loss:
            best_loss, best = loss, track
        if callback is not None:
            callback(it, loss, track)
        if it == opt.max_iters:
            break
        params, m1, m2 = adam_step(params, [grads.d_p, grads.d_v], m1, m2, it + 1, opt)
        np.clip(params[0], 0.0, 1.0, out=params[0])
        if it % 100 == 0:
            log.debug("iter %d loss %.6f", it, loss)
    return best, history
