"""Feature files, 16-bit PCM WAV and plain-text f0 tracks.

Feature file layout, all little-endian::

    b"DDSPFEAT"                      8 bytes
    version, frames, p dims, v dims,  6 x u32
    sample rate, frame shift
    frames x (f0, p[12], v[257])     float32
"""

from __future__ import annotations

import struct
import wave
from pathlib import Path

import numpy as np

from ddsp_vocoder.core import DEFAULT_CONFIG, AudioBuffer, FeatureTrack, VocoderConfig

MAGIC = b"DDSPFEAT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8s6I")


class FormatError(ValueError):
    """A file does not match the expected format."""


def encode_features(track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG) -> bytes:
    n = len(track)
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, n, track.p.shape[1], track.v.shape[1],
        config.sample_rate_hz, config.frame_shift,
    )
    body = np.concatenate([track.f0[:, None], track.p, track.v], axis=1).astype("<f4")
    return header + body.tobytes()


def decode_features(data: bytes) -> tuple[FeatureTrack, dict]:
    """Parse a feature file; returns the track and the header fields."""
    if len(data) < _HEADER.size:
        raise FormatError("feature file shorter than its header")
    magic, version, n, p_dims, v_dims, sr, shift = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported feature file version {version}")
    width = 1 + p_dims + v_dims
    expected = _HEADER.size + n * width * 4
    if len(data) != expected:
        raise FormatError(f"feature file has {len(data)} bytes, header implies {expected}")
    body = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n, width).astype(np.float64)
    track = FeatureTrack(body[:, 0], body[:, 1 : 1 + p_dims], body[:, 1 + p_dims :])
    meta = {"version": version, "frames": n, "p_dims": p_dims, "v_dims": v_dims,
            "sample_rate_hz": sr, "frame_shift": shift}
    return track, meta


def write_features(path, track: FeatureTrack, config: VocoderConfig = DEFAULT_CONFIG) -> None:
    Path(path).write_bytes(encode_features(track, config))


def read_features(path) -> tuple[FeatureTrack, dict]:
    return decode_features(Path(path).read_bytes())


def quantize_pcm16(samples) -> np.ndarray:
    """Clip to [-1, 1], scale by 32767 and round half away from zero."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0) * 32767.0
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype("<i2")


def write_wav(path, audio: AudioBuffer) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate_hz)
        w.writeframes(quantize_pcm16(audio.samples).tobytes())


def read_wav(path) -> AudioBuffer:
    """Read 16-bit PCM mono WAV into floats in [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1 or w.getsampwidth() != 2:
                raise FormatError("expected 16-bit mono PCM")
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"not a readable WAV file: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    return AudioBuffer(samples, rate)


def read_f0_text(path) -> np.ndarray:
    """One f0 value in Hz per line; blank lines ignored."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise FormatError(f"line {lineno}: not a number: {line!r}") from exc
    return np.array(values, dtype=np.float64)


def write_f0_text(path, f0) -> None:
    Path(path).write_text("".join(f"{float(x)!r}\n" for x in f0))


def write_loss_history(path, history) -> None:
    Path(path).write_text("".join(f"{i} {loss!r}\n" for i, loss in enumerate(history)))
