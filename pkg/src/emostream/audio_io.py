"""Audio input: WAV decoding, mono downmix, resampling, framing, chunk pacing.

Everything downstream analyses mono float signals in [-1, 1]. The canonical
analysis rate is 22050 Hz; callers resample on load via :func:`to_canonical`.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.signal import resample_poly

CANONICAL_RATE = 22050

WAV_FORMAT_NAMES = {
    0x0001: "PCM",
    0x0003: "IEEE float",
    0x0006: "A-law",
    0x0007: "mu-law",
    0xFFFE: "extensible",
}


class WavFormatError(ValueError):
    """Raised for unreadable or unsupported WAV input."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio signal: float64 samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if len(self.samples) and not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")
        if len(self.samples) and np.max(np.abs(self.samples)) > 1.0 + 1e-9:
            raise ValueError("samples exceed [-1, 1]")

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class FrameSpec:
    """Rectangular framing: frame_length and hop_length in samples."""

    frame_length: int
    hop_length: int

    def __post_init__(self):
        if self.frame_length <= 0 or self.hop_length <= 0:
            raise ValueError("frame_length and hop_length must be positive")
        if self.hop_length > self.frame_length:
            raise ValueError("hop_length must not exceed frame_length")

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.frame_length:
            return 0
        return (n_samples - self.frame_length) // self.hop_length + 1


def load_wav(path) -> AudioBuffer:
    """Decode a PCM WAV file (16/24-bit int or 32-bit float, mono or stereo).

    Stereo is downmixed by channel mean; integer samples are scaled to
    [-1, 1]. The header sample rate is preserved.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise WavFormatError(f"cannot read {path}: {exc}") from exc

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise WavFormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    fmt_name = WAV_FORMAT_NAMES.get(audio_format, f"format tag {audio_format}")
    if channels not in (1, 2):
        raise WavFormatError(f"{path}: unsupported channel count {channels}")

    if audio_format == 0x0001 and bits == 16:
        raw = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 0x0001 and bits == 24:
        usable = len(payload) // 3 * 3
        as_bytes = np.frombuffer(payload[:usable], dtype=np.uint8).reshape(-1, 3)
        # sign-extend 24-bit little-endian into int32
        raw = (
            as_bytes[:, 0].astype(np.int32)
            | (as_bytes[:, 1].astype(np.int32) << 8)
            | (as_bytes[:, 2].astype(np.int8).astype(np.int32) << 16)
        )
        samples = raw.astype(np.float64) / 8388608.0
    elif audio_format == 0x0003 and bits == 32:
        samples = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
        if len(samples) and not np.all(np.isfinite(samples)):
            raise WavFormatError(f"{path}: float data contains non-finite samples")
        samples = np.clip(samples, -1.0, 1.0)
    else:
        raise WavFormatError(f"{path}: unsupported encoding ({fmt_name}, {bits}-bit)")

    if channels == 2:
        usable = len(samples) // 2 * 2
        samples = samples[:usable].reshape(-1, 2).mean(axis=1)

    return AudioBuffer(samples=samples, sample_rate=int(sample_rate))


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited polyphase resampling; identity when rates already match."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == buf.sample_rate:
        return buf
    g = np.gcd(buf.sample_rate, target_rate)
    out = resample_poly(buf.samples, target_rate // g, buf.sample_rate // g)
    # polyphase filtering can overshoot slightly on full-scale content
    out = np.clip(out, -1.0, 1.0)
    return AudioBuffer(samples=out, sample_rate=target_rate)


def to_canonical(buf: AudioBuffer) -> AudioBuffer:
    """Resample to the canonical analysis rate (22050 Hz)."""
    return resample(buf, CANONICAL_RATE)


def frames(buf: AudioBuffer, spec: FrameSpec) -> np.ndarray:
    """View the signal as consecutive frames, shape (N, frame_length).

    Frame k starts at sample k * hop_length; a trailing partial frame is
    dropped, never zero-padded.
    """
    n = spec.frame_count(len(buf.samples))
    if n == 0:
        return np.empty((0, spec.frame_length))
    strided = np.lib.stride_tricks.sliding_window_view(buf.samples, spec.frame_length)
    return strided[:: spec.hop_length][:n]


def paced_source(
    buf: AudioBuffer, chunk: int, realtime: bool = True
) -> Iterator[tuple[np.ndarray, float]]:
    """Yield (samples, end_time_s) chunks, optionally paced to wall time.

    Timestamps come from the sample clock. In realtime mode each chunk is
    released no earlier than its end time relative to the stream start; the
    final partial chunk is emitted as-is. Single consumer per source.
    """
    if chunk <= 0:
        raise ValueError(f"chunk must be positive, got {chunk}")
    start = time.monotonic()
    for begin in range(0, len(buf.samples), chunk):
        part = buf.samples[begin : begin + chunk]
        t_end = (begin + len(part)) / buf.sample_rate
        if realtime:
            delay = start + t_end - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        yield part, t_end
