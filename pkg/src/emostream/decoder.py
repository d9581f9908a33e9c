"""Windowed emotion decoding over audio, plus trace smoothing and word lookup.

Dynamic mode slides a 5 s window at 1 s hops and emits one prediction per
window end; static mode reduces a whole clip to a single point via the 15 s
window rule (loop short clips, average 5 s-hopped windows over long ones).
Every window is analyzed from its own sample slice only, so decoding is
causal: samples at or after a point's timestamp cannot influence it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

import numpy as np

from .audio_io import CANONICAL_RATE, AudioBuffer, to_canonical
from .dsp import default_rms_spec, detect_onsets, mean_rms, onset_density, rms_trace
from .midlevel import MidLevelProvider, provider_window_features
from .regression import EmotionModel, EmotionPoint, FeatureVector, predict


@dataclass(frozen=True)
class WindowSpec:
    window_length: float = 5.0
    hop_length: float = 1.0

    def __post_init__(self):
        if self.window_length <= 0 or self.hop_length <= 0:
            raise ValueError("window_length and hop_length must be positive")
        if self.hop_length > self.window_length:
            raise ValueError("hop_length must not exceed window_length")


DYNAMIC_WINDOW = WindowSpec(5.0, 1.0)
STATIC_WINDOW = WindowSpec(15.0, 5.0)


@dataclass(frozen=True)
class SmoothingSpec:
    render_rate: float = 30.0
    half_life: float = 0.35

    def __post_init__(self):
        if self.render_rate <= 0:
            raise ValueError("render_rate must be positive")
        if self.half_life <= 0:
            raise ValueError("half_life must be positive")


@dataclass(frozen=True)
class EmotionTrace:
    points: tuple
    source_id: str = "audio"
    smoothed: bool = False

    def __post_init__(self):
        points = tuple(self.points)
        times = [p.t for p in points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trace timestamps must be strictly increasing")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.points)


def window_feature_vector(
    window: np.ndarray,
    rate: int,
    provider: MidLevelProvider,
    t_start: float,
    t_end: float,
) -> FeatureVector:
    """Features for one analysis window: provider mid-levels for the global
    time span, onset density and mean RMS measured on the window's samples."""
    buf = AudioBuffer(samples=window, sample_rate=rate)
    length = len(window) / rate
    trace = rms_trace(buf, default_rms_spec())
    rms = mean_rms(trace, 0.0, length)
    onsets = detect_onsets(buf)
    density = onset_density(onsets, 0.0, length)
    midlevel = provider.window_features(t_start, t_end)
    return FeatureVector.from_parts(midlevel, density, rms)


class _GrowBuffer:
    """Append-only sample accumulator with amortized growth, so streamed
    chunks end up bit-identical to slices of one contiguous array."""

    def __init__(self):
        self._data = np.empty(1 << 16, dtype=np.float64)
        self._n = 0

    def append(self, chunk: np.ndarray) -> None:
        chunk = np.asarray(chunk, dtype=np.float64)
        need = self._n + len(chunk)
        if need > len(self._data):
            capacity = len(self._data)
            while capacity < need:
                capacity *= 2
            grown = np.empty(capacity, dtype=np.float64)
            grown[: self._n] = self._data[: self._n]
            self._data = grown
        self._data[self._n : need] = chunk
        self._n = need

    def __len__(self) -> int:
        return self._n

    def view(self, start: int, end: int) -> np.ndarray:
        return self._data[start:end]


AudioSource = Union[AudioBuffer, Iterable]


def iter_dynamic_decode(
    audio: AudioSource,
    model: EmotionModel,
    provider: MidLevelProvider,
    spec: WindowSpec = DYNAMIC_WINDOW,
    rate: int = CANONICAL_RATE,
) -> Iterator[EmotionPoint]:
    """Yield one point per completed window, at t = window end.

    ``audio`` is either a whole AudioBuffer (resampled internally) or an
    iterable of sample chunks, optionally (chunk, t) pairs as produced by
    paced sources. Timestamps always come from the sample count, never the
    wall clock, so a paced stream decodes to exactly the same trace.
    """
    if isinstance(audio, AudioBuffer):
        buf = to_canonical(audio)
        chunks: Iterable = (buf.samples,)
        rate = buf.sample_rate
    else:
        chunks = audio

    window_n = round(spec.window_length * rate)
    hop_n = round(spec.hop_length * rate)
    accum = _GrowBuffer()
    next_end = window_n
    for item in chunks:
        chunk = item[0] if isinstance(item, tuple) else item
        accum.append(chunk)
        while next_end <= len(accum):
            t_end = next_end / rate
            t_start = (next_end - window_n) / rate
            f = window_feature_vector(
                accum.view(next_end - window_n, next_end), rate, provider, t_start, t_end
            )
            yield predict(model, f, t=t_end)
            next_end += hop_n


def dynamic_decode(
    audio: AudioSource,
    model: EmotionModel,
    provider: MidLevelProvider,
    spec: WindowSpec = DYNAMIC_WINDOW,
    rate: int = CANONICAL_RATE,
    source_id: str = "audio",
) -> EmotionTrace:
    """Decode a full clip; shorter than one window gives an empty trace."""
    points = tuple(iter_dynamic_decode(audio, model, provider, spec, rate))
    return EmotionTrace(points=points, source_id=source_id)


def static_window_starts(duration: float, spec: WindowSpec = STATIC_WINDOW) -> list:
    """Window start times 0, hop, 2*hop, ... while start + window <= duration."""
    count = math.floor((duration - spec.window_length) / spec.hop_length + 1e-9) + 1
    return [k * spec.hop_length for k in range(max(count, 0))]


def static_decode(
    audio: AudioBuffer,
    model: EmotionModel,
    provider: MidLevelProvider,
) -> EmotionPoint:
    """Single summary prediction for a whole clip, stamped at its duration.

    Clips shorter than 15 s are tiled end-to-end and a single 15 s window
    analyzed; longer clips are averaged over 15 s windows at 5 s hops. The
    provider is always queried over the clip's own [0, duration) span since
    the mid-level description of a looped clip is the clip's own.
    """
    if len(audio) == 0:
        raise ValueError("static decode needs non-empty audio")
    buf = to_canonical(audio)
    rate = buf.sample_rate
    duration = buf.duration_seconds
    window_n = round(STATIC_WINDOW.window_length * rate)
    span = (0.0, duration)

    if len(buf.samples) < window_n:
        reps = -(-window_n // len(buf.samples))
        tiled = np.tile(buf.samples, reps)[:window_n]
        f = window_feature_vector(tiled, rate, provider, *span)
        p = predict(model, f)
        return EmotionPoint(t=duration, valence=p.valence, arousal=p.arousal)

    hop_n = round(STATIC_WINDOW.hop_length * rate)
    valences, arousals = [], []
    start = 0
    while start + window_n <= len(buf.samples):
        t0, t1 = start / rate, (start + window_n) / rate
        f = window_feature_vector(buf.samples[start : start + window_n], rate, provider, t0, t1)
        p = predict(model, f)
        valences.append(p.valence)
        arousals.append(p.arousal)
        start += hop_n
    return EmotionPoint(
        t=duration,
        valence=float(np.mean(valences)),
        arousal=float(np.mean(arousals)),
    )


def smooth(trace: EmotionTrace, s: SmoothingSpec = SmoothingSpec()) -> EmotionTrace:
    """Resample a trace at the render rate with exponential interpolation.

    The rendered value decays toward the most recent raw point p at or
    before each tick: r <- p + (r - p) * 2^(-dt/half_life). Every rendered
    component therefore lies between the previous rendered value and the
    current target; the output never overshoots.
    """
    if len(trace) == 0:
        raise ValueError("cannot smooth an empty trace")
    raw = trace.points
    dt = 1.0 / s.render_rate
    decay = 2.0 ** (-dt / s.half_life)
    t0, t_last = raw[0].t, raw[-1].t
    ticks = int(math.floor((t_last - t0) * s.render_rate + 1e-9)) + 1

    out = []
    rv, ra = raw[0].valence, raw[0].arousal
    src = 0
    for k in range(ticks):
        t = t0 + k * dt
        while src + 1 < len(raw) and raw[src + 1].t <= t + 1e-12:
            src += 1
        if k > 0:
            pv, pa = raw[src].valence, raw[src].arousal
            rv = pv + (rv - pv) * decay
            ra = pa + (ra - pa) * decay
        out.append(EmotionPoint(t=t, valence=rv, arousal=ra))
    return EmotionTrace(points=tuple(out), source_id=trace.source_id, smoothed=True)


CIRCUMPLEX_WORDS = (
    ("pleased", 0.0),
    ("excited", 45.0),
    ("aroused", 90.0),
    ("distressed", 135.0),
    ("miserable", 180.0),
    ("depressed", 225.0),
    ("sleepy", 270.0),
    ("content", 315.0),
)

NEUTRAL_RADIUS = 0.1


def nearest_emotion_word(p: EmotionPoint) -> str:
    """Nearest of the eight canonical circumplex words by angle.

    Angle is atan2(arousal, valence); a tie midway between two words goes
    to the counterclockwise neighbor. Points closer than 0.1 to the origin
    are reported as "neutral" since their angle is unstable.
    """
    if math.hypot(p.valence, p.arousal) < NEUTRAL_RADIUS:
        return "neutral"
    theta = math.degrees(math.atan2(p.arousal, p.valence)) % 360.0
    index = int(math.floor((theta + 22.5) / 45.0)) % 8
    return CIRCUMPLEX_WORDS[index][0]


def trace_records(trace: EmotionTrace) -> Iterator[dict]:
    for p in trace.points:
        yield {
            "t": p.t,
            "valence": p.valence,
            "arousal": p.arousal,
            "word": nearest_emotion_word(p),
            "smoothed": trace.smoothed,
        }


def trace_to_jsonl(trace: EmotionTrace) -> str:
    return "".join(json.dumps(rec) + "\n" for rec in trace_records(trace))


def trace_to_csv(trace: EmotionTrace) -> str:
    import io

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", "valence", "arousal", "word", "smoothed"])
    for rec in trace_records(trace):
        writer.writerow(
            [repr(rec["t"]), repr(rec["valence"]), repr(rec["arousal"]),
             rec["word"], str(rec["smoothed"]).lower()]
        )
    return out.getvalue()


def load_trace(path) -> EmotionTrace:
    """Read a trace back from the line-delimited or CSV export."""
    text = open(path).read()
    points = []
    smoothed = False
    name = str(path)
    if name.endswith(".csv"):
        rows = list(csv.reader(text.splitlines()))
        header = rows[0]
        idx = {h: i for i, h in enumerate(header)}
        for row in rows[1:]:
            if not row:
                continue
            points.append(
                EmotionPoint(
                    t=float(row[idx["t"]]),
                    valence=float(row[idx["valence"]]),
                    arousal=float(row[idx["arousal"]]),
                )
            )
            if "smoothed" in idx:
                smoothed = row[idx["smoothed"]] == "true"
    else:
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            points.append(
                EmotionPoint(t=rec["t"], valence=rec["valence"], arousal=rec["arousal"])
            )
            smoothed = bool(rec.get("smoothed", False))
    return EmotionTrace(points=tuple(points), source_id=name, smoothed=smoothed)
