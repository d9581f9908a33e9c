"""Mid-level perceptual features, supplied per time window by a provider.

The seven features (melodiousness, articulation, rhythm complexity, rhythm
stability, dissonance, tonal stability, minorness) normally come from an
external predictor. That predictor is out of scope here, so providers either
hold a constant vector or interpolate a trace loaded from CSV. Providers are
immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Protocol

import numpy as np

MIDLEVEL_NAMES = (
    "melodiousness",
    "articulation",
    "rhythm_complexity",
    "rhythm_stability",
    "dissonance",
    "tonal_stability",
    "minorness",
)


class TraceFormatError(ValueError):
    """Raised for malformed mid-level trace files."""


@dataclass(frozen=True)
class MidLevelVector:
    melodiousness: float
    articulation: float
    rhythm_complexity: float
    rhythm_stability: float
    dissonance: float
    tonal_stability: float
    minorness: float

    def __post_init__(self):
        for name in MIDLEVEL_NAMES:
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in MIDLEVEL_NAMES])

    @classmethod
    def from_array(cls, values) -> "MidLevelVector":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (7,):
            raise ValueError(f"expected 7 components, got shape {values.shape}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class MidLevelTrace:
    """Time series of mid-level vectors; timestamps strictly increasing."""

    timestamps: np.ndarray
    vectors: np.ndarray  # shape (n, 7), canonical column order

    def __post_init__(self):
        if len(self.timestamps) != len(self.vectors):
            raise ValueError("timestamps and vectors must have equal length")
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise ValueError("timestamps must be strictly increasing")


class MidLevelProvider(Protocol):
    def window_features(self, t_start: float, t_end: float) -> MidLevelVector: ...


@dataclass(frozen=True)
class ConstantProvider:
    """Returns the same vector for every window. Used in tests and when
    running the pipeline on the two signal-derived features alone."""

    vector: MidLevelVector

    def window_features(self, t_start: float, t_end: float) -> MidLevelVector:
        return self.vector


@dataclass(frozen=True)
class TraceProvider:
    """Evaluates a trace at the window midpoint by linear interpolation.

    Windows outside the trace's time span clamp to the nearest endpoint
    vector, so decoding never fails at startup.
    """

    trace: MidLevelTrace

    def window_features(self, t_start: float, t_end: float) -> MidLevelVector:
        mid = (t_start + t_end) / 2.0
        ts = self.trace.timestamps
        values = np.array(
            [np.interp(mid, ts, self.trace.vectors[:, j]) for j in range(7)]
        )
        return MidLevelVector.from_array(values)


def provider_window_features(
    provider: MidLevelProvider, t_start: float, t_end: float
) -> MidLevelVector:
    if t_start >= t_end:
        raise ValueError("t_start must be < t_end")
    return provider.window_features(t_start, t_end)


def load_midlevel_trace(path) -> MidLevelTrace:
    """Parse a trace CSV with header time_s plus the seven canonical names.

    Columns are matched by name, so order does not matter. Errors name the
    offending 1-based file row.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        required = ("time_s",) + MIDLEVEL_NAMES
        for name in required:
            if name not in header:
                raise TraceFormatError(f"{path}: missing column {name!r}")
        col = {name: header.index(name) for name in required}

        timestamps = []
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = float(row[col["time_s"]])
                vec = [float(row[col[name]]) for name in MIDLEVEL_NAMES]
            except (ValueError, IndexError) as exc:
                raise TraceFormatError(f"{path}: row {row_no}: {exc}") from None
            if not np.isfinite(t) or not np.all(np.isfinite(vec)):
                raise TraceFormatError(f"{path}: row {row_no}: non-finite value")
            if timestamps and t <= timestamps[-1]:
                raise TraceFormatError(
                    f"{path}: row {row_no}: timestamp {t} not after {timestamps[-1]}"
                )
            timestamps.append(t)
            rows.append(vec)

    if not timestamps:
        raise TraceFormatError(f"{path}: no data rows")
    return MidLevelTrace(
        timestamps=np.asarray(timestamps), vectors=np.asarray(rows)
    )


def save_midlevel_trace(trace: MidLevelTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", *MIDLEVEL_NAMES])
        for t, vec in zip(trace.timestamps, trace.vectors):
            writer.writerow([repr(float(t)), *(repr(float(v)) for v in vec)])


def parse_provider_spec(text: str) -> MidLevelProvider:
    """Build a provider from a CLI/config string.

    ``constant:<v1,...,v7>`` gives a fixed vector; ``trace:<path>`` loads a
    trace CSV and interpolates it.
    """
    kind, sep, arg = text.partition(":")
    if not sep:
        raise ValueError(f"provider spec {text!r} must look like kind:argument")
    if kind == "constant":
        parts = arg.split(",")
        if len(parts) != 7:
            raise ValueError(f"constant provider needs 7 values, got {len(parts)}")
        return ConstantProvider(MidLevelVector.from_array([float(p) for p in parts]))
    if kind == "trace":
        return TraceProvider(load_midlevel_trace(arg))
    raise ValueError(f"unknown provider kind {kind!r}")
