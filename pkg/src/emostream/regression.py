"""Linear regression from the 9-feature vector to arousal and valence.

Features are z-scored with training statistics before fitting, which makes
the per-feature T-statistics comparable as importance values and makes
predictions invariant to raw feature scaling. Arousal and valence are fitted
independently; the point estimates match a joint two-output solve.

Fitted models are immutable; concurrent predict calls are safe.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .midlevel import MIDLEVEL_NAMES, MidLevelVector

FEATURE_NAMES = MIDLEVEL_NAMES + ("onset_density", "mean_rms")

FEATURE_SUBSETS = {
    "all": tuple(range(9)),
    "midlevel7": tuple(range(7)),
    "new2": (7, 8),
}

SUBSET_LABELS = {
    "all": "The (9)-mid-level feature set",
    "midlevel7": "The (7)-mid-level feature set",
    "new2": "Onset density and RMS amplitude",
}

MODEL_SCHEMA_VERSION = 1


class DatasetFormatError(ValueError):
    """Raised for malformed dataset CSV files."""


class ModelFormatError(ValueError):
    """Raised for unreadable or schema-violating model files."""


@dataclass(frozen=True)
class FeatureVector:
    """The 9 regression inputs in canonical order: the seven mid-level
    features, then onset_density (onsets/s) and mean_rms (amplitude)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (9,):
            raise ValueError(f"expected 9 features, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_parts(
        cls, midlevel: MidLevelVector, onset_density: float, mean_rms: float
    ) -> "FeatureVector":
        return cls(np.concatenate([midlevel.as_array(), [onset_density, mean_rms]]))


@dataclass(frozen=True)
class EmotionPoint:
    """A (valence, arousal) prediction at time t (the window end)."""

    t: float
    valence: float
    arousal: float

    def __post_init__(self):
        if not (np.isfinite(self.valence) and np.isfinite(self.arousal)):
            raise ValueError("valence and arousal must be finite")
        if abs(self.valence) > 1.0 or abs(self.arousal) > 1.0:
            raise ValueError("valence and arousal must lie in [-1, 1]")


@dataclass(frozen=True)
class Dataset:
    """Per-clip features and ratings: (clip_id, 9 features, arousal, valence)."""

    clip_ids: tuple
    features: np.ndarray  # (n, 9)
    arousal: np.ndarray
    valence: np.ndarray

    def __post_init__(self):
        n = len(self.clip_ids)
        if self.features.shape != (n, 9):
            raise ValueError(f"features must be ({n}, 9), got {self.features.shape}")
        if len(self.arousal) != n or len(self.valence) != n:
            raise ValueError("targets must match the number of clips")
        if len(set(self.clip_ids)) != n:
            raise ValueError("duplicate clip_id in dataset")

    def __len__(self) -> int:
        return len(self.clip_ids)


@dataclass(frozen=True)
class OlsFit:
    """One least-squares fit with its diagnostics."""

    weights: np.ndarray
    intercept: float
    standard_errors: np.ndarray
    t_values: np.ndarray
    r2: float
    adjusted_r2: float
    residual_variance: float
    n: int
    p: int


@dataclass(frozen=True)
class OutputCalibration:
    """Affine map applied to a raw prediction before clamping."""

    scale: float = 1.0
    offset: float = 0.0

    def apply(self, value: float) -> float:
        return self.scale * value + self.offset


@dataclass(frozen=True)
class EmotionModel:
    """Two fitted linear maps plus the normalization stats they expect.

    ``feature_indices`` selects the fitted subset out of the canonical
    9-feature vector; means/stds/names are stored per selected feature.
    """

    arousal_fit: OlsFit
    valence_fit: OlsFit
    feature_indices: tuple
    feature_names: tuple
    feature_means: np.ndarray
    feature_stds: np.ndarray
    arousal_cal: OutputCalibration = OutputCalibration()
    valence_cal: OutputCalibration = OutputCalibration()

    def __post_init__(self):
        p = len(self.feature_indices)
        if p == 0:
            raise ValueError("model must use at least one feature")
        if tuple(sorted(self.feature_indices)) != tuple(self.feature_indices):
            raise ValueError("feature_indices must be in canonical order")
        expected = tuple(FEATURE_NAMES[i] for i in self.feature_indices)
        if tuple(self.feature_names) != expected:
            raise ValueError("feature_names do not match canonical order")
        if len(self.feature_means) != p or len(self.feature_stds) != p:
            raise ValueError("normalization stats must match the feature subset")
        if np.any(self.feature_stds <= 0):
            raise ValueError("feature_stds must all be positive")


def fit_ols(X, y) -> OlsFit:
    """Least squares of y on [1 | X] via QR, with standard diagnostics.

    residual_variance is RSS/(n-p-1); standard errors come from the diagonal
    of residual_variance * inv(D'D) for the design D = [1|X]; R^2 uses the
    convention r2 := 0 when the target has zero variance. Where a standard
    error is zero the T-value is reported as 0.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    n, p = X.shape
    if len(y) != n:
        raise ValueError("X and y disagree on the number of rows")
    if n < p + 2:
        raise ValueError(f"need at least p + 2 = {p + 2} rows, got {n}")

    design = np.column_stack([np.ones(n), X])
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    tol = np.max(diag) * max(n, p + 1) * np.finfo(np.float64).eps
    bad = np.nonzero(diag < tol)[0]
    if len(bad):
        col = bad[0] - 1
        which = "intercept" if col < 0 else f"column {col}"
        raise ValueError(f"design matrix is rank-deficient ({which})")

    beta = np.linalg.solve(r, q.T @ y)
    residuals = y - design @ beta
    rss = float(residuals @ residuals)
    tss = float(np.sum((y - np.mean(y)) ** 2))
    # An exactly constant target leaves tss as rounding dust rather than a
    # true zero, and rss/tss would then be a meaningless ratio of dusts.
    constant_target = tss == 0.0 or np.ptp(y) == 0.0
    r2 = 1.0 - rss / tss if not constant_target else 0.0
    adjusted = 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)
    resid_var = rss / (n - p - 1)

    r_inv = np.linalg.inv(r)
    cov_diag = resid_var * np.sum(r_inv * r_inv, axis=1)
    se = np.sqrt(np.maximum(cov_diag[1:], 0.0))
    weights = beta[1:]
    t_values = np.divide(weights, se, out=np.zeros_like(weights), where=se > 0)

    return OlsFit(
        weights=weights,
        intercept=float(beta[0]),
        standard_errors=se,
        t_values=t_values,
        r2=r2,
        adjusted_r2=adjusted,
        residual_variance=resid_var,
        n=n,
        p=p,
    )


def resolve_feature_subset(subset: Iterable) -> tuple:
    """Normalize a subset given as indices or canonical names."""
    indices = []
    for item in subset:
        if isinstance(item, str):
            if item not in FEATURE_NAMES:
                raise ValueError(f"unknown feature {item!r}")
            indices.append(FEATURE_NAMES.index(item))
        else:
            idx = int(item)
            if not 0 <= idx < 9:
                raise ValueError(f"feature index {idx} out of range")
            indices.append(idx)
    if not indices:
        raise ValueError("feature subset must not be empty")
    if len(set(indices)) != len(indices):
        raise ValueError("feature subset contains duplicates")
    return tuple(sorted(indices))


def fit_emotion_model(ds: Dataset, feature_subset: Iterable = FEATURE_SUBSETS["all"]) -> EmotionModel:
    """Fit arousal and valence on a feature subset, z-scored with training stats.

    Rows are ordered by clip_id before solving, so fits are reproducible
    bit-for-bit regardless of input row order.
    """
    indices = resolve_feature_subset(feature_subset)
    order = np.argsort(np.asarray(ds.clip_ids, dtype=object))
    X = ds.features[order][:, indices]
    arousal = ds.arousal[order]
    valence = ds.valence[order]

    means = X.mean(axis=0)
    stds = X.std(axis=0)
    for j, s in enumerate(stds):
        # ptp catches bitwise-constant columns whose computed std is rounding
        # dust instead of a clean zero.
        if s <= 0 or np.ptp(X[:, j]) == 0.0:
            raise ValueError(
                f"feature {FEATURE_NAMES[indices[j]]!r} has zero variance"
            )
    Xz = (X - means) / stds

    return EmotionModel(
        arousal_fit=fit_ols(Xz, arousal),
        valence_fit=fit_ols(Xz, valence),
        feature_indices=indices,
        feature_names=tuple(FEATURE_NAMES[i] for i in indices),
        feature_means=means,
        feature_stds=stds,
    )


def predict(model: EmotionModel, f: FeatureVector, t: float = 0.0) -> EmotionPoint:
    """Apply both linear maps to a feature vector; output clamped to [-1, 1]^2."""
    z = (f.values[list(model.feature_indices)] - model.feature_means) / model.feature_stds
    arousal = model.arousal_fit.intercept + float(model.arousal_fit.weights @ z)
    valence = model.valence_fit.intercept + float(model.valence_fit.weights @ z)
    arousal = min(1.0, max(-1.0, model.arousal_cal.apply(arousal)))
    valence = min(1.0, max(-1.0, model.valence_cal.apply(valence)))
    return EmotionPoint(t=t, valence=valence, arousal=arousal)


def _fit_to_dict(fit: OlsFit) -> dict:
    return {
        "weights": [float(w) for w in fit.weights],
        "intercept": fit.intercept,
        "standard_errors": [float(s) for s in fit.standard_errors],
        "t_values": [float(t) for t in fit.t_values],
        "r2": fit.r2,
        "adjusted_r2": fit.adjusted_r2,
        "residual_variance": fit.residual_variance,
        "n": fit.n,
        "p": fit.p,
    }


def _fit_from_dict(d: dict) -> OlsFit:
    return OlsFit(
        weights=np.asarray(d["weights"], dtype=np.float64),
        intercept=float(d["intercept"]),
        standard_errors=np.asarray(d["standard_errors"], dtype=np.float64),
        t_values=np.asarray(d["t_values"], dtype=np.float64),
        r2=float(d["r2"]),
        adjusted_r2=float(d["adjusted_r2"]),
        residual_variance=float(d["residual_variance"]),
        n=int(d["n"]),
        p=int(d["p"]),
    )


def model_to_json(model: EmotionModel) -> str:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "feature_indices": list(model.feature_indices),
        "feature_names": list(model.feature_names),
        "feature_means": [float(v) for v in model.feature_means],
        "feature_stds": [float(v) for v in model.feature_stds],
        "normalization": "z-score",
        "calibration": {
            "arousal": {"scale": model.arousal_cal.scale, "offset": model.arousal_cal.offset},
            "valence": {"scale": model.valence_cal.scale, "offset": model.valence_cal.offset},
        },
        "arousal_fit": _fit_to_dict(model.arousal_fit),
        "valence_fit": _fit_to_dict(model.valence_fit),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_model(model: EmotionModel, path) -> None:
    from .fileio import atomic_write_text

    atomic_write_text(path, model_to_json(model))


def load_model(path) -> EmotionModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON: {exc}") from exc

    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(
            f"{path}: schema_version {version!r} unsupported (expected {MODEL_SCHEMA_VERSION})"
        )
    required = (
        "feature_indices",
        "feature_names",
        "feature_means",
        "feature_stds",
        "calibration",
        "arousal_fit",
        "valence_fit",
    )
    for key in required:
        if key not in doc:
            raise ModelFormatError(f"{path}: missing field {key!r}")
    try:
        cal = doc["calibration"]
        model = EmotionModel(
            arousal_fit=_fit_from_dict(doc["arousal_fit"]),
            valence_fit=_fit_from_dict(doc["valence_fit"]),
            feature_indices=tuple(int(i) for i in doc["feature_indices"]),
            feature_names=tuple(doc["feature_names"]),
            feature_means=np.asarray(doc["feature_means"], dtype=np.float64),
            feature_stds=np.asarray(doc["feature_stds"], dtype=np.float64),
            arousal_cal=OutputCalibration(**cal["arousal"]),
            valence_cal=OutputCalibration(**cal["valence"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    return model


def importance_report(model: EmotionModel) -> dict:
    """Per-target feature importances: (name, T-value) sorted by |T| descending."""
    report = {}
    for target, fit in (("arousal", model.arousal_fit), ("valence", model.valence_fit)):
        pairs = list(zip(model.feature_names, (float(t) for t in fit.t_values)))
        pairs.sort(key=lambda item: abs(item[1]), reverse=True)
        report[target] = pairs
    return report


def importance_csv_text(report: dict) -> str:
    import io

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["target", "feature", "t_value"])
    for target in ("arousal", "valence"):
        for name, t in report[target]:
            writer.writerow([target, name, repr(t)])
    return out.getvalue()


def write_importance_csv(report: dict, path) -> None:
    from .fileio import atomic_write_text

    atomic_write_text(path, importance_csv_text(report))


def importance_svg_text(report: dict) -> str:
    """Horizontal bar chart of T-values, one panel per target."""
    bar_h, gap, label_w, chart_w = 18, 6, 150, 420
    panels = []
    y = 10
    for target in ("arousal", "valence"):
        rows = report[target]
        panels.append(
            f'<text x="10" y="{y + 12}" font-size="14" font-weight="bold" '
            f'fill="#333">T-values for {target}</text>'
        )
        y += 26
        max_abs = max((abs(t) for _, t in rows), default=0.0) or 1.0
        mid_x = label_w + chart_w / 2
        for name, t in rows:
            half = (abs(t) / max_abs) * (chart_w / 2 - 4)
            x = mid_x if t >= 0 else mid_x - half
            color = "#4878a8" if t >= 0 else "#b05a5a"
            panels.append(
                f'<text x="{label_w - 6}" y="{y + bar_h - 5}" font-size="11" '
                f'text-anchor="end" fill="#333">{name}</text>'
            )
            panels.append(
                f'<rect x="{x:.2f}" y="{y}" width="{max(half, 0.5):.2f}" '
                f'height="{bar_h}" fill="{color}"/>'
            )
            panels.append(
                f'<text x="{label_w + chart_w + 6}" y="{y + bar_h - 5}" '
                f'font-size="11" fill="#333">{t:.4g}</text>'
            )
            y += bar_h + gap
        panels.append(
            f'<line x1="{mid_x}" y1="{y - len(rows) * (bar_h + gap)}" x2="{mid_x}" '
            f'y2="{y}" stroke="#999" stroke-width="1"/>'
        )
        y += 20
    width = label_w + chart_w + 70
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{y}" '
        f'viewBox="0 0 {width} {y}">\n'
        f'<rect width="{width}" height="{y}" fill="white"/>\n'
        + "\n".join(panels)
        + "\n</svg>\n"
    )


def write_importance_svg(report: dict, path) -> None:
    from .fileio import atomic_write_text

    atomic_write_text(path, importance_svg_text(report))


def load_dataset(path) -> Dataset:
    """Parse the dataset CSV: clip_id, the 9 canonical features, arousal, valence."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        required = ("clip_id",) + FEATURE_NAMES + ("arousal", "valence")
        for name in required:
            if name not in header:
                raise DatasetFormatError(f"{path}: missing column {name!r}")
        col = {name: header.index(name) for name in required}

        clip_ids, rows, arousal, valence = [], [], [], []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                clip = row[col["clip_id"]]
                feats = [float(row[col[name]]) for name in FEATURE_NAMES]
                a = float(row[col["arousal"]])
                v = float(row[col["valence"]])
            except (ValueError, IndexError) as exc:
                raise DatasetFormatError(f"{path}: row {row_no}: {exc}") from None
            if not (np.all(np.isfinite(feats)) and np.isfinite(a) and np.isfinite(v)):
                raise DatasetFormatError(f"{path}: row {row_no}: non-finite value")
            if clip in clip_ids:
                raise DatasetFormatError(f"{path}: row {row_no}: duplicate clip_id {clip!r}")
            clip_ids.append(clip)
            rows.append(feats)
            arousal.append(a)
            valence.append(v)

    if not clip_ids:
        raise DatasetFormatError(f"{path}: no data rows")
    return Dataset(
        clip_ids=tuple(clip_ids),
        features=np.asarray(rows),
        arousal=np.asarray(arousal),
        valence=np.asarray(valence),
    )


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", *FEATURE_NAMES, "arousal", "valence"])
        for i, clip in enumerate(ds.clip_ids):
            writer.writerow(
                [clip]
                + [repr(float(v)) for v in ds.features[i]]
                + [repr(float(ds.arousal[i])), repr(float(ds.valence[i]))]
            )
