"""Linear discriminant analysis with a pooled, shrunk covariance.

Fitting computes per-class means, the pooled within-class covariance
Sigma = (1 / (N - K)) * sum of centered outer products, and the shrunk
Sigma_l = (1 - l) * Sigma + l * (tr(Sigma) / d) * I. The Cholesky factor
of Sigma_l is taken once at fit time; prediction is a single matrix
product against precomputed weights, so scoring never re-solves the
system.

Scores are delta_j(x) = x' Sigma_l^-1 mu_j - mu_j' Sigma_l^-1 mu_j / 2
+ log pi_j; ties break toward the neutral class, then the lowest label.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, cholesky, LinAlgError

from .errors import (
    DimensionMismatchError,
    ModelFormatError,
    SingularCovarianceError,
    TrainingDataError,
)
from .features import AmplitudeRange, FeatureLayout

DEFAULT_SHRINKAGE = 1e-3

MODEL_FORMAT = "bomi-lda"
MODEL_VERSION = 1


@dataclass
class LdaModel:
    """A fitted classifier. Immutable after fit; predict is reentrant."""

    classes: np.ndarray            # (K,) int labels, sorted
    means: np.ndarray              # (K, d)
    chol_lower: np.ndarray         # (d, d) L with Sigma_l = L L'
    shrinkage: float
    log_priors: np.ndarray         # (K,)
    feature_kind: str
    layout: FeatureLayout
    ranges: AmplitudeRange | None = None
    meta: dict = field(default_factory=dict)
    _weights: np.ndarray = field(init=False, repr=False)   # (d, K)
    _biases: np.ndarray = field(init=False, repr=False)    # (K,)

    def __post_init__(self) -> None:
        # Precompute the linear form once; scoring is then x @ W + b.
        w = cho_solve((self.chol_lower, True), self.means.T)
        self._weights = w
        self._biases = -0.5 * np.einsum("kd,dk->k", self.means, w) + self.log_priors

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def fit(
    X: np.ndarray,
    y: np.ndarray,
    shrinkage: float = DEFAULT_SHRINKAGE,
    priors: str = "empirical",
    feature_kind: str = "fv3",
    layout: FeatureLayout | None = None,
    ranges: AmplitudeRange | None = None,
    meta: dict | None = None,
) -> LdaModel:
    """Fit the classifier on labeled feature vectors.

    Args:
        X: (N, d) feature matrix.
        y: (N,) integer labels.
        shrinkage: blend weight toward the scaled identity, in [0, 1).
        priors: "empirical" uses class frequencies; "uniform" weighs all
            classes equally.

    Raises:
        TrainingDataError: fewer than 2 classes, a class with fewer than
            2 examples, or ragged input.
        SingularCovarianceError: the (shrunk) covariance is not positive
            definite; raise shrinkage above zero.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise TrainingDataError(f"X must be (N, d) aligned with y, got {X.shape}")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise TrainingDataError(f"need at least 2 classes, got {len(classes)}")
    if counts.min() < 2:
        short = classes[counts < 2].tolist()
        raise TrainingDataError(f"classes {short} have fewer than 2 examples")
    if not 0.0 <= shrinkage < 1.0 + 1e-12:
        raise TrainingDataError(f"shrinkage must be in [0, 1], got {shrinkage}")
    if priors not in ("empirical", "uniform"):
        raise TrainingDataError(f"priors must be empirical or uniform, got {priors!r}")

    n, d = X.shape
    k = len(classes)
    means = np.empty((k, d))
    centered = np.empty_like(X)
    for i, cls in enumerate(classes):
        mask = y == cls
        means[i] = X[mask].mean(axis=0)
        centered[mask] = X[mask] - means[i]
    cov = (centered.T @ centered) / (n - k)
    if shrinkage > 0.0:
        target = np.trace(cov) / d
        cov = (1.0 - shrinkage) * cov
        cov[np.diag_indices(d)] += shrinkage * target

    try:
        lower = cholesky(cov, lower=True)
    except LinAlgError as exc:
        raise SingularCovarianceError(
            "pooled covariance is singular; refit with shrinkage > 0"
        ) from exc

    if priors == "empirical":
        log_priors = np.log(counts / n)
    else:
        log_priors = np.full(k, -np.log(k))

    model_meta = {
        "trained_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "n_train": int(n),
        "class_counts": {str(int(c)): int(cnt) for c, cnt in zip(classes, counts)},
        "priors": priors,
    }
    if meta:
        model_meta.update(meta)
    return LdaModel(
        classes=classes,
        means=means,
        chol_lower=lower,
        shrinkage=float(shrinkage),
        log_priors=log_priors,
        feature_kind=feature_kind,
        layout=layout or FeatureLayout(sensor_ids=(1,)),
        ranges=ranges,
        meta=model_meta,
    )


def _check_dim(model: LdaModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise DimensionMismatchError(
            f"feature dimension {x.shape[-1]} does not match model "
            f"({model.feature_kind}, d={model.dim})"
        )
    return x


def predict_scores(model: LdaModel, x: np.ndarray) -> np.ndarray:
    """Per-class discriminant scores for one feature vector."""
    x = _check_dim(model, x)
    return x @ model._weights + model._biases


def predict_scores_matrix(model: LdaModel, X: np.ndarray) -> np.ndarray:
    """(N, K) scores for a feature matrix."""
    X = _check_dim(model, np.atleast_2d(X))
    return X @ model._weights + model._biases


def _argmax_with_ties(model: LdaModel, scores: np.ndarray) -> int:
    best = scores.max()
    tied = model.classes[scores == best]
    if len(tied) > 1:
        return 0 if 0 in tied else int(tied.min())
    return int(tied[0])


def predict(model: LdaModel, x: np.ndarray) -> int:
    """Predicted label for one feature vector (ties go to neutral)."""
    return _argmax_with_ties(model, predict_scores(model, x))


def predict_many(model: LdaModel, X: np.ndarray) -> np.ndarray:
    """Predicted labels for a feature matrix."""
    scores = predict_scores_matrix(model, X)
    out = model.classes[np.argmax(scores, axis=1)]
    # argmax takes the first maximum; revisit rows with exact ties.
    best = scores.max(axis=1, keepdims=True)
    tie_rows = np.where((scores == best).sum(axis=1) > 1)[0]
    for i in tie_rows:
        out[i] = _argmax_with_ties(model, scores[i])
    return out


# ---------------------------------------------------------------------------
# Serialization


def _ranges_to_dict(r: AmplitudeRange | None) -> dict | None:
    if r is None:
        return None
    return {
        "mode": r.mode,
        "ranges": {str(c): [lo, hi] for c, (lo, hi) in r.ranges.items()},
        "class_sensor": {str(c): s for c, s in r.class_sensor.items()},
    }


def _ranges_from_dict(obj: dict | None) -> AmplitudeRange | None:
    if obj is None:
        return None
    return AmplitudeRange(
        ranges={int(c): (float(v[0]), float(v[1])) for c, v in obj["ranges"].items()},
        class_sensor={int(c): int(s) for c, s in obj["class_sensor"].items()},
        mode=obj.get("mode", "minmax"),
    )


def serialize(model: LdaModel, path: str | Path) -> None:
    """Write a model to versioned JSON; floats round-trip exactly."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "classes": model.classes.tolist(),
        "means": model.means.tolist(),
        "chol_lower": model.chol_lower.tolist(),
        "shrinkage": model.shrinkage,
        "log_priors": model.log_priors.tolist(),
        "feature_kind": model.feature_kind,
        "sensor_ids": list(model.layout.sensor_ids),
        "ranges": _ranges_to_dict(model.ranges),
        "meta": model.meta,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def deserialize(path: str | Path) -> LdaModel:
    """Load a model written by serialize.

    Raises:
        ModelFormatError: missing file content, wrong format marker,
            unsupported version, or inconsistent shapes.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a model file (missing format marker)")
    if payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"unsupported model version {payload.get('version')!r}"
        )
    try:
        classes = np.asarray(payload["classes"], dtype=np.int64)
        means = np.asarray(payload["means"], dtype=np.float64)
        lower = np.asarray(payload["chol_lower"], dtype=np.float64)
        log_priors = np.asarray(payload["log_priors"], dtype=np.float64)
        model = LdaModel(
            classes=classes,
            means=means,
            chol_lower=lower,
            shrinkage=float(payload["shrinkage"]),
            log_priors=log_priors,
            feature_kind=str(payload["feature_kind"]),
            layout=FeatureLayout(sensor_ids=tuple(payload["sensor_ids"])),
            ranges=_ranges_from_dict(payload.get("ranges")),
            meta=payload.get("meta", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from exc
    k, d = model.means.shape
    if not (len(classes) == k == len(log_priors) and lower.shape == (d, d)):
        raise ModelFormatError("inconsistent array shapes in model file")
    return model
