"""Offline evaluation harness: feature-vector comparison, amplitude and
multi-day studies, and misclassification structure.

Training pools the first two sequences of a session and testing uses the
third unless a split is given. Windows spanning a label change are
excluded from accuracy (their ground truth is ambiguous); exclusion
counts are reported. All evaluations are pure and independent, so they
parallelize trivially across participants, feature kinds, and days.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence as SequenceT

import numpy as np

from .dataset_io import (
    SessionRecording,
    Sequence,
    SplitSpec,
    load_recording,
    split_session,
)
from .errors import CoverageError, DataError, TrainingDataError, ValidationError
from .features import (
    DEFAULT_OVERLAP,
    DEFAULT_WINDOW,
    AmplitudeRange,
    FeatureLayout,
    Window,
    extract_matrix,
    learn_ranges,
    make_windows,
)
from .fusion import FusionConfig, fuse_sequence
from .lda import LdaModel, fit, predict_many
from .pipeline import max_consecutive_disagreements


def sequence_windows(
    recording: SessionRecording,
    seq: Sequence,
    fusion: FusionConfig = FusionConfig(),
    origin: str | None = None,
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_OVERLAP,
) -> list[Window]:
    """Fuse, calibrate, and window one sequence (the offline path).

    Windowing starts after the calibration ticks so offline windows line
    up one-to-one with streaming emissions.
    """
    fused = fuse_sequence(
        seq.samples, recording.sensor_ids, recording.sample_rate_hz, fusion
    )
    c = fused.calib_ticks
    return list(
        make_windows(
            fused.angles[c:], fused.gyro[c:], seq.labels[c:],
            start_tick=c, size=window, overlap=overlap, origin=origin,
        )
    )


def labeled_windows(windows: SequenceT[Window]) -> list[Window]:
    """Drop windows that span a label change."""
    return [w for w in windows if w.label is not None]


def train_on_windows(
    windows: SequenceT[Window],
    layout: FeatureLayout,
    feature_kind: str = "fv3",
    shrinkage: float = 1e-3,
    priors: str = "empirical",
    learn_amplitude: bool = True,
    class_sensor: Mapping[int, int] | None = None,
    amplitude_mode: str = "minmax",
    meta: dict | None = None,
) -> LdaModel:
    """Fit a model (and optionally amplitude ranges) on labeled windows."""
    usable = labeled_windows(windows)
    if not usable:
        raise TrainingDataError("no single-label windows to train on")
    X = extract_matrix(feature_kind, usable, layout)
    y = np.asarray([w.label for w in usable])
    ranges: AmplitudeRange | None = None
    if learn_amplitude:
        classes = [int(c) for c in np.unique(y) if c != 0]
        ranges = learn_ranges(
            usable, layout, classes, class_sensor=class_sensor, mode=amplitude_mode
        )
    return fit(
        X, y,
        shrinkage=shrinkage,
        priors=priors,
        feature_kind=feature_kind,
        layout=layout,
        ranges=ranges,
        meta=meta,
    )


def train_session(
    recording: SessionRecording,
    split: SplitSpec | None = None,
    feature_kind: str = "fv3",
    fusion: FusionConfig = FusionConfig(),
    shrinkage: float = 1e-3,
    priors: str = "empirical",
    learn_amplitude: bool = True,
    class_sensor: Mapping[int, int] | None = None,
    amplitude_mode: str = "minmax",
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_OVERLAP,
) -> tuple[LdaModel, list[Window]]:
    """Train on a session's training split; return (model, test windows)."""
    split = split or SplitSpec()
    train_seqs, test_seqs = split_session(recording, split)
    layout = FeatureLayout(sensor_ids=recording.sensor_ids)
    train_windows: list[Window] = []
    for qi, seq in zip(sorted(split.train), train_seqs):
        train_windows.extend(sequence_windows(
            recording, seq, fusion, origin=f"seq{qi}", window=window, overlap=overlap,
        ))
    test_windows: list[Window] = []
    for qi, seq in zip(sorted(split.test), test_seqs):
        test_windows.extend(sequence_windows(
            recording, seq, fusion, origin=f"seq{qi}", window=window, overlap=overlap,
        ))
    present = {w.label for w in train_windows if w.label is not None}
    missing = sorted(set(range(recording.class_count)) - present)
    if missing:
        raise CoverageError(
            f"classes {missing} have no training windows in sequences "
            f"{sorted(split.train)}"
        )
    model = train_on_windows(
        train_windows, layout,
        feature_kind=feature_kind,
        shrinkage=shrinkage,
        priors=priors,
        learn_amplitude=learn_amplitude,
        class_sensor=class_sensor,
        amplitude_mode=amplitude_mode,
        meta={"sensor_layout": [[s.id, s.location] for s in recording.sensor_layout]},
    )
    return model, test_windows


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class ConfusionMatrix:
    """Square count matrix with rows as true classes."""

    labels: list[int]
    counts: np.ndarray

    def row_percent(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = 100.0 * self.counts / totals
        return np.nan_to_num(pct)

    def accuracy(self) -> float:
        total = self.counts.sum()
        if total == 0:
            raise DataError("empty confusion matrix")
        return 100.0 * np.trace(self.counts) / total

    def diagonal_percent(self) -> dict[int, float]:
        pct = self.row_percent()
        return {lab: float(pct[i, i]) for i, lab in enumerate(self.labels)}

    def write_csv(self, path: str | Path) -> None:
        pct = self.row_percent()
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("true\\pred," + ",".join(f"c{l}" for l in self.labels) + "\n")
            for i, lab in enumerate(self.labels):
                row = ",".join(f"{pct[i, j]:.2f}" for j in range(len(self.labels)))
                fh.write(f"c{lab},{row}\n")

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "counts": self.counts.tolist(),
            "row_percent": self.row_percent().round(4).tolist(),
        }


@dataclass
class MisclassStructure:
    """How a prediction stream fails against its reference."""

    neutral_fraction: float | None
    max_run: int
    pairs: list[tuple[int, int, int]]  # (true, predicted, count), worst first

    def to_dict(self) -> dict:
        return {
            "neutral_fraction": self.neutral_fraction,
            "max_run": self.max_run,
            "pairs": [list(p) for p in self.pairs],
        }


def misclassification_structure(
    predictions: SequenceT[int], labels: SequenceT[int]
) -> MisclassStructure:
    """Neutral-error fraction, worst error run, and top confused pairs.

    neutral_fraction is the share of all errors whose prediction is the
    neutral class (None when there are no errors).
    """
    predictions = [int(p) for p in predictions]
    labels = [int(l) for l in labels]
    if len(predictions) != len(labels):
        raise ValidationError(
            f"stream lengths differ: {len(predictions)} vs {len(labels)}"
        )
    errors = [(t, p) for p, t in zip(predictions, labels) if p != t]
    neutral_fraction = (
        sum(1 for _, p in errors if p == 0) / len(errors) if errors else None
    )
    pair_counts: dict[tuple[int, int], int] = {}
    for t, p in errors:
        pair_counts[(t, p)] = pair_counts.get((t, p), 0) + 1
    pairs = sorted(
        ((t, p, n) for (t, p), n in pair_counts.items()),
        key=lambda item: (-item[2], item[0], item[1]),
    )
    return MisclassStructure(
        neutral_fraction=neutral_fraction,
        max_run=max_consecutive_disagreements(predictions, labels),
        pairs=pairs,
    )


@dataclass
class EvalResult:
    """Accuracy plus diagnostics for one model on one window set."""

    accuracy: float
    confusion: ConfusionMatrix
    n_windows: int
    n_mixed_excluded: int
    structure: MisclassStructure

    def to_dict(self) -> dict:
        return {
            "accuracy_pct": self.accuracy,
            "n_windows": self.n_windows,
            "n_mixed_excluded": self.n_mixed_excluded,
            "confusion": self.confusion.to_dict(),
            "structure": self.structure.to_dict(),
        }


def evaluate(model: LdaModel, windows: SequenceT[Window]) -> EvalResult:
    """Window-level accuracy and confusion matrix on labeled windows.

    Mixed-label windows are excluded and counted. Rows of the confusion
    matrix are true classes.
    """
    usable = labeled_windows(windows)
    n_mixed = len(windows) - len(usable)
    if not usable:
        raise DataError("no single-label windows to evaluate")
    X = extract_matrix(model.feature_kind, usable, model.layout)
    y_true = np.asarray([w.label for w in usable])
    y_pred = predict_many(model, X)
    labels = sorted(set(model.classes.tolist()) | set(y_true.tolist()))
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[index[int(t)], index[int(p)]] += 1
    confusion = ConfusionMatrix(labels=labels, counts=counts)
    structure = misclassification_structure(y_pred.tolist(), y_true.tolist())
    return EvalResult(
        accuracy=confusion.accuracy(),
        confusion=confusion,
        n_windows=len(usable),
        n_mixed_excluded=n_mixed,
        structure=structure,
    )


# ---------------------------------------------------------------------------
# Studies


@dataclass
class ExperimentReport:
    """Per-participant, per-feature-kind accuracy with diagnostics."""

    accuracies: dict[str, dict[str, float]] = field(default_factory=dict)
    details: dict[str, EvalResult] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def table(self) -> str:
        kinds = sorted({k for row in self.accuracies.values() for k in row})
        width = max((len(p) for p in self.accuracies), default=11)
        lines = ["Participant".ljust(width) + "".join(f"{k:>10}" for k in kinds)]
        for participant in sorted(self.accuracies):
            row = self.accuracies[participant]
            cells = "".join(
                f"{row[k]:>9.2f}%" if k in row else " " * 10 for k in kinds
            )
            lines.append(participant.ljust(width) + cells)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "accuracies": self.accuracies,
            "details": {p: r.to_dict() for p, r in self.details.items()},
            "skipped": self.skipped,
        }


def run_fv_comparison(
    dataset_root: str | Path,
    feature_kinds: SequenceT[str] = ("fv1", "fv2", "fv3"),
    split: SplitSpec | None = None,
    fusion: FusionConfig = FusionConfig(),
    shrinkage: float = 1e-3,
    pattern: str = "[Pp]*",
) -> ExperimentReport:
    """Train/test every participant session under each feature kind.

    Participant sessions are ``<root>/<name>.json`` or ``.csv`` matching
    ``pattern``; unloadable files are skipped with a warning. Details
    (confusion, structure) are kept for the last feature kind evaluated.
    """
    root = Path(dataset_root)
    report = ExperimentReport()
    paths = sorted(
        p for p in list(root.glob(pattern + ".json")) + list(root.glob(pattern + ".csv"))
        if not any(tag in p.stem.lower() for tag in ("_sae", "_mae"))
    )
    for path in paths:
        name = path.stem
        try:
            rec = load_recording(path, validate="none")
        except DataError as exc:
            warnings.warn(f"skipping {path.name}: {exc}", stacklevel=2)
            report.skipped.append(name)
            continue
        report.accuracies[name] = {}
        for kind in feature_kinds:
            model, test_windows = train_session(
                rec, split=split, feature_kind=kind, fusion=fusion,
                shrinkage=shrinkage, learn_amplitude=False,
            )
            result = evaluate(model, test_windows)
            report.accuracies[name][kind] = result.accuracy
            report.details[name] = result
    return report


@dataclass
class AmplitudeStudy:
    """Single- vs multi-amplitude training on a varying-amplitude test."""

    sae_accuracy: float
    mae_accuracy: float
    sae_structure: MisclassStructure
    mae_structure: MisclassStructure

    def to_dict(self) -> dict:
        return {
            "sae_accuracy_pct": self.sae_accuracy,
            "mae_accuracy_pct": self.mae_accuracy,
            "sae_structure": self.sae_structure.to_dict(),
            "mae_structure": self.mae_structure.to_dict(),
        }


def run_amplitude_experiment(
    sae: SessionRecording,
    mae: SessionRecording,
    feature_kind: str = "fv3",
    fusion: FusionConfig = FusionConfig(),
    shrinkage: float = 1e-3,
) -> AmplitudeStudy:
    """Compare models trained on fixed vs varied motion amplitude.

    Both models are evaluated on the multi-amplitude session's test
    sequence. Error structure records how far misclassifications stay
    inside the harmless neutral class.
    """
    mae_model, mae_test = train_session(
        mae, feature_kind=feature_kind, fusion=fusion,
        shrinkage=shrinkage, learn_amplitude=False,
    )
    sae_model, _ = train_session(
        sae, feature_kind=feature_kind, fusion=fusion,
        shrinkage=shrinkage, learn_amplitude=False,
    )
    sae_result = evaluate(sae_model, mae_test)
    mae_result = evaluate(mae_model, mae_test)
    return AmplitudeStudy(
        sae_accuracy=sae_result.accuracy,
        mae_accuracy=mae_result.accuracy,
        sae_structure=sae_result.structure,
        mae_structure=mae_result.structure,
    )


@dataclass
class MultidayStudy:
    """Day-1 model vs per-day models across consecutive recording days."""

    day1_model_accuracy: list[float]
    dday_model_accuracy: list[float]

    def to_dict(self) -> dict:
        return {
            "day1_model_accuracy_pct": self.day1_model_accuracy,
            "dday_model_accuracy_pct": self.dday_model_accuracy,
        }

    def table(self) -> str:
        days = len(self.day1_model_accuracy)
        header = "Model      " + "".join(f"{f'day{d + 1}':>9}" for d in range(days))
        row1 = "day1 model " + "".join(f"{a:>8.2f}%" for a in self.day1_model_accuracy)
        row2 = "d-day model" + "".join(f"{a:>8.2f}%" for a in self.dday_model_accuracy)
        return "\n".join([header, row1, row2])


def run_multiday_experiment(
    day_sessions: SequenceT[SessionRecording],
    feature_kind: str = "fv3",
    fusion: FusionConfig = FusionConfig(),
    shrinkage: float = 1e-3,
) -> MultidayStudy:
    """Evaluate model staleness across consecutive days.

    Each day's session trains on its first two sequences and tests on
    its last. The day-1 model is evaluated on every day's test
    recording; each d-day model is evaluated on its own day.
    """
    if not day_sessions:
        raise DataError("no day sessions given")
    models = []
    tests = []
    for rec in day_sessions:
        model, test_windows = train_session(
            rec, feature_kind=feature_kind, fusion=fusion,
            shrinkage=shrinkage, learn_amplitude=False,
        )
        models.append(model)
        tests.append(test_windows)
    day1 = [evaluate(models[0], t).accuracy for t in tests]
    dday = [evaluate(m, t).accuracy for m, t in zip(models, tests)]
    return MultidayStudy(day1_model_accuracy=day1, dday_model_accuracy=dday)


# ---------------------------------------------------------------------------
# Run-all orchestration


def run_all(
    dataset_root: str | Path,
    out_dir: str | Path,
    fusion: FusionConfig = FusionConfig(),
    shrinkage: float = 1e-3,
) -> dict:
    """Run every study the dataset directory supports; write reports.

    Looks for participant sessions (``P*.json``), amplitude pairs
    (``*_sae.json`` + ``*_mae.json``), and day sessions (``day<n>.json``).
    Writes ``report.json``, a text table, and per-participant confusion
    CSVs into ``out_dir``; returns the combined report dict.
    """
    root = Path(dataset_root)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    combined: dict = {}

    report = run_fv_comparison(root, fusion=fusion, shrinkage=shrinkage)
    if report.accuracies:
        combined["fv_comparison"] = report.to_dict()
        (out / "fv_table.txt").write_text(report.table() + "\n", encoding="utf-8")
        for name, result in report.details.items():
            result.confusion.write_csv(out / f"confusion_{name}.csv")

    for sae_path in sorted(root.glob("*_sae.json")):
        mae_path = sae_path.with_name(sae_path.name.replace("_sae", "_mae"))
        if not mae_path.exists():
            warnings.warn(f"{sae_path.name} has no matching multi-amplitude session")
            continue
        study = run_amplitude_experiment(
            load_recording(sae_path, validate="none"),
            load_recording(mae_path, validate="none"),
            fusion=fusion, shrinkage=shrinkage,
        )
        combined.setdefault("amplitude", {})[sae_path.stem.replace("_sae", "")] = (
            study.to_dict()
        )

    day_paths = sorted(root.glob("day*.json"), key=lambda p: p.stem)
    if day_paths:
        days = [load_recording(p, validate="none") for p in day_paths]
        study = run_multiday_experiment(days, fusion=fusion, shrinkage=shrinkage)
        combined["multiday"] = study.to_dict()
        (out / "multiday_table.txt").write_text(study.table() + "\n", encoding="utf-8")

    (out / "report.json").write_text(
        json.dumps(combined, indent=2), encoding="utf-8"
    )
    return combined
