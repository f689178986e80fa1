"""Labeled multi-sensor IMU recordings: schema, file I/O, splits, synthesis.

A recording is a *session* of several *sequences*. Within a sequence each
motion class is held for about five seconds, three times, separated by
returns to the neutral pose (class 0). Per-tick labels mark the
instructed class.

Canonical formats:

* JSON: ``{sample_rate_hz, class_count, sensor_layout: [{id, location}],
  sequences: [{labels: [...], sensors: {"<id>": [[9 floats] ...]}}],
  meta: {...}}``
* CSV: header ``tick,sensor_id,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z,
  mag_x,mag_y,mag_z,label,sequence``: one row per tick per sensor,
  UTF-8, LF, ``.`` decimal point.

Units are physical: acceleration in g, angular rate in degrees/second,
magnetometer in normalized (unit-free) gauss. An import mapping config
adapts foreign CSVs (column renames, raw-count scale factors, or a
fused-angles column mode).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence as SequenceT

import numpy as np

from .errors import (
    AlignmentError,
    ParseError,
    SchemaError,
    SplitSpecError,
    ValidationError,
)

MAX_SENSORS = 6
MAX_CLASSES = 9  # neutral plus up to eight motion classes
NEUTRAL = 0

CSV_HEADER = [
    "tick", "sensor_id",
    "acc_x", "acc_y", "acc_z",
    "gyro_x", "gyro_y", "gyro_z",
    "mag_x", "mag_y", "mag_z",
    "label", "sequence",
]

# World magnetic field used when synthesizing magnetometer readings:
# unit vector toward magnetic north with a 30-degree downward dip.
MAG_WORLD = (math.cos(math.radians(30.0)), 0.0, -math.sin(math.radians(30.0)))

_DEFAULT_LOCATIONS = (
    "head", "right_shoulder", "left_shoulder",
    "right_wrist", "left_wrist", "right_ankle",
)


@dataclass(frozen=True)
class ImuSample:
    """One 9-axis reading from one sensor at one tick.

    acc is in g, gyro in degrees/second, mag in normalized gauss.
    """

    sensor_id: int
    tick: int
    acc: tuple[float, float, float]
    gyro: tuple[float, float, float]
    mag: tuple[float, float, float]

    def __post_init__(self) -> None:
        if not 1 <= self.sensor_id <= MAX_SENSORS:
            raise ValidationError(
                f"sensor_id must be in [1, {MAX_SENSORS}], got {self.sensor_id}"
            )
        for vec in (self.acc, self.gyro, self.mag):
            if len(vec) != 3 or not all(math.isfinite(v) for v in vec):
                raise ValidationError(f"non-finite or malformed vector {vec!r}")


@dataclass(frozen=True)
class SensorInfo:
    """A sensor id plus a body-location tag."""

    id: int
    location: str = "unknown"


@dataclass
class Sequence:
    """One pass of the recording protocol.

    samples maps sensor id to a (T, 9) float array with columns
    acc_xyz, gyro_xyz, mag_xyz; labels is a (T,) int array.
    """

    samples: dict[int, np.ndarray]
    labels: np.ndarray

    @property
    def n_ticks(self) -> int:
        return len(self.labels)

    def sample_at(self, sensor_id: int, tick: int) -> ImuSample:
        row = self.samples[sensor_id][tick]
        return ImuSample(
            sensor_id, tick,
            tuple(row[0:3]), tuple(row[3:6]), tuple(row[6:9]),
        )

    def tick_samples(self, tick: int) -> dict[int, ImuSample]:
        return {sid: self.sample_at(sid, tick) for sid in self.samples}


@dataclass
class SessionRecording:
    """A labeled multi-sensor recording session."""

    sample_rate_hz: float
    class_count: int
    sensor_layout: list[SensorInfo]
    sequences: list[Sequence]
    meta: dict = field(default_factory=dict)

    @property
    def sensor_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.sensor_layout)


@dataclass(frozen=True)
class SplitSpec:
    """Which 1-based sequence indices go to train and test."""

    train: frozenset[int] = frozenset({1, 2})
    test: frozenset[int] = frozenset({3})

    def validate(self, n_sequences: int) -> None:
        if self.train & self.test:
            raise SplitSpecError(
                f"train and test sequences overlap: {sorted(self.train & self.test)}"
            )
        for idx in self.train | self.test:
            if not 1 <= idx <= n_sequences:
                raise SplitSpecError(
                    f"sequence index {idx} out of range [1, {n_sequences}]"
                )


def split_session(
    rec: SessionRecording, spec: SplitSpec | None = None
) -> tuple[list[Sequence], list[Sequence]]:
    """Split a session into train and test sequences.

    The default spec trains on sequences 1 and 2 and tests on sequence 3.
    """
    spec = spec or SplitSpec()
    spec.validate(len(rec.sequences))
    train = [rec.sequences[i - 1] for i in sorted(spec.train)]
    test = [rec.sequences[i - 1] for i in sorted(spec.test)]
    return train, test


def label_runs(labels: np.ndarray) -> list[tuple[int, int, int]]:
    """Maximal constant-label runs as (label, start, end) with end exclusive."""
    runs: list[tuple[int, int, int]] = []
    if len(labels) == 0:
        return runs
    start = 0
    for t in range(1, len(labels)):
        if labels[t] != labels[start]:
            runs.append((int(labels[start]), start, t))
            start = t
    runs.append((int(labels[start]), start, len(labels)))
    return runs


# ---------------------------------------------------------------------------
# Validation


def protocol_issues(
    seq: Sequence,
    sample_rate_hz: float,
    class_count: int,
    motion_s: float = 5.0,
    tolerance: float = 0.5,
    reps: int = 3,
) -> list[str]:
    """Check that a sequence roughly follows the recording protocol.

    Motion runs should last about ``motion_s`` seconds (within the given
    relative tolerance), be separated by neutral runs, and each
    non-neutral class should appear ``reps`` times. Returns a list of
    human-readable issues; empty means conforming.
    """
    issues: list[str] = []
    runs = label_runs(seq.labels)
    lo = motion_s * (1.0 - tolerance) * sample_rate_hz
    hi = motion_s * (1.0 + tolerance) * sample_rate_hz
    counts = {c: 0 for c in range(1, class_count)}
    prev_label = None
    for lab, start, end in runs:
        if lab != NEUTRAL:
            counts[lab] = counts.get(lab, 0) + 1
            if not lo <= end - start <= hi:
                issues.append(
                    f"class {lab} run at tick {start} lasts {end - start} ticks, "
                    f"expected about {motion_s * sample_rate_hz:.0f}"
                )
            if prev_label is not None and prev_label != NEUTRAL:
                issues.append(
                    f"classes {prev_label} and {lab} adjacent at tick {start} "
                    "without a neutral run between them"
                )
        prev_label = lab
    for cls, n in counts.items():
        if n != reps:
            issues.append(f"class {cls} appears {n} times, expected {reps}")
    return issues


def validate_recording(
    rec: SessionRecording,
    expect_sequences: int | None = 3,
    protocol: str = "warn",
    motion_s: float = 5.0,
) -> None:
    """Validate structural invariants of a recording.

    Args:
        rec: recording to check.
        expect_sequences: required sequence count, or None to accept any
            (partial loads).
        protocol: "strict" raises on protocol-shape deviations, "warn"
            emits warnings (human recordings drift), "none" skips the
            check.
        motion_s: nominal protocol run length for the shape check.

    Raises:
        ValidationError / AlignmentError / SchemaError on violations.
    """
    if not 2 <= rec.class_count <= MAX_CLASSES:
        raise ValidationError(
            f"class_count must be in [2, {MAX_CLASSES}], got {rec.class_count}"
        )
    if not rec.sensor_layout:
        raise ValidationError("empty sensor layout")
    ids = [s.id for s in rec.sensor_layout]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate sensor ids in layout: {ids}")
    for sid in ids:
        if not 1 <= sid <= MAX_SENSORS:
            raise ValidationError(f"sensor id {sid} outside [1, {MAX_SENSORS}]")
    if not rec.sequences:
        raise ValidationError("recording has no sequences")
    if expect_sequences is not None and len(rec.sequences) != expect_sequences:
        raise ValidationError(
            f"expected {expect_sequences} sequences, found {len(rec.sequences)}"
        )
    if rec.sample_rate_hz <= 0:
        raise ValidationError(f"sample_rate_hz must be positive, got {rec.sample_rate_hz}")

    for qi, seq in enumerate(rec.sequences, start=1):
        n = seq.n_ticks
        if n == 0:
            raise ValidationError(f"sequence {qi} is empty")
        if set(seq.samples) != set(ids):
            raise AlignmentError(
                f"sequence {qi}: sensors {sorted(seq.samples)} do not match "
                f"layout {sorted(ids)}"
            )
        for sid, arr in seq.samples.items():
            if arr.shape != (n, 9):
                raise AlignmentError(
                    f"sequence {qi} sensor {sid}: shape {arr.shape}, "
                    f"expected ({n}, 9)"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"sequence {qi} sensor {sid}: non-finite samples")
        labs = np.asarray(seq.labels)
        if labs.min() < 0 or labs.max() >= rec.class_count:
            raise SchemaError(
                f"sequence {qi}: label outside [0, {rec.class_count - 1}]"
            )
        if protocol != "none":
            issues = protocol_issues(seq, rec.sample_rate_hz, rec.class_count, motion_s)
            if issues:
                msg = f"sequence {qi} deviates from protocol: " + "; ".join(issues[:4])
                if protocol == "strict":
                    raise ValidationError(msg)
                warnings.warn(msg, stacklevel=2)


# ---------------------------------------------------------------------------
# Import mapping


@dataclass
class ImportMapping:
    """Adapter config for foreign CSV files.

    Flat ``key=value`` file. Keys:
        ``column.<canonical>=<actual>`` renames a column;
        ``scale.acc|scale.gyro|scale.mag=<f>`` multiplies raw counts into
        physical units; ``mode=raw|angles`` selects the import path
        (``angles`` expects pitch/roll/yaw columns and resynthesizes raw
        streams consistent with them); ``sample_rate_hz=<f>``.
    """

    columns: dict[str, str] = field(default_factory=dict)
    scale_acc: float = 1.0
    scale_gyro: float = 1.0
    scale_mag: float = 1.0
    mode: str = "raw"
    sample_rate_hz: float | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ImportMapping":
        m = cls()
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", line=lineno)
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key.startswith("column."):
                m.columns[key[len("column."):]] = value
            elif key == "scale.acc":
                m.scale_acc = float(value)
            elif key == "scale.gyro":
                m.scale_gyro = float(value)
            elif key == "scale.mag":
                m.scale_mag = float(value)
            elif key == "mode":
                if value not in ("raw", "angles"):
                    raise ParseError(f"mode must be raw or angles, got {value!r}", lineno)
                m.mode = value
            elif key == "sample_rate_hz":
                m.sample_rate_hz = float(value)
            else:
                raise ParseError(f"unknown mapping key {key!r}", line=lineno)
        return m

    def actual(self, canonical: str) -> str:
        return self.columns.get(canonical, canonical)


def angles_to_raw(angles_deg: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """Synthesize raw 9-axis samples consistent with an angle trajectory.

    Inverse of the fusion stage: given absolute (pitch, roll, yaw) per
    tick, emits the gravity vector the accelerometer would read, the
    world field rotated into the body frame, and per-tick finite-
    difference angular rates. Feeding the result back through the
    complementary filter reproduces the input angles to float precision.

    Args:
        angles_deg: (T, 3) array of [pitch, roll, yaw] in degrees.
        sample_rate_hz: sampling rate for the rate computation.

    Returns:
        (T, 9) array with columns acc_xyz, gyro_xyz, mag_xyz.
    """
    angles_deg = np.asarray(angles_deg, dtype=np.float64)
    pitch = np.radians(angles_deg[:, 0])
    roll = np.radians(angles_deg[:, 1])
    yaw = np.radians(angles_deg[:, 2])
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    cy, sy = np.cos(yaw), np.sin(yaw)

    out = np.empty((len(angles_deg), 9), dtype=np.float64)
    # Gravity (0, 0, 1) seen from the body frame.
    out[:, 0] = -sp
    out[:, 1] = cp * sr
    out[:, 2] = cp * cr
    # World field through Rx(roll)^T Ry(pitch)^T Rz(yaw)^T.
    mN, _, mD = MAG_WORLD
    m1x, m1y, m1z = cy * mN, -sy * mN, mD
    m2x = cp * m1x - sp * m1z
    m2y = m1y
    m2z = sp * m1x + cp * m1z
    out[:, 6] = m2x
    out[:, 7] = cr * m2y + sr * m2z
    out[:, 8] = -sr * m2y + cr * m2z
    # Angular rates from wrapped backward differences.
    d = np.diff(angles_deg, axis=0)
    d = (d + 180.0) % 360.0 - 180.0
    rates = np.zeros_like(angles_deg)
    rates[1:] = d * sample_rate_hz
    out[:, 3] = rates[:, 1]  # gyro_x tracks roll
    out[:, 4] = rates[:, 0]  # gyro_y tracks pitch
    out[:, 5] = rates[:, 2]  # gyro_z tracks yaw
    return out


# ---------------------------------------------------------------------------
# JSON / CSV I/O


def _rec_to_dict(rec: SessionRecording) -> dict:
    return {
        "sample_rate_hz": rec.sample_rate_hz,
        "class_count": rec.class_count,
        "sensor_layout": [
            {"id": s.id, "location": s.location} for s in rec.sensor_layout
        ],
        "sequences": [
            {
                "labels": [int(x) for x in seq.labels],
                "sensors": {
                    str(sid): seq.samples[sid].tolist() for sid in sorted(seq.samples)
                },
            }
            for seq in rec.sequences
        ],
        "meta": rec.meta,
    }


def _rec_from_dict(obj: dict) -> SessionRecording:
    try:
        layout = [
            SensorInfo(int(s["id"]), str(s.get("location", "unknown")))
            for s in obj["sensor_layout"]
        ]
        sequences = []
        for seq_obj in obj["sequences"]:
            labels = np.asarray(seq_obj["labels"], dtype=np.int64)
            samples = {
                int(sid): np.asarray(rows, dtype=np.float64)
                for sid, rows in seq_obj["sensors"].items()
            }
            sequences.append(Sequence(samples=samples, labels=labels))
        return SessionRecording(
            sample_rate_hz=float(obj["sample_rate_hz"]),
            class_count=int(obj["class_count"]),
            sensor_layout=layout,
            sequences=sequences,
            meta=obj.get("meta", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed recording JSON: {exc}") from exc


def _detect_format(path: Path, format: str | None) -> str:
    if format is not None:
        if format not in ("csv", "json"):
            raise SchemaError(f"unknown format {format!r}")
        return format
    suffix = path.suffix.lower().lstrip(".")
    if suffix in ("csv", "json"):
        return suffix
    raise SchemaError(f"cannot infer format from {path.name!r}; pass format=")


def save_recording(
    rec: SessionRecording, path: str | Path, format: str | None = None
) -> None:
    """Write a recording to disk in the canonical JSON or CSV format.

    JSON round-trips bit-exactly; CSV preserves values to full float
    precision but drops layout locations and meta.
    """
    path = Path(path)
    fmt = _detect_format(path, format)
    validate_recording(rec, expect_sequences=None, protocol="none")
    if fmt == "json":
        path.write_text(json.dumps(_rec_to_dict(rec)), encoding="utf-8")
        return
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for qi, seq in enumerate(rec.sequences, start=1):
            for t in range(seq.n_ticks):
                lab = int(seq.labels[t])
                for sid in sorted(seq.samples):
                    row = seq.samples[sid][t]
                    writer.writerow(
                        [t, sid] + [repr(float(v)) for v in row] + [lab, qi]
                    )


def _load_csv(
    path: Path,
    mapping: ImportMapping | None,
    sample_rate_hz: float | None,
    class_count: int | None,
) -> SessionRecording:
    mapping = mapping or ImportMapping()
    rate = sample_rate_hz or mapping.sample_rate_hz or 60.0

    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("empty CSV file", line=1)

        if mapping.mode == "angles":
            needed = ["tick", "sensor_id", "pitch", "roll", "yaw", "label", "sequence"]
        else:
            needed = [c for c in CSV_HEADER]
        colmap = {canon: mapping.actual(canon) for canon in needed}
        missing = [a for a in colmap.values() if a not in reader.fieldnames]
        if missing:
            raise SchemaError(f"missing CSV columns: {missing}")

        # sequence -> tick -> sensor -> values
        per_seq: dict[int, dict[int, dict[int, list[float]]]] = {}
        labels_at: dict[int, dict[int, int]] = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                qi = int(row[colmap["sequence"]])
                tick = int(row[colmap["tick"]])
                sid = int(row[colmap["sensor_id"]])
                lab = int(row[colmap["label"]])
                if mapping.mode == "angles":
                    vals = [float(row[colmap[c]]) for c in ("pitch", "roll", "yaw")]
                else:
                    vals = [
                        float(row[colmap[c]])
                        for c in CSV_HEADER[2:11]
                    ]
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed row: {exc}", line=lineno) from exc
            per_seq.setdefault(qi, {}).setdefault(tick, {})[sid] = vals
            prev = labels_at.setdefault(qi, {}).get(tick)
            if prev is not None and prev != lab:
                raise ParseError(
                    f"conflicting labels {prev} and {lab} for tick {tick}", line=lineno
                )
            labels_at[qi][tick] = lab

    if not per_seq:
        raise ParseError("CSV contains no data rows", line=2)

    sensor_ids = sorted({sid for ticks in per_seq.values() for bysid in ticks.values() for sid in bysid})
    sequences = []
    for qi in sorted(per_seq):
        ticks = per_seq[qi]
        order = sorted(ticks)
        if order != list(range(len(order))):
            raise AlignmentError(
                f"sequence {qi}: ticks are not consecutive from 0"
            )
        n = len(order)
        labels = np.asarray([labels_at[qi][t] for t in order], dtype=np.int64)
        width = 3 if mapping.mode == "angles" else 9
        arrays = {sid: np.empty((n, width)) for sid in sensor_ids}
        for t in order:
            bysid = ticks[t]
            if set(bysid) != set(sensor_ids):
                missing_ids = sorted(set(sensor_ids) - set(bysid))
                raise AlignmentError(
                    f"sequence {qi} tick {t}: missing sensors {missing_ids}"
                )
            for sid, vals in bysid.items():
                arrays[sid][t] = vals
        if mapping.mode == "angles":
            samples = {
                sid: angles_to_raw(arrays[sid], rate) for sid in sensor_ids
            }
        else:
            samples = {}
            for sid in sensor_ids:
                arr = arrays[sid]
                arr[:, 0:3] *= mapping.scale_acc
                arr[:, 3:6] *= mapping.scale_gyro
                arr[:, 6:9] *= mapping.scale_mag
                samples[sid] = arr
        sequences.append(Sequence(samples=samples, labels=labels))

    n_classes = class_count or int(max(seq.labels.max() for seq in sequences)) + 1
    layout = [SensorInfo(sid, f"s{sid}") for sid in sensor_ids]
    return SessionRecording(
        sample_rate_hz=rate,
        class_count=n_classes,
        sensor_layout=layout,
        sequences=sequences,
    )


def load_recording(
    path: str | Path,
    format: str | None = None,
    mapping: ImportMapping | None = None,
    validate: str = "warn",
    expect_sequences: int | None = None,
    sample_rate_hz: float | None = None,
    class_count: int | None = None,
) -> SessionRecording:
    """Load a recording from the canonical JSON/CSV formats.

    Args:
        path: file to read; format inferred from the suffix unless given.
        mapping: optional ImportMapping for foreign CSVs.
        validate: protocol check mode ("strict", "warn", "none").
        expect_sequences: required sequence count, None to accept any.
        sample_rate_hz, class_count: CSV-only overrides (JSON carries
            both).

    Raises:
        ParseError / SchemaError / AlignmentError on malformed input.
    """
    path = Path(path)
    fmt = _detect_format(path, format)
    if fmt == "json":
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        rec = _rec_from_dict(obj)
    else:
        rec = _load_csv(path, mapping, sample_rate_hz, class_count)
    validate_recording(rec, expect_sequences=expect_sequences, protocol=validate)
    return rec


# ---------------------------------------------------------------------------
# Synthetic sessions


def _default_layout(sensor_count: int) -> list[SensorInfo]:
    if not 1 <= sensor_count <= MAX_SENSORS:
        raise ValidationError(
            f"sensor_count must be in [1, {MAX_SENSORS}], got {sensor_count}"
        )
    return [
        SensorInfo(i + 1, _DEFAULT_LOCATIONS[i]) for i in range(sensor_count)
    ]


def _class_targets(
    class_count: int,
    sensor_ids: SequenceT[int],
    amplitude_deg: float,
) -> tuple[dict[int, dict[int, np.ndarray]], dict[int, int]]:
    """Distinct relative-angle targets per class.

    The first six motion classes exercise one signed axis each on the
    primary sensor; later classes move secondary sensors, falling back to
    diagonal combinations when only one sensor is worn. Returns
    (targets, class_sensor) where targets[class][sensor] is a 3-vector of
    degrees and class_sensor names the sensor carrying the motion.
    """
    primary = sensor_ids[0]
    axis_dirs = [
        (1, 0, 0), (-1, 0, 0),
        (0, 1, 0), (0, -1, 0),
        (0, 0, 1), (0, 0, -1),
    ]
    extras = [
        (0.7071067811865476, 0.7071067811865476, 0.0),
        (0.7071067811865476, -0.7071067811865476, 0.0),
    ]
    targets: dict[int, dict[int, np.ndarray]] = {}
    class_sensor: dict[int, int] = {}
    for cls in range(1, class_count):
        per_sensor = {sid: np.zeros(3) for sid in sensor_ids}
        if cls <= 6:
            sid = primary
            direction = np.asarray(axis_dirs[cls - 1], dtype=np.float64)
        else:
            extra_idx = cls - 7  # 0 or 1
            if len(sensor_ids) > 1 + extra_idx:
                sid = sensor_ids[1 + extra_idx]
                direction = np.asarray(axis_dirs[0], dtype=np.float64)
            elif len(sensor_ids) > 1:
                sid = sensor_ids[1]
                direction = np.asarray(axis_dirs[2 + extra_idx], dtype=np.float64)
            else:
                sid = primary
                direction = np.asarray(extras[extra_idx], dtype=np.float64)
        per_sensor[sid] = direction * amplitude_deg
        targets[cls] = per_sensor
        class_sensor[cls] = sid
    return targets, class_sensor


def _rotation_about_random_axis(rng: np.random.Generator, angle_deg: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    a = math.radians(angle_deg)
    k = np.array([
        [0, -axis[2], axis[1]],
        [axis[2], 0, -axis[0]],
        [-axis[1], axis[0], 0],
    ])
    return np.eye(3) + math.sin(a) * k + (1 - math.cos(a)) * (k @ k)


def _spasm_profile(
    rng: np.random.Generator,
    length: int,
    sample_rate_hz: float,
) -> np.ndarray:
    """Continuous band-limited modulation in [-1, 1] modelling involuntary
    motion: low-pass filtered noise rescaled so its extremes touch the
    requested amplitude."""
    kernel_len = max(3, int(0.4 * sample_rate_hz))
    kernel = np.hanning(kernel_len)
    kernel /= kernel.sum()
    white = rng.normal(size=length + kernel_len)
    u = np.convolve(white, kernel, mode="same")[:length]
    peak = np.abs(u).max()
    if peak > 0:
        u = u / peak * rng.uniform(0.85, 1.0)
    return np.clip(u, -1.0, 1.0)


def synth_session(
    class_count: int = 9,
    sensor_count: int = 3,
    noise_deg: float = 0.5,
    spasm_deg: float = 0.0,
    seed: int = 0,
    spasm_class: int = 1,
    amplitudes: SequenceT[float] | None = None,
    amplitude_deg: float = 20.0,
    class_scale: Mapping[int, float] | None = None,
    target_rotation_deg: float = 0.0,
    target_bias_deg: float = 0.0,
    rotation_seed: int | None = None,
    shuffle_test_seq: bool = False,
    n_sequences: int = 3,
    sample_rate_hz: float = 60.0,
    motion_s: float = 5.0,
    transition_s: float = 0.5,
    reps: int = 3,
) -> SessionRecording:
    """Generate a protocol-shaped synthetic session with known ground truth.

    Raw acc/gyro/mag streams are synthesized to be exactly consistent
    with piecewise-constant per-class orientation targets joined by
    smooth cosine transitions centered on each label boundary, so the
    fusion stage reproduces the generated angle trajectories to float
    precision. Deterministic for a fixed seed.

    Args:
        class_count: total classes including neutral, in [2, 9].
        sensor_count: worn sensors, in [1, 6].
        noise_deg: std of Gaussian angle noise added per tick.
        spasm_deg: peak amplitude modulation, in degrees, applied along
            the motion direction during ``spasm_class`` runs.
        amplitudes: per-repetition amplitude factors (e.g. (0.4, 1.0,
            1.6) for a multi-amplitude session); None keeps 1.0.
        class_scale: optional per-class target scaling (low-range motion).
        target_rotation_deg: rotate every class target by a random small
            rotation of this magnitude (sensor-placement drift).
        target_bias_deg: shift every class target by a constant vector of
            this magnitude along a stable random direction
            (motion-execution drift; unlike a rotation it changes each
            class's distance to neutral).
        rotation_seed: seed the drift direction separately so a series of
            sessions can drift cumulatively along one axis; None draws
            the direction from the main stream.
        shuffle_test_seq: randomize the class/repetition order of the
            last sequence (held-out random-motion test recording).
        motion_s / transition_s: run length and total ramp duration.

    Returns:
        SessionRecording whose meta carries the ground truth: class
        targets, class->sensor map, seed, and tick counts.
    """
    if not 2 <= class_count <= MAX_CLASSES:
        raise ValidationError(
            f"class_count must be in [2, {MAX_CLASSES}] (neutral plus at most "
            f"{MAX_CLASSES - 1} motions), got {class_count}"
        )
    if noise_deg < 0 or spasm_deg < 0:
        raise ValidationError("noise_deg and spasm_deg must be >= 0")
    if amplitudes is not None and len(amplitudes) != reps:
        raise ValidationError(
            f"amplitudes needs one factor per repetition ({reps}), got {len(amplitudes)}"
        )
    layout = _default_layout(sensor_count)
    sensor_ids = [s.id for s in layout]

    rng = np.random.default_rng(seed)
    motion_ticks = int(round(motion_s * sample_rate_hz))
    ramp = int(round(transition_s * sample_rate_hz))
    half = ramp // 2
    if motion_ticks < 2 * half + 2:
        raise ValidationError("motion runs too short for the transition length")

    targets, class_sensor = _class_targets(class_count, sensor_ids, amplitude_deg)
    if class_scale:
        for cls, factor in class_scale.items():
            for sid in targets.get(int(cls), {}):
                targets[int(cls)][sid] = targets[int(cls)][sid] * float(factor)
    if target_rotation_deg or target_bias_deg:
        rot_rng = rng if rotation_seed is None else np.random.default_rng(rotation_seed)
        if target_rotation_deg:
            rot = _rotation_about_random_axis(rot_rng, target_rotation_deg)
            for cls in targets:
                for sid in targets[cls]:
                    targets[cls][sid] = rot @ targets[cls][sid]
        if target_bias_deg:
            direction = rot_rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            for cls in targets:
                sid = class_sensor[cls]
                targets[cls][sid] = targets[cls][sid] + direction * target_bias_deg

    base = {
        sid: np.array([
            rng.uniform(-5.0, 5.0),
            rng.uniform(-5.0, 5.0),
            rng.uniform(-60.0, 60.0),
        ])
        for sid in sensor_ids
    }
    amp_by_rep = list(amplitudes) if amplitudes is not None else [1.0] * reps

    sequences: list[Sequence] = []
    for qi in range(n_sequences):
        slots = [(cls, rep) for cls in range(1, class_count) for rep in range(reps)]
        if shuffle_test_seq and qi == n_sequences - 1:
            rng.shuffle(slots)
        runs: list[tuple[int, int, float]] = [(NEUTRAL, motion_ticks, 1.0)]
        for cls, rep in slots:
            runs.append((cls, motion_ticks, amp_by_rep[rep]))
            runs.append((NEUTRAL, motion_ticks, 1.0))
        n_ticks = sum(r[1] for r in runs)

        labels = np.empty(n_ticks, dtype=np.int64)
        rel = {sid: np.zeros((n_ticks, 3)) for sid in sensor_ids}
        boundaries: list[int] = []
        pos = 0
        for cls, length, amp in runs:
            labels[pos:pos + length] = cls
            if cls != NEUTRAL:
                for sid in sensor_ids:
                    rel[sid][pos:pos + length] = targets[cls][sid] * amp
            if pos > 0:
                boundaries.append(pos)
            pos += length

        # Cosine ramps centered on each label boundary; the first tick of
        # the incoming run sits just past the halfway point.
        for b in boundaries:
            for sid in sensor_ids:
                before = rel[sid][b - half - 1].copy()
                after = rel[sid][b + half].copy()
                for i in range(2 * half):
                    w = 0.5 * (1.0 - math.cos(math.pi * (i + 0.5) / (2 * half)))
                    rel[sid][b - half + i] = before + w * (after - before)

        if spasm_deg > 0:
            for cls, start, end in label_runs(labels):
                if cls != spasm_class:
                    continue
                sid = class_sensor[cls]
                direction = targets[cls][sid]
                norm = np.linalg.norm(direction)
                if norm == 0:
                    continue
                direction = direction / norm
                lo, hi = start + half, end - half
                if hi <= lo:
                    continue
                u = _spasm_profile(rng, hi - lo, sample_rate_hz)
                rel[sid][lo:hi] += np.outer(u * spasm_deg, direction)

        samples: dict[int, np.ndarray] = {}
        for sid in sensor_ids:
            absolute = rel[sid] + base[sid]
            if noise_deg > 0:
                absolute = absolute + rng.normal(0.0, noise_deg, absolute.shape)
            samples[sid] = angles_to_raw(absolute, sample_rate_hz)
        sequences.append(Sequence(samples=samples, labels=labels))

    meta = {
        "source": "synthetic",
        "seed": int(seed),
        "noise_deg": float(noise_deg),
        "spasm_deg": float(spasm_deg),
        "spasm_class": int(spasm_class),
        "amplitude_deg": float(amplitude_deg),
        "amplitudes": [float(a) for a in amp_by_rep],
        "ticks_per_sequence": int(sequences[0].n_ticks),
        "motion_ticks": motion_ticks,
        "class_targets": {
            str(cls): {str(sid): [float(v) for v in vec] for sid, vec in per.items()}
            for cls, per in targets.items()
        },
        "class_sensors": {str(cls): int(sid) for cls, sid in class_sensor.items()},
        "base_orientation": {
            str(sid): [float(v) for v in vec] for sid, vec in base.items()
        },
    }
    rec = SessionRecording(
        sample_rate_hz=sample_rate_hz,
        class_count=class_count,
        sensor_layout=layout,
        sequences=sequences,
        meta=meta,
    )
    validate_recording(
        rec, expect_sequences=n_sequences, protocol="strict", motion_s=motion_s
    )
    return rec
