"""Real-time streaming engine: samples in, device commands out.

One pipeline instance consumes tick-aligned samples from all worn
sensors, fuses them, holds an 8-deep ring buffer of calibrated frames,
and emits one classified, amplitude-scaled command per tick once the
buffer is full (7-sample overlap makes the window rate equal the sample
rate). The first ``calib_ticks`` ticks are consumed to estimate the
neutral offset and produce no output.

The pipeline is single-threaded and deterministic: one producer feeds
``step``; downstream consumers receive immutable CommandOutput records.
"""

from __future__ import annotations

import csv
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence as SequenceT

import numpy as np

from .dataset_io import ImuSample, SessionRecording
from .errors import LayoutError, MappingError, ValidationError
from .features import (
    DEFAULT_WINDOW,
    Window,
    extract,
    gamma_from_angles,
    prop_output,
)
from .fusion import (
    FLAG_GAP,
    ComplementaryFilter,
    FusionConfig,
    NeutralOffset,
    OrientationFrame,
    apply_offset,
    calibrate_neutral,
)
from .lda import LdaModel, predict

DEFAULT_V_MAX_CM_S = 20.0


class Command(str, Enum):
    """Joystick-style device commands."""

    F = "F"
    B = "B"
    R = "R"
    L = "L"
    RR = "Rr"
    LR = "Lr"
    B1 = "B1"
    B2 = "B2"
    NEUTRAL = "NEUTRAL"


BUTTONS = (Command.B1, Command.B2)

# End-effector displacement direction per axis command (unit vectors).
DIRECTIONS: dict[Command, tuple[float, float, float]] = {
    Command.F: (0.0, -1.0, 0.0),
    Command.B: (0.0, 1.0, 0.0),
    Command.R: (-1.0, 0.0, 0.0),
    Command.L: (1.0, 0.0, 0.0),
    Command.RR: (0.0, 0.0, 1.0),
    Command.LR: (0.0, 0.0, -1.0),
}

_DEFAULT_ORDER = (
    Command.F, Command.B, Command.R, Command.L,
    Command.RR, Command.LR, Command.B1, Command.B2,
)


@dataclass
class CommandMapping:
    """Class-to-command table plus speed scaling.

    Must cover every class the model can predict; the neutral class maps
    to NEUTRAL. Buttons are edge-triggered (one event per entry into the
    class); axis commands are level-triggered and scale with nu * v_max.
    """

    table: dict[int, Command]
    v_max: float = DEFAULT_V_MAX_CM_S

    def __post_init__(self) -> None:
        if self.table.get(0, Command.NEUTRAL) is not Command.NEUTRAL:
            raise MappingError("class 0 must map to NEUTRAL")
        self.table.setdefault(0, Command.NEUTRAL)
        if self.v_max <= 0:
            raise ValidationError(f"v_max must be positive, got {self.v_max}")

    def command_for(self, cls: int) -> Command:
        try:
            return self.table[cls]
        except KeyError:
            raise MappingError(f"class {cls} has no command mapping") from None

    def validate_classes(self, classes: Iterable[int]) -> None:
        missing = [c for c in classes if c not in self.table]
        if missing:
            raise MappingError(f"classes {missing} have no command mapping")

    @staticmethod
    def default(classes: Iterable[int], v_max: float = DEFAULT_V_MAX_CM_S) -> "CommandMapping":
        """c1..c8 onto F, B, R, L, Rr, Lr, B1, B2; c0 onto NEUTRAL."""
        table: dict[int, Command] = {0: Command.NEUTRAL}
        for cls in sorted(int(c) for c in classes):
            if cls == 0:
                continue
            if cls > len(_DEFAULT_ORDER):
                raise MappingError(f"no default command for class {cls}")
            table[cls] = _DEFAULT_ORDER[cls - 1]
        return CommandMapping(table=table, v_max=v_max)


@dataclass(frozen=True)
class CommandOutput:
    """One pipeline emission: prediction, amplitude, device command.

    The command is NEUTRAL exactly when the predicted class is neutral.
    Button commands report their held state every window; button_event
    is True only on entry into the class (the click edge).
    """

    tick: int
    label: int
    nu: float
    command: Command
    velocity: float
    latency_ms: float
    timestamp_ms: float
    button_event: bool = False
    flags: tuple[str, ...] = ()


def map_command(
    cls: int,
    nu: float,
    mapping: CommandMapping,
    previous_cls: int | None = None,
) -> tuple[Command, float, bool]:
    """Resolve a prediction to (command, velocity, button_event).

    Axis commands are level-triggered and carry velocity nu * v_max
    while the class holds. Button commands carry zero velocity and raise
    button_event only on entry into the class (``previous_cls``
    differs), like clicking rather than holding a joystick button.
    """
    command = mapping.command_for(cls)
    if command is Command.NEUTRAL:
        return command, 0.0, False
    if command in BUTTONS:
        return command, 0.0, previous_cls != cls
    return command, nu * mapping.v_max, False


class _MajoritySmoother:
    """Mode of the last k predictions; ties keep the previous output."""

    def __init__(self, k: int):
        if k < 1:
            raise ValidationError(f"majority window must be >= 1, got {k}")
        self.k = k
        self._recent: deque[int] = deque(maxlen=k)
        self._last: int | None = None

    def push(self, cls: int) -> int:
        self._recent.append(cls)
        counts = Counter(self._recent).most_common()
        best = counts[0][1]
        tied = sorted(c for c, n in counts if n == best)
        if len(tied) > 1 and self._last in tied:
            out = self._last
        else:
            out = tied[0]
        self._last = out
        return out


def make_smoother(policy: str) -> Callable[[int], int]:
    """Build a per-prediction smoothing function.

    policy is "none" (identity, the default) or "majority:k".
    """
    if policy == "none":
        return lambda cls: cls
    if policy.startswith("majority:"):
        return _MajoritySmoother(int(policy.split(":", 1)[1])).push
    raise ValidationError(f"unknown smoothing policy {policy!r}")


def smooth(policy: str, stream: SequenceT[int]) -> list[int]:
    """Apply a smoothing policy to a whole prediction stream."""
    fn = make_smoother(policy)
    return [fn(c) for c in stream]


def max_consecutive_disagreements(
    predictions: SequenceT[int], reference: SequenceT[int]
) -> int:
    """Longest run of predictions that disagree with the reference."""
    if len(predictions) != len(reference):
        raise ValidationError(
            f"stream lengths differ: {len(predictions)} vs {len(reference)}"
        )
    worst = run = 0
    for p, r in zip(predictions, reference):
        run = run + 1 if p != r else 0
        worst = max(worst, run)
    return worst


@dataclass
class StreamStats:
    """Throughput and agreement statistics for one replayed stream."""

    windows: int = 0
    dropped_ticks: int = 0
    latencies_ms: list[float] = field(default_factory=list)
    predictions: list[int] = field(default_factory=list)
    reference: list[int] = field(default_factory=list)
    mixed_windows: int = 0
    correct_unmixed: int = 0
    total_unmixed: int = 0
    wall_time_s: float = 0.0
    sample_rate_hz: float = 60.0

    def latency_mean_ms(self) -> float:
        return float(np.mean(self.latencies_ms)) if self.latencies_ms else 0.0

    def latency_percentile_ms(self, q: float) -> float:
        return float(np.percentile(self.latencies_ms, q)) if self.latencies_ms else 0.0

    def accuracy(self) -> float | None:
        if self.total_unmixed == 0:
            return None
        return 100.0 * self.correct_unmixed / self.total_unmixed

    def max_run(self) -> int:
        return max_consecutive_disagreements(self.predictions, self.reference)

    def max_run_ms(self) -> float:
        return self.max_run() * 1000.0 / self.sample_rate_hz

    def to_dict(self) -> dict:
        return {
            "windows": self.windows,
            "dropped_ticks": self.dropped_ticks,
            "mixed_windows": self.mixed_windows,
            "accuracy_pct": self.accuracy(),
            "max_consecutive_misclassifications": self.max_run(),
            "max_consecutive_misclassifications_ms": self.max_run_ms(),
            "latency_mean_ms": self.latency_mean_ms(),
            "latency_p50_ms": self.latency_percentile_ms(50),
            "latency_p99_ms": self.latency_percentile_ms(99),
            "latency_max_ms": max(self.latencies_ms) if self.latencies_ms else 0.0,
            "wall_time_s": self.wall_time_s,
        }


class StreamingPipeline:
    """Fusion -> window -> features -> classifier -> command, per tick.

    Feed ``step`` one tick at a time with a sample per worn sensor. A
    missing sensor repeats its previous raw sample and flags the output
    (wireless gap policy). Outputs begin once calibration and the window
    buffer are complete.
    """

    def __init__(
        self,
        model: LdaModel,
        mapping: CommandMapping | None = None,
        sample_rate_hz: float = 60.0,
        fusion: FusionConfig = FusionConfig(),
        window: int = DEFAULT_WINDOW,
        overlap: int | None = None,
        smoothing: str = "none",
    ):
        self.model = model
        self.mapping = mapping or CommandMapping.default(model.classes)
        self.mapping.validate_classes(int(c) for c in model.classes)
        self.layout = model.layout
        self.sample_rate_hz = sample_rate_hz
        self.window = window
        self.stride = window - (overlap if overlap is not None else window - 1)
        if self.stride < 1:
            raise ValidationError(f"overlap {overlap} must be below window {window}")
        self.fusion_config = fusion
        self._filters = {
            sid: ComplementaryFilter(
                alpha=fusion.alpha,
                dt=1.0 / sample_rate_hz,
                gimbal_guard_deg=fusion.gimbal_guard_deg,
                sensor_id=sid,
            )
            for sid in self.layout.sensor_ids
        }
        self._calib_frames: dict[int, list[OrientationFrame]] = {
            sid: [] for sid in self.layout.sensor_ids
        }
        self.offset: NeutralOffset | None = (
            None if fusion.calib_ticks > 0 else NeutralOffset.zero(self.layout.sensor_ids)
        )
        self._angles: deque[np.ndarray] = deque(maxlen=window)
        self._gyro: deque[np.ndarray] = deque(maxlen=window)
        self._smoother = make_smoother(smoothing)
        self._last_raw: dict[int, ImuSample] = {}
        self._previous_cls: int | None = None
        self._seen = 0
        self._since_full = -1

    def step(self, tick: int, samples: Mapping[int, ImuSample]) -> CommandOutput | None:
        """Consume one tick of samples; emit a command once warmed up."""
        t0 = time.perf_counter()
        flags: list[str] = []
        angle_row = np.empty((len(self.layout.sensor_ids), 3))
        gyro_row = np.empty_like(angle_row)
        for si, sid in enumerate(self.layout.sensor_ids):
            sample = samples.get(sid)
            if sample is None:
                sample = self._last_raw.get(sid)
                if sample is None:
                    raise LayoutError(f"no sample for sensor {sid} at stream start")
                flags.append(FLAG_GAP)
            self._last_raw[sid] = sample
            frame = self._filters[sid].step(tick, sample.acc, sample.gyro, sample.mag)
            if self.offset is None:
                self._calib_frames[sid].append(frame)
            else:
                frame = apply_offset(frame, self.offset)
                angle_row[si] = frame.angles()
                gyro_row[si] = sample.gyro
            flags.extend(frame.flags)
        self._seen += 1

        if self.offset is None:
            if self._seen >= self.fusion_config.calib_ticks:
                self.offset = calibrate_neutral(
                    self._calib_frames, self.fusion_config.calib_ticks
                )
                self._calib_frames = {sid: [] for sid in self.layout.sensor_ids}
            return None

        self._angles.append(angle_row)
        self._gyro.append(gyro_row)
        if len(self._angles) < self.window:
            return None
        self._since_full += 1
        if self._since_full % self.stride:
            return None

        w = Window(
            start_tick=tick - self.window + 1,
            angles=np.stack(self._angles),
            gyro=np.stack(self._gyro),
            label=None,
        )
        x = extract(self.model.feature_kind, w, self.layout)
        cls = self._smoother(predict(self.model, x))

        nu = 0.0
        if cls != 0 and self.model.ranges is not None and cls in self.model.ranges.ranges:
            sid = self.model.ranges.class_sensor.get(cls, self.layout.sensor_ids[0])
            si = self.layout.sensor_ids.index(sid)
            gamma = float(gamma_from_angles(w.angles[:, si, :]).mean())
            nu = prop_output(gamma, cls, self.model.ranges)
        command, velocity, button_event = map_command(
            cls, nu, self.mapping, self._previous_cls
        )
        self._previous_cls = cls
        latency_ms = (time.perf_counter() - t0) * 1000.0
        return CommandOutput(
            tick=tick,
            label=cls,
            nu=nu,
            command=command,
            velocity=velocity,
            latency_ms=latency_ms,
            timestamp_ms=tick * 1000.0 / self.sample_rate_hz,
            button_event=button_event,
            flags=tuple(dict.fromkeys(flags)),
        )


class VirtualDevice:
    """Command sink integrating axis velocities into a 3-D position log."""

    def __init__(self, sample_rate_hz: float = 60.0):
        self.dt = 1.0 / sample_rate_hz
        self.position = np.zeros(3)
        self.trajectory: list[tuple[int, float, float, float]] = []
        self.button_events: list[tuple[int, Command]] = []

    def send(self, out: CommandOutput) -> None:
        if out.command in DIRECTIONS:
            self.position = self.position + np.asarray(DIRECTIONS[out.command]) * (
                out.velocity * self.dt
            )
        elif out.button_event:
            self.button_events.append((out.tick, out.command))
        self.trajectory.append((out.tick, *self.position))

    def write_log(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["tick", "x_cm", "y_cm", "z_cm"])
            writer.writerows(self.trajectory)


def write_command_log(outputs: SequenceT[CommandOutput], path: str | Path) -> None:
    """Write the per-window command log CSV."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["tick", "timestamp_ms", "class", "nu", "command", "velocity", "latency_ms"]
        )
        for o in outputs:
            writer.writerow(
                [o.tick, repr(o.timestamp_ms), o.label, repr(o.nu),
                 o.command.value, repr(o.velocity), repr(o.latency_ms)]
            )


def replay(
    recording: SessionRecording,
    model: LdaModel,
    mapping: CommandMapping | None = None,
    sequence_indices: SequenceT[int] | None = None,
    pace_hz: float = 0.0,
    fusion: FusionConfig = FusionConfig(),
    smoothing: str = "none",
    window: int = DEFAULT_WINDOW,
    overlap: int | None = None,
    log_path: str | Path | None = None,
    device: VirtualDevice | None = None,
) -> tuple[list[CommandOutput], StreamStats]:
    """Drive the streaming pipeline over a recorded session.

    Each selected sequence runs through a fresh pipeline (per-sequence
    calibration). ``pace_hz`` > 0 sleeps to replay in real time;
    0 replays as fast as possible; predictions are identical either
    way. Statistics compare each emitted class against the label at its
    emission tick; accuracy additionally excludes windows that span a
    label change.

    Raises:
        LayoutError: recording sensors do not match the model layout.
    """
    if tuple(recording.sensor_ids) != tuple(model.layout.sensor_ids):
        raise LayoutError(
            f"recording sensors {recording.sensor_ids} do not match model "
            f"layout {model.layout.sensor_ids}"
        )
    sequences = recording.sequences
    if sequence_indices is not None:
        sequences = [recording.sequences[i - 1] for i in sequence_indices]

    stats = StreamStats(sample_rate_hz=recording.sample_rate_hz)
    outputs: list[CommandOutput] = []
    started = time.perf_counter()
    period = 1.0 / pace_hz if pace_hz > 0 else 0.0
    for seq in sequences:
        pipe = StreamingPipeline(
            model,
            mapping,
            sample_rate_hz=recording.sample_rate_hz,
            fusion=fusion,
            window=window,
            overlap=overlap,
            smoothing=smoothing,
        )
        seq_start = time.perf_counter()
        for t in range(seq.n_ticks):
            out = pipe.step(t, seq.tick_samples(t))
            if out is not None:
                outputs.append(out)
                stats.windows += 1
                stats.latencies_ms.append(out.latency_ms)
                stats.predictions.append(out.label)
                ref = int(seq.labels[t])
                stats.reference.append(ref)
                window_labels = seq.labels[out.tick - pipe.window + 1: out.tick + 1]
                if (window_labels == window_labels[-1]).all():
                    stats.total_unmixed += 1
                    if out.label == ref:
                        stats.correct_unmixed += 1
                else:
                    stats.mixed_windows += 1
                if device is not None:
                    device.send(out)
            if period:
                next_due = seq_start + (t + 1) * period
                delay = next_due - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
    stats.wall_time_s = time.perf_counter() - started
    if log_path is not None:
        write_command_log(outputs, log_path)
    return outputs, stats
