"""Sensor fusion: raw 9-axis samples to calibrated pitch/roll/yaw.

Conventions (fixed throughout the package):

* World frame: z up, x toward magnetic north. Body attitude is the
  intrinsic z-y-x rotation Rz(yaw)·Ry(pitch)·Rx(roll) from body to world.
* A level, stationary sensor reads acc = (0, 0, 1) g and, ignoring
  magnetic dip, mag ∝ (1, 0, k).
* Angles are degrees. Pitch lies in [-90, 90]; roll and yaw are wrapped
  to (-180, 180].
* Gyro axes map gyro_x → roll rate, gyro_y → pitch rate, gyro_z → yaw
  rate, in degrees/second.

The filter blends gyro-integrated angles (weight ``alpha``) with the
instantaneous accelerometer/magnetometer angles (weight ``1 - alpha``),
taking the shortest angular path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CalibrationError,
    UndefinedAttitudeError,
    UndefinedHeadingError,
)

DEFAULT_ALPHA = 0.98
DEFAULT_CALIB_TICKS = 60
DEFAULT_GIMBAL_GUARD_DEG = 85.0

# Flags attached to OrientationFrame when the filter degrades.
FLAG_ACCEL_FALLBACK = "accel_fallback"   # zero accel: pitch/roll from gyro only
FLAG_MAG_FALLBACK = "mag_fallback"       # zero mag: yaw from gyro only
FLAG_GIMBAL_GUARD = "gimbal_guard"       # |pitch| beyond guard: yaw held on gyro
FLAG_GAP = "gap"                         # sample gap: previous raw sample reused


def wrap_deg(angle: float) -> float:
    """Wrap an angle in degrees to (-180, 180]."""
    a = (angle + 180.0) % 360.0 - 180.0
    return 180.0 if a == -180.0 else a


def shortest_diff_deg(a: float, b: float) -> float:
    """Signed shortest angular distance a - b, in (-180, 180]."""
    return wrap_deg(a - b)


def accel_angles(acc: Sequence[float]) -> tuple[float, float]:
    """Pitch and roll, in degrees, from an accelerometer gravity reading.

    pitch = atan2(-acc_x, sqrt(acc_y² + acc_z²)), roll = atan2(acc_y, acc_z).

    Raises:
        UndefinedAttitudeError: if the vector is (numerically) zero.
    """
    ax, ay, az = float(acc[0]), float(acc[1]), float(acc[2])
    if ax * ax + ay * ay + az * az < 1e-24:
        raise UndefinedAttitudeError("zero accelerometer vector")
    pitch = math.degrees(math.atan2(-ax, math.hypot(ay, az)))
    roll = math.degrees(math.atan2(ay, az))
    return pitch, roll


def mag_yaw(mag: Sequence[float], pitch: float, roll: float) -> float:
    """Tilt-compensated heading, in degrees, from a magnetometer reading.

    The body-frame field is de-rotated into the level frame using the
    current pitch and roll, then yaw = atan2(-m_y_level, m_x_level).

    Raises:
        UndefinedHeadingError: if the vector is (numerically) zero.
    """
    mx, my, mz = float(mag[0]), float(mag[1]), float(mag[2])
    norm = math.sqrt(mx * mx + my * my + mz * mz)
    if norm < 1e-12:
        raise UndefinedHeadingError("zero magnetometer vector")
    mx, my, mz = mx / norm, my / norm, mz / norm
    p = math.radians(pitch)
    r = math.radians(roll)
    cp, sp = math.cos(p), math.sin(p)
    cr, sr = math.cos(r), math.sin(r)
    # Level-frame components of the field: Ry(pitch) · Rx(roll) · m.
    x_level = mx * cp + my * sr * sp + mz * cr * sp
    y_level = my * cr - mz * sr
    return math.degrees(math.atan2(-y_level, x_level))


@dataclass(frozen=True)
class OrientationFrame:
    """Fused orientation of one sensor at one tick, in degrees."""

    sensor_id: int
    tick: int
    pitch: float
    roll: float
    yaw: float
    flags: tuple[str, ...] = ()

    def angles(self) -> tuple[float, float, float]:
        return (self.pitch, self.roll, self.yaw)


@dataclass(frozen=True)
class NeutralOffset:
    """Per-sensor neutral-pose angles subtracted during operation."""

    offsets: Mapping[int, tuple[float, float, float]]

    def for_sensor(self, sensor_id: int) -> tuple[float, float, float]:
        return self.offsets[sensor_id]

    @staticmethod
    def zero(sensor_ids: Iterable[int]) -> "NeutralOffset":
        return NeutralOffset({s: (0.0, 0.0, 0.0) for s in sensor_ids})


@dataclass
class ComplementaryFilter:
    """First-order complementary filter for one sensor stream.

    State is the current fused (pitch, roll, yaw); it bootstraps from the
    first sample's accelerometer/magnetometer angles unless an initial
    state is given. One instance owns one sensor stream; instances share
    nothing.

    Attributes:
        alpha: gyro blend weight in [0, 1]. 0 passes the instantaneous
            measurement through; 1 integrates the gyro only.
        dt: sample period in seconds.
        gimbal_guard_deg: |pitch| beyond which yaw holds its
            gyro-integrated value (tilt compensation ill-conditioned).
    """

    alpha: float = DEFAULT_ALPHA
    dt: float = 1.0 / 60.0
    gimbal_guard_deg: float = DEFAULT_GIMBAL_GUARD_DEG
    sensor_id: int = 0
    initial: tuple[float, float, float] | None = None
    _pitch: float = field(default=0.0, init=False, repr=False)
    _roll: float = field(default=0.0, init=False, repr=False)
    _yaw: float = field(default=0.0, init=False, repr=False)
    _started: bool = field(default=False, init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.initial is not None:
            self._pitch, self._roll, self._yaw = self.initial
            self._started = True

    @property
    def state(self) -> tuple[float, float, float]:
        return (self._pitch, self._roll, self._yaw)

    def step(self, tick: int, acc, gyro, mag) -> OrientationFrame:
        """Advance the filter by one sample and return the fused frame.

        A zero accelerometer falls back to pure gyro integration for
        pitch/roll this tick (flagged); a zero magnetometer does the same
        for yaw. Pitch is clamped to [-90, 90], roll/yaw wrapped.
        """
        flags: list[str] = []

        if not self._started:
            # Bootstrap from the instantaneous measurement.
            try:
                self._pitch, self._roll = accel_angles(acc)
            except UndefinedAttitudeError:
                flags.append(FLAG_ACCEL_FALLBACK)
            try:
                self._yaw = mag_yaw(mag, self._pitch, self._roll)
            except UndefinedHeadingError:
                flags.append(FLAG_MAG_FALLBACK)
            self._started = True
            return OrientationFrame(
                self.sensor_id, tick, self._pitch, self._roll, self._yaw,
                tuple(flags),
            )

        a = self.alpha
        dt = self.dt
        pitch_pred = self._pitch + float(gyro[1]) * dt
        roll_pred = wrap_deg(self._roll + float(gyro[0]) * dt)
        yaw_pred = wrap_deg(self._yaw + float(gyro[2]) * dt)

        try:
            pitch_meas, roll_meas = accel_angles(acc)
        except UndefinedAttitudeError:
            flags.append(FLAG_ACCEL_FALLBACK)
            pitch_new, roll_new = pitch_pred, roll_pred
        else:
            pitch_new = pitch_pred + (1.0 - a) * shortest_diff_deg(pitch_meas, pitch_pred)
            roll_new = wrap_deg(roll_pred + (1.0 - a) * shortest_diff_deg(roll_meas, roll_pred))
        pitch_new = min(90.0, max(-90.0, pitch_new))

        if abs(pitch_new) > self.gimbal_guard_deg:
            flags.append(FLAG_GIMBAL_GUARD)
            yaw_new = yaw_pred
        else:
            try:
                yaw_meas = mag_yaw(mag, pitch_new, roll_new)
            except UndefinedHeadingError:
                flags.append(FLAG_MAG_FALLBACK)
                yaw_new = yaw_pred
            else:
                yaw_new = wrap_deg(yaw_pred + (1.0 - a) * shortest_diff_deg(yaw_meas, yaw_pred))

        self._pitch, self._roll, self._yaw = pitch_new, roll_new, yaw_new
        return OrientationFrame(
            self.sensor_id, tick, pitch_new, roll_new, yaw_new, tuple(flags)
        )

    def step_sample(self, sample) -> OrientationFrame:
        """Advance using an ImuSample-like object (acc/gyro/mag/tick)."""
        return self.step(sample.tick, sample.acc, sample.gyro, sample.mag)


def circular_mean_deg(angles: Sequence[float]) -> float:
    """Mean of angles in degrees on the circle, wrapped to (-180, 180]."""
    if len(angles) == 0:
        raise CalibrationError("no angles to average")
    s = sum(math.sin(math.radians(a)) for a in angles)
    c = sum(math.cos(math.radians(a)) for a in angles)
    return wrap_deg(math.degrees(math.atan2(s, c)))


def calibrate_neutral(
    frames_by_sensor: Mapping[int, Sequence[OrientationFrame]],
    calib_ticks: int = DEFAULT_CALIB_TICKS,
) -> NeutralOffset:
    """Estimate per-sensor neutral offsets from frames held at rest.

    Uses the per-angle circular mean over the first ``calib_ticks``
    frames of each sensor.

    Raises:
        CalibrationError: if any sensor has fewer than ``calib_ticks``
            frames.
    """
    if calib_ticks < 1:
        raise CalibrationError(f"calib_ticks must be >= 1, got {calib_ticks}")
    offsets: dict[int, tuple[float, float, float]] = {}
    for sensor_id, frames in frames_by_sensor.items():
        if len(frames) < calib_ticks:
            raise CalibrationError(
                f"sensor {sensor_id}: {len(frames)} frames < {calib_ticks} required"
            )
        head = frames[:calib_ticks]
        offsets[sensor_id] = (
            circular_mean_deg([f.pitch for f in head]),
            circular_mean_deg([f.roll for f in head]),
            circular_mean_deg([f.yaw for f in head]),
        )
    return NeutralOffset(offsets)


def apply_offset(frame: OrientationFrame, offset: NeutralOffset) -> OrientationFrame:
    """Subtract the neutral offset, wrapping each angle shortest-path."""
    p0, r0, y0 = offset.for_sensor(frame.sensor_id)
    return OrientationFrame(
        frame.sensor_id,
        frame.tick,
        shortest_diff_deg(frame.pitch, p0),
        shortest_diff_deg(frame.roll, r0),
        shortest_diff_deg(frame.yaw, y0),
        frame.flags,
    )


@dataclass(frozen=True)
class FusionConfig:
    """Knobs for the fusion stage. Config keys: ``fusion.alpha``,
    ``fusion.calib_ticks``, ``fusion.pitch_gimbal_guard_deg``."""

    alpha: float = DEFAULT_ALPHA
    calib_ticks: int = DEFAULT_CALIB_TICKS
    gimbal_guard_deg: float = DEFAULT_GIMBAL_GUARD_DEG


@dataclass
class FusedSequence:
    """Batch fusion output for one sequence.

    ``angles`` holds calibrated (offset-subtracted) pitch/roll/yaw per
    tick and sensor, shape (T, S, 3); ``gyro`` the matching raw rates.
    Windowing starts at ``calib_ticks`` so streaming and offline paths
    see identical data.
    """

    sensor_ids: tuple[int, ...]
    angles: np.ndarray
    gyro: np.ndarray
    offset: NeutralOffset
    calib_ticks: int


def fuse_sequence(
    samples_by_sensor: Mapping[int, np.ndarray],
    sensor_ids: Sequence[int],
    sample_rate_hz: float,
    config: FusionConfig = FusionConfig(),
) -> FusedSequence:
    """Fuse and calibrate one sequence of raw per-sensor sample arrays.

    Args:
        samples_by_sensor: sensor id -> (T, 9) array with columns
            acc_xyz, gyro_xyz, mag_xyz.
        sensor_ids: ordered sensor ids (first one is the primary sensor).
        sample_rate_hz: sampling rate; dt = 1 / rate.
        config: fusion parameters.

    Returns:
        FusedSequence with calibrated angles for every tick. The neutral
        offset is the circular mean of the first ``config.calib_ticks``
        fused frames per sensor (the rest pose); with ``calib_ticks`` 0
        no offset is subtracted.
    """
    dt = 1.0 / sample_rate_hz
    sensor_ids = tuple(sensor_ids)
    n_ticks = len(next(iter(samples_by_sensor.values())))
    raw_angles = np.empty((n_ticks, len(sensor_ids), 3), dtype=np.float64)
    gyro = np.empty_like(raw_angles)

    frames_head: dict[int, list[OrientationFrame]] = {s: [] for s in sensor_ids}
    for si, sensor_id in enumerate(sensor_ids):
        rows = samples_by_sensor[sensor_id]
        filt = ComplementaryFilter(
            alpha=config.alpha,
            dt=dt,
            gimbal_guard_deg=config.gimbal_guard_deg,
            sensor_id=sensor_id,
        )
        for t in range(n_ticks):
            row = rows[t]
            frame = filt.step(t, row[0:3], row[3:6], row[6:9])
            raw_angles[t, si, 0] = frame.pitch
            raw_angles[t, si, 1] = frame.roll
            raw_angles[t, si, 2] = frame.yaw
            if t < config.calib_ticks:
                frames_head[sensor_id].append(frame)
        gyro[:, si, :] = rows[:, 3:6]

    if config.calib_ticks > 0:
        offset = calibrate_neutral(frames_head, config.calib_ticks)
    else:
        offset = NeutralOffset.zero(sensor_ids)

    angles = np.empty_like(raw_angles)
    for si, sensor_id in enumerate(sensor_ids):
        off = np.asarray(offset.for_sensor(sensor_id))
        d = raw_angles[:, si, :] - off
        angles[:, si, :] = (d + 180.0) % 360.0 - 180.0
        angles[:, si, :][angles[:, si, :] == -180.0] = 180.0
    return FusedSequence(sensor_ids, angles, gyro, offset, config.calib_ticks)
