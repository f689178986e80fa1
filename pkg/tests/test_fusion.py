import numpy as np
import pytest
from hypothesis import given, strategies as st

from bomi.errors import (
    CalibrationError,
    UndefinedAttitudeError,
    UndefinedHeadingError,
)
from bomi.fusion import (
    FLAG_ACCEL_FALLBACK,
    FLAG_GIMBAL_GUARD,
    ComplementaryFilter,
    FusionConfig,
    NeutralOffset,
    OrientationFrame,
    accel_angles,
    apply_offset,
    calibrate_neutral,
    circular_mean_deg,
    fuse_sequence,
    mag_yaw,
    wrap_deg,
)

from oracles import circular_mean, heading_from_mag, world_to_body

MAG_LEVEL = (1.0, 0.0, 0.0)


def frame(pitch, roll, yaw, sensor_id=1, tick=0):
    return OrientationFrame(sensor_id, tick, pitch, roll, yaw)


@given(st.floats(-1e6, 1e6), st.integers(-5, 5))
def test_wrap_deg_range_and_periodicity(a, k):
    w = wrap_deg(a)
    assert -180.0 < w <= 180.0
    assert wrap_deg(a + 360.0 * k) == pytest.approx(w, abs=1e-6)


def test_wrap_boundary_maps_to_positive_180():
    assert wrap_deg(180.0) == 180.0
    assert wrap_deg(-180.0) == 180.0
    assert wrap_deg(540.0) == 180.0


class TestAccelAngles:
    def test_gravity_along_z(self):
        assert accel_angles((0.0, 0.0, 1.0)) == pytest.approx((0.0, 0.0))

    def test_nose_down(self):
        pitch, roll = accel_angles((-1.0, 0.0, 0.0))
        assert pitch == pytest.approx(90.0)
        assert roll == pytest.approx(0.0)

    def test_rotated_gravity_inverts(self):
        acc = world_to_body((0, 0, 1), yaw=0.0, pitch=20.0, roll=-35.0)
        pitch, roll = accel_angles(acc)
        assert pitch == pytest.approx(20.0, abs=1e-9)
        assert roll == pytest.approx(-35.0, abs=1e-9)

    def test_zero_vector_rejected(self):
        with pytest.raises(UndefinedAttitudeError):
            accel_angles((0.0, 0.0, 0.0))

    def test_random_attitudes_match_rotation_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            pitch = rng.uniform(-89.0, 89.0)
            roll = rng.uniform(-179.0, 179.0)
            yaw = rng.uniform(-179.0, 179.0)
            acc = world_to_body((0, 0, 1), yaw, pitch, roll)
            got = accel_angles(acc)
            assert got[0] == pytest.approx(pitch, abs=1e-9)
            assert got[1] == pytest.approx(roll, abs=1e-9)


class TestMagYaw:
    def test_level_north(self):
        assert mag_yaw(MAG_LEVEL, 0.0, 0.0) == pytest.approx(0.0)

    def test_level_east_field(self):
        assert mag_yaw((0.0, 1.0, 0.0), 0.0, 0.0) == pytest.approx(-90.0)

    def test_tilted_matches_matrix_oracle(self):
        mag = world_to_body((0.9, 0.0, -0.4), yaw=37.0, pitch=25.0, roll=-40.0)
        got = mag_yaw(mag, 25.0, -40.0)
        assert got == pytest.approx(heading_from_mag(mag, 25.0, -40.0), abs=1e-9)
        assert got == pytest.approx(37.0, abs=1e-9)

    def test_zero_vector_rejected(self):
        with pytest.raises(UndefinedHeadingError):
            mag_yaw((0.0, 0.0, 0.0), 0.0, 0.0)

    def test_random_attitudes_recover_heading(self):
        rng = np.random.default_rng(11)
        field = (0.86, 0.0, -0.51)
        for _ in range(1000):
            pitch = rng.uniform(-80.0, 80.0)
            roll = rng.uniform(-179.0, 179.0)
            yaw = rng.uniform(-179.9, 179.9)
            mag = world_to_body(field, yaw, pitch, roll)
            assert mag_yaw(mag, pitch, roll) == pytest.approx(yaw, abs=1e-9)


class TestComplementaryFilter:
    @staticmethod
    def static_inputs():
        return (0.0, 0.0, 1.0), (0.0, 0.0, 0.0), MAG_LEVEL

    def test_static_convergence_within_five_seconds(self):
        acc, gyro, mag = self.static_inputs()
        filt = ComplementaryFilter(alpha=0.98, dt=1 / 60, initial=(80.0, 170.0, -179.0))
        for t in range(300):
            out = filt.step(t, acc, gyro, mag)
        assert abs(out.pitch) < 0.5
        assert abs(out.roll) < 0.5
        assert abs(out.yaw) < 0.5

    def test_alpha_zero_passes_measurement_through(self):
        filt = ComplementaryFilter(alpha=0.0, dt=1 / 60, initial=(42.0, -30.0, 100.0))
        acc = world_to_body((0, 0, 1), yaw=15.0, pitch=10.0, roll=5.0)
        mag = world_to_body(MAG_LEVEL, yaw=15.0, pitch=10.0, roll=5.0)
        out = filt.step(0, acc, (17.0, -3.0, 120.0), mag)
        assert out.pitch == pytest.approx(10.0, abs=1e-9)
        assert out.roll == pytest.approx(5.0, abs=1e-9)
        assert out.yaw == pytest.approx(15.0, abs=1e-9)

    def test_alpha_one_pure_integration(self):
        filt = ComplementaryFilter(alpha=1.0, dt=1 / 60, initial=(0.0, 0.0, 0.0))
        acc, _, mag = self.static_inputs()
        for t in range(60):
            out = filt.step(t, acc, (0.0, 0.0, 10.0), mag)
        assert out.yaw == pytest.approx(10.0, abs=1e-9)
        assert out.pitch == pytest.approx(0.0, abs=1e-9)

    def test_blend_takes_shortest_path_across_wrap(self):
        filt = ComplementaryFilter(alpha=0.9, dt=1 / 60, initial=(0.0, 0.0, 179.0))
        acc = (0.0, 0.0, 1.0)
        mag = world_to_body(MAG_LEVEL, yaw=-179.0, pitch=0.0, roll=0.0)
        out = filt.step(0, acc, (0.0, 0.0, 0.0), mag)
        # measurement is 2 degrees away through the seam, not 358 back
        assert out.yaw == pytest.approx(179.2, abs=1e-9)

    def test_zero_accel_falls_back_to_gyro(self):
        filt = ComplementaryFilter(alpha=0.98, dt=1 / 60, initial=(1.0, 2.0, 3.0))
        out = filt.step(0, (0.0, 0.0, 0.0), (0.0, 60.0, 0.0), MAG_LEVEL)
        assert FLAG_ACCEL_FALLBACK in out.flags
        assert out.pitch == pytest.approx(2.0, abs=1e-9)  # 1 + 60/60

    def test_gimbal_guard_holds_yaw(self):
        filt = ComplementaryFilter(
            alpha=0.5, dt=1 / 60, gimbal_guard_deg=85.0, initial=(89.0, 0.0, 50.0)
        )
        acc = world_to_body((0, 0, 1), yaw=0.0, pitch=89.0, roll=0.0)
        out = filt.step(0, acc, (0.0, 0.0, 0.0), MAG_LEVEL)
        assert FLAG_GIMBAL_GUARD in out.flags
        assert out.yaw == pytest.approx(50.0, abs=1e-9)

    def test_determinism(self):
        rng = np.random.default_rng(0)
        stream = rng.normal(size=(200, 9))
        stream[:, 2] += 2.0
        stream[:, 6] += 2.0
        outs = []
        for _ in range(2):
            filt = ComplementaryFilter(alpha=0.97, dt=1 / 60)
            outs.append(
                [filt.step(t, r[0:3], r[3:6], r[6:9]) for t, r in enumerate(stream)]
            )
        assert outs[0] == outs[1]

    def test_zero_mean_gyro_bias_does_not_drift(self):
        # long-run mean error under zero-mean rate noise stays < 0.1 deg
        rng = np.random.default_rng(21)
        filt = ComplementaryFilter(alpha=0.98, dt=1 / 60, initial=(0.0, 0.0, 0.0))
        acc = world_to_body((0, 0, 1), yaw=30.0, pitch=12.0, roll=-8.0)
        mag = world_to_body(MAG_LEVEL, yaw=30.0, pitch=12.0, roll=-8.0)
        errs = np.empty((10_000, 3))
        for t in range(10_000):
            gyro = rng.normal(0.0, 5.0, size=3)
            out = filt.step(t, acc, gyro, mag)
            errs[t] = (out.pitch - 12.0, out.roll + 8.0, out.yaw - 30.0)
        assert np.abs(errs[1000:].mean(axis=0)).max() < 0.1

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            ComplementaryFilter(alpha=1.5)
        with pytest.raises(ValueError):
            ComplementaryFilter(dt=0.0)


class TestCalibration:
    def test_constant_frames_give_exact_offset(self):
        frames = {1: [frame(5.0, -2.0, 30.0, tick=t) for t in range(60)]}
        off = calibrate_neutral(frames, 60)
        assert off.for_sensor(1) == pytest.approx((5.0, -2.0, 30.0), abs=1e-9)

    def test_alternating_pitch_averages(self):
        frames = {1: [frame(10.0 if t % 2 else 20.0, 0.0, 0.0) for t in range(60)]}
        off = calibrate_neutral(frames, 60)
        assert off.for_sensor(1)[0] == pytest.approx(15.0, abs=1e-9)

    def test_yaw_across_seam_uses_circular_mean(self):
        frames = {1: [frame(0.0, 0.0, 179.0 if t % 2 else -179.0) for t in range(60)]}
        off = calibrate_neutral(frames, 60)
        expected = wrap_deg(circular_mean([179.0, -179.0] * 30))
        assert off.for_sensor(1)[2] == pytest.approx(expected, abs=1e-9)
        assert off.for_sensor(1)[2] == pytest.approx(180.0, abs=1e-9)

    def test_insufficient_frames(self):
        with pytest.raises(CalibrationError):
            calibrate_neutral({1: [frame(0, 0, 0)] * 59}, 60)

    def test_circular_mean_matches_unit_vector_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            angles = rng.uniform(-179, 180, size=8).tolist()
            got = circular_mean_deg(angles)
            assert got == pytest.approx(wrap_deg(circular_mean(angles)), abs=1e-9)


class TestApplyOffset:
    def test_frame_equal_to_offset_zeroes(self):
        f = frame(5.0, -2.0, 30.0)
        off = NeutralOffset({1: (5.0, -2.0, 30.0)})
        out = apply_offset(f, off)
        assert (out.pitch, out.roll, out.yaw) == pytest.approx((0, 0, 0), abs=1e-12)

    def test_wrapped_subtraction(self):
        out = apply_offset(frame(0.0, 0.0, -170.0), NeutralOffset({1: (0.0, 0.0, 170.0)}))
        assert out.yaw == pytest.approx(20.0, abs=1e-12)

    def test_offset_from_own_frame_calibration(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            f = frame(rng.uniform(-80, 80), rng.uniform(-170, 170), rng.uniform(-170, 170))
            off = calibrate_neutral({1: [f] * 10}, 10)
            out = apply_offset(f, off)
            assert abs(out.pitch) < 1e-9
            assert abs(out.roll) < 1e-9
            assert abs(out.yaw) < 1e-9


def test_batch_fusion_matches_streaming_steps_bitwise(small_noisy):
    seq = small_noisy.sequences[0]
    cfg = FusionConfig()
    fused = fuse_sequence(seq.samples, small_noisy.sensor_ids, 60.0, cfg)

    filters = {
        sid: ComplementaryFilter(alpha=cfg.alpha, dt=1 / 60, sensor_id=sid)
        for sid in small_noisy.sensor_ids
    }
    head: dict[int, list] = {sid: [] for sid in small_noisy.sensor_ids}
    frames = []
    for t in range(400):
        row_frames = {}
        for sid in small_noisy.sensor_ids:
            r = seq.samples[sid][t]
            fr = filters[sid].step(t, r[0:3], r[3:6], r[6:9])
            row_frames[sid] = fr
            if t < cfg.calib_ticks:
                head[sid].append(fr)
        frames.append(row_frames)
    offset = calibrate_neutral(head, cfg.calib_ticks)
    for t in range(400):
        for si, sid in enumerate(small_noisy.sensor_ids):
            rel = apply_offset(frames[t][sid], offset)
            assert fused.angles[t, si, 0] == rel.pitch
            assert fused.angles[t, si, 1] == rel.roll
            assert fused.angles[t, si, 2] == rel.yaw


def test_angles_stay_in_wrap_ranges(small_noisy):
    seq = small_noisy.sequences[0]
    fused = fuse_sequence(seq.samples, small_noisy.sensor_ids, 60.0)
    assert (fused.angles[..., 1:] > -180.0).all() and (fused.angles[..., 1:] <= 180.0).all()
    assert (np.abs(fused.angles[..., 0]) <= 180.0).all()
