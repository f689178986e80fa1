import pytest

from bomi.dataset_io import synth_session
from bomi.experiments import train_session


def _gamma_sensors(rec):
    return {int(k): int(v) for k, v in rec.meta["class_sensors"].items()}


@pytest.fixture(scope="session")
def synth9():
    """Nine classes, three sensors, mild angle noise."""
    return synth_session(class_count=9, sensor_count=3, noise_deg=0.5, seed=42)


@pytest.fixture(scope="session")
def spasm9():
    """Like synth9 but class 1 carries involuntary amplitude modulation
    comparable to its (reduced) motion range."""
    return synth_session(
        class_count=9, sensor_count=3, noise_deg=0.5,
        spasm_deg=10.0, spasm_class=1, class_scale={1: 0.55}, seed=42,
    )


@pytest.fixture(scope="session")
def small_noiseless():
    """Four classes, one sensor, zero noise: exactly separable."""
    return synth_session(class_count=4, sensor_count=1, noise_deg=0.0, seed=3)


@pytest.fixture(scope="session")
def small_noisy():
    """Small session for fast pipeline/CLI tests."""
    return synth_session(class_count=3, sensor_count=2, noise_deg=0.5, seed=9)


@pytest.fixture(scope="session")
def model9(synth9):
    model, test_windows = train_session(
        synth9, class_sensor=_gamma_sensors(synth9), learn_amplitude=True
    )
    return model, test_windows


@pytest.fixture(scope="session")
def small_model(small_noisy):
    model, test_windows = train_session(
        small_noisy, class_sensor=_gamma_sensors(small_noisy), learn_amplitude=True
    )
    return model, test_windows


@pytest.fixture(scope="session")
def sae7():
    """Single-amplitude session recorded at the user's full range."""
    return synth_session(class_count=7, seed=13)


@pytest.fixture(scope="session")
def mae7():
    """Multi-amplitude session: minimum, intermediate, maximum range."""
    return synth_session(class_count=7, amplitudes=(0.5, 0.75, 1.0), seed=5)


@pytest.fixture(scope="session")
def days5():
    """Five consecutive-day sessions with cumulative execution drift."""
    return [
        synth_session(
            class_count=9,
            amplitude_deg=12.0,
            noise_deg=1.0,
            seed=10 + day,
            target_bias_deg=1.5 * (day - 1),
            rotation_seed=321,
            shuffle_test_seq=True,
        )
        for day in range(1, 6)
    ]
