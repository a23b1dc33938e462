import numpy as np
import pytest

from eventstab.model import CameraModel, EventStream, ImuSequence


@pytest.fixture
def cam():
    return CameraModel.centered()


def make_imu(omega, dt_us=1000, t0=0):
    omega = np.asarray(omega, dtype=float).reshape(-1, 3)
    t = t0 + dt_us * np.arange(len(omega))
    return ImuSequence(t, omega, np.tile([0.0, 0.0, -9.81], (len(omega), 1)))


def imu_on_axis(values, axis=1, dt_us=1000):
    omega = np.zeros((len(values), 3))
    omega[:, axis] = values
    return make_imu(omega, dt_us)


def stream_of(rows, width=346, height=260):
    """rows of (t, x, y, p)"""
    rows = list(rows)
    if not rows:
        return EventStream(width, height)
    t, x, y, p = zip(*rows)
    return EventStream(width, height, t, x, y, p)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
