import math

import numpy as np
import pytest

from eventstab.compensation import compensate_stream
from eventstab.metrics import (
    REFERENCE_DENSITY,
    bench_compensation,
    density_report,
    frame_contrast,
    grid_search_rotation,
    mean_frame_density,
    pixel_event_density,
)
from eventstab.model import CameraModel, CompensationConfig, EventFrame, EventStream, accumulate_frame
from eventstab.synth import Trajectory, make_scene, render

from conftest import make_imu, stream_of

UNIT_GAMMA = CompensationConfig(gamma_min=1.0, gamma_max=1.0 + 1e-12)


@pytest.fixture(scope="module")
def cam():
    return CameraModel.centered()


@pytest.fixture(scope="module")
def yaw_scene(cam):
    scene = make_scene(100, cam, margin_px=80, seed=1)
    return render(scene, Trajectory("sinusoid", "y", 0.26, 2.0, 1.0), cam)


def test_density_examples():
    assert pixel_event_density(stream_of([])) == 0
    assert pixel_event_density(EventFrame.empty(10, 10)) == 0
    rows = [(i, x, 0, 1) for i, x in enumerate([0, 0, 0, 1, 1, 1, 2, 2, 3, 3])]
    assert pixel_event_density(stream_of(rows)) == 2.5


def test_density_and_contrast_permutation_invariant():
    rng = np.random.default_rng(0)
    x, y = rng.integers(0, 346, 300), rng.integers(0, 260, 300)
    a = EventStream(346, 260, np.zeros(300, int), x, y, np.ones(300, int))
    perm = rng.permutation(300)
    b = EventStream(346, 260, np.zeros(300, int), x[perm], y[perm], np.ones(300, int))
    assert pixel_event_density(a) == pixel_event_density(b)
    assert frame_contrast(a) == frame_contrast(b)


def test_contrast_examples():
    assert frame_contrast(EventFrame.empty(20, 10)) == 0
    n, p = 7, 200
    rows = [(i, 4, 3, 1) for i in range(n)]
    assert frame_contrast(stream_of(rows, 20, 10)) == pytest.approx(n * n * (p - 1) / p**2, rel=1e-12)


def test_grid_curve_length(cam):
    s = stream_of([(0, 100, 100, 1), (10, 101, 100, 1)])
    for lo, hi, step in ((0, 0.2, 0.005), (-0.1, 0.1, 0.03), (0, 0.01, 0.02)):
        _, angles, curve = grid_search_rotation(s, cam, "y", (lo, hi), step)
        assert len(angles) == len(curve) == math.floor((hi - lo) / step + 1e-9) + 1


def test_grid_empty(cam):
    best, _, curve = grid_search_rotation(stream_of([]), cam, "y", (-0.05, 0.2), 0.01)
    assert best == -0.05 and not curve.any()


def test_grid_zero_angle_is_raw(cam, yaw_scene):
    stream = yaw_scene[0]
    _, angles, curve = grid_search_rotation(stream, cam, "y", (0.0, 0.02), 0.01)
    assert angles[0] == 0.0
    assert curve[0] == frame_contrast(stream)


def test_grid_recovers_ramp(cam):
    scene = make_scene(100, cam, margin_px=80, seed=1)
    stream, _, _ = render(scene, Trajectory("ramp", "y", 0.1, duration=0.04), cam)
    best, angles, curve = grid_search_rotation(stream, cam, "y", (0.0, 0.2), 0.005)
    assert abs(best - 0.1) <= 0.005 + 1e-12
    assert curve.max() > curve[0]


def test_compensation_raises_density_and_contrast(cam, yaw_scene):
    stream, imu, _ = yaw_scene
    res = compensate_stream(stream, imu, cam, UNIT_GAMMA)
    rep = density_report(stream, res.stream, "yaw", res.group_spans)
    assert rep.ratio >= 1.5
    assert rep.frame_ratio > 1.0
    assert frame_contrast(res.stream) >= frame_contrast(stream)
    for f_raw, f_comp in zip(
        [accumulate_frame(stream.take(slice(*np.searchsorted(stream.t, [ts, te]))), 346, 260, ts, te) for ts, te in res.group_spans],
        res.frames,
    ):
        if f_raw.counts.sum():
            assert frame_contrast(f_comp) >= frame_contrast(f_raw)


def test_density_report_fields(cam, yaw_scene):
    stream = yaw_scene[0]
    rep = density_report(stream, stream, "pitch")
    assert rep.ratio == 1.0 and math.isnan(rep.frame_ratio)
    assert math.isnan(density_report(stream_of([]), stream_of([])).ratio)
    assert mean_frame_density([EventFrame.empty(5, 5)]) == 0.0
    assert set(REFERENCE_DENSITY) == {"yaw", "pitch", "roll"}


def test_bench_accounting(cam, yaw_scene):
    stream, imu, _ = yaw_scene
    rep = bench_compensation(stream, imu, cam, CompensationConfig(), repetitions=3)
    assert rep.event_count == len(stream)
    assert rep.identical_outputs and len(rep.wall_times_us) == 3
    assert set(rep.stages_us) == {"grouping", "warping", "accumulation"}
    assert sum(rep.stages_us.values()) <= rep.wall_time_us
    assert rep.throughput == pytest.approx(len(stream) / (rep.wall_time_us * 1e-6))
    with pytest.raises(ValueError):
        bench_compensation(stream, imu, cam, CompensationConfig(), repetitions=0)


def _doubled(stream):
    idx = np.repeat(np.arange(len(stream)), 2)
    return EventStream(stream.width, stream.height, stream.t[idx], stream.x[idx], stream.y[idx], stream.p[idx])


@pytest.mark.slow
def test_warping_scales_linearly(cam):
    scene = make_scene(300, cam, margin_px=80, seed=2)
    stream, imu, _ = render(scene, Trajectory("sinusoid", "y", 0.26, 2.0, 1.0), cam)
    cfg = CompensationConfig()
    one = bench_compensation(stream, imu, cam, cfg, repetitions=7).stages_us["warping"]
    two = bench_compensation(_doubled(stream), imu, cam, cfg, repetitions=7).stages_us["warping"]
    assert 1.5 <= two / one <= 3.0
