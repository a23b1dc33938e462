import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventstab.errors import (
    InvalidPolarity,
    NonOrthonormalRotation,
    OutOfBoundsCoordinate,
    TimestampOutsideSpan,
    UnsortedTimestamps,
)
from eventstab.model import (
    CameraModel,
    CompensationConfig,
    Event,
    EventStream,
    IgsConfig,
    accumulate_frame,
    frame_stats,
    validate_stream,
)

from conftest import stream_of


def test_validate_identity():
    s = stream_of([(1, 0, 0, 1), (2, 5, 5, -1), (2, 9, 3, 1)])
    assert validate_stream(s) is s


def test_validate_unsorted_reports_index():
    s = stream_of([(5, 0, 0, 1), (3, 0, 0, 1)])
    with pytest.raises(UnsortedTimestamps) as exc:
        validate_stream(s)
    assert exc.value.info["index"] == 1


def test_validate_bounds_exclusive():
    with pytest.raises(OutOfBoundsCoordinate):
        validate_stream(stream_of([(0, 346, 0, 1)]))
    validate_stream(stream_of([(0, 345, 259, 1)]))


def test_validate_polarity():
    with pytest.raises(InvalidPolarity):
        validate_stream(stream_of([(0, 1, 1, 0)]))


def test_stream_from_events_roundtrip():
    evs = [Event(1, 2, 3, -1), Event(4, 5, 6, 1)]
    s = EventStream.from_events(evs, 10, 10)
    assert s.events == evs
    assert s[1] == Event(4, 5, 6, 1)


def test_stream_is_read_only():
    s = stream_of([(0, 1, 1, 1)])
    with pytest.raises(ValueError):
        s.x[0] = 3


def test_accumulate_empty():
    f = accumulate_frame([], 20, 10, 0, 100)
    assert f.pos_count.shape == (10, 20)
    assert f.pos_count.sum() == f.neg_count.sum() == 0
    assert not f.mean_ts.any()


def test_accumulate_mixed_polarity_mean_time():
    evs = [Event(4, 4, 100, 1), Event(4, 4, 200, -1)]
    f = accumulate_frame(evs, 10, 10, 100, 200)
    assert f.pos_count[4, 4] == 1 and f.neg_count[4, 4] == 1
    assert f.mean_ts[4, 4] == pytest.approx(0.5)


def test_accumulate_counts_and_stats():
    pix = [(1, 1)] * 4 + [(2, 3)] * 3 + [(0, 0)] * 2 + [(7, 5)]
    evs = [Event(x, y, i, 1 if i % 2 else -1) for i, (x, y) in enumerate(pix)]
    f = accumulate_frame(evs, 8, 6, 0, 9)
    assert f.pos_count.sum() + f.neg_count.sum() == 10
    st_ = frame_stats(f)
    assert st_ == (10, 4, 2.5)


def test_accumulate_zero_span():
    f = accumulate_frame([Event(1, 1, 7, 1)], 4, 4, 7, 7)
    assert f.mean_ts[1, 1] == 0.0


def test_accumulate_errors():
    with pytest.raises(OutOfBoundsCoordinate):
        accumulate_frame([Event(4, 0, 0, 1)], 4, 4, 0, 1)
    with pytest.raises(TimestampOutsideSpan):
        accumulate_frame([Event(0, 0, 5, 1)], 4, 4, 0, 1)


def test_frame_stats_empty():
    assert frame_stats(accumulate_frame([], 5, 5, 0, 0)) == (0, 0, 0.0)


def test_camera_invariants():
    cam = CameraModel.centered()
    assert cam.rho == pytest.approx(4e-3 / 18.5e-6, rel=1e-12)
    with pytest.raises(NonOrthonormalRotation):
        CameraModel(r_ci=np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(NonOrthonormalRotation):
        CameraModel(r_ci=np.full((3, 3), 0.5))


def test_config_defaults_valid():
    CompensationConfig().validate()
    IgsConfig().validate()


events_st = st.lists(
    st.tuples(st.integers(0, 10_000), st.integers(0, 15), st.integers(0, 11), st.sampled_from([-1, 1])),
    max_size=60,
)


@settings(max_examples=100, deadline=None)
@given(events_st, st.randoms(use_true_random=False))
def test_accumulate_order_independent(rows, rnd):
    a = [Event(x, y, t, p) for t, x, y, p in rows]
    b = list(a)
    rnd.shuffle(b)
    fa = accumulate_frame(a, 16, 12, 0, 10_000)
    fb = accumulate_frame(b, 16, 12, 0, 10_000)
    assert np.array_equal(fa.pos_count, fb.pos_count)
    assert np.array_equal(fa.neg_count, fb.neg_count)
    assert np.allclose(fa.mean_ts, fb.mean_ts, atol=1e-12)
    assert fa.counts.sum() == len(a)
    assert ((fa.mean_ts >= 0) & (fa.mean_ts <= 1)).all()
    assert not fa.mean_ts[fa.counts == 0].any()
    stats = frame_stats(fa)
    if stats.event_count:
        assert stats.density >= 1


@settings(max_examples=50, deadline=None)
@given(events_st)
def test_validate_idempotent(rows):
    rows = sorted(rows, key=lambda r: r[0])
    s = stream_of(rows, 16, 12)
    assert validate_stream(validate_stream(s)) == s
