import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventstab import io as evio
from eventstab.errors import (
    BadMagic,
    BadVersion,
    EventStabError,
    InvariantViolation,
    NonMonotonicTimestamps,
    ParseError,
    TruncatedPayload,
    TypeMismatch,
    UnknownKey,
)
from eventstab.model import EventFrame, ImuSequence, accumulate_frame, Event

from conftest import stream_of


def test_empty_bin_is_header_only():
    data = evio.write_events(stream_of([]), "bin")
    assert len(data) == 24
    assert data[:4] == b"EVS1"
    assert struct.unpack("<IIIQ", data[4:]) == (1, 346, 260, 0)


def test_single_event_csv():
    data = evio.write_events(stream_of([(7, 1, 2, -1)]), "csv")
    assert data == b"t,x,y,p\n7,1,2,-1\n"


def test_bin_record_layout():
    data = evio.write_events(stream_of([(7, 1, 2, -1)]), "bin")
    assert len(data) == 24 + 13
    assert data[24:] == struct.pack("<QHHb", 7, 1, 2, -1)


def test_bad_magic():
    data = bytearray(evio.write_events(stream_of([]), "bin"))
    data[:4] = b"XXXX"
    with pytest.raises(BadMagic):
        evio.read_events(bytes(data))


def test_bad_version():
    data = bytearray(evio.write_events(stream_of([]), "bin"))
    data[4:8] = struct.pack("<I", 2)
    with pytest.raises(BadVersion):
        evio.read_events(bytes(data))


def test_truncated_payload():
    data = evio.write_events(stream_of([(1, 0, 0, 1), (2, 0, 0, 1)]), "bin")
    with pytest.raises(TruncatedPayload):
        evio.read_events(data[:-13])


def test_csv_zero_polarity():
    with pytest.raises(ParseError) as exc:
        evio.read_events(b"t,x,y,p\n7,1,2,0\n", "csv")
    assert exc.value.info["line"] == 2


def test_csv_roundtrip():
    s = stream_of([(0, 0, 0, 1), (0, 3, 4, -1), (99, 345, 259, 1)])
    assert evio.read_events(evio.write_events(s, "csv"), "csv") == s


event_rows = st.lists(
    st.tuples(st.integers(0, 2**40), st.integers(0, 345), st.integers(0, 259), st.sampled_from([-1, 1])),
    max_size=40,
).map(lambda rows: sorted(rows, key=lambda r: r[0]))


@settings(max_examples=100, deadline=None)
@given(event_rows)
def test_bin_roundtrip_byte_identical(rows):
    s = stream_of(rows)
    data = evio.write_events(s, "bin")
    assert len(data) == 24 + 13 * len(rows)
    back = evio.read_events(data)
    assert back == s
    assert evio.write_events(back, "bin") == data
    assert evio.write_events(evio.read_events(evio.write_events(s, "csv"), "csv"), "bin") == data


IMU_TEXT = "t,wx,wy,wz,ax,ay,az\n0,1.0,0,0,0,0,-9.81\n1000,1.0,0,0,0,0,-9.81\n"


def test_read_imu_example():
    seq = evio.read_imu_csv(IMU_TEXT)
    assert len(seq) == 2
    assert seq.omega[0, 0] == 1.0
    assert seq.accel[1, 2] == -9.81


def test_imu_duplicate_timestamps():
    with pytest.raises(NonMonotonicTimestamps):
        evio.read_imu_csv("t,wx,wy,wz,ax,ay,az\n5,0,0,0,0,0,0\n5,0,0,0,0,0,0\n")


def test_imu_parse_error_line():
    with pytest.raises(ParseError) as exc:
        evio.read_imu_csv("t,wx,wy,wz,ax,ay,az\n0,0,0,0,0,0,0\n1,a,0,0,0,0,0\n")
    assert exc.value.info["line"] == 3


finite = st.floats(allow_nan=False, allow_infinity=False, width=64, min_value=-1e6, max_value=1e6)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 10_000), *[finite] * 6), min_size=1, max_size=30))
def test_imu_roundtrip(rows):
    t = np.cumsum([r[0] for r in rows])
    v = np.array([r[1:] for r in rows])
    seq = ImuSequence(t, v[:, :3], v[:, 3:])
    text = evio.write_imu_csv(seq)
    back = evio.read_imu_csv(text)
    assert np.array_equal(back.t, seq.t)
    assert np.allclose(back.omega, seq.omega, rtol=1e-9, atol=0)
    assert np.allclose(back.accel, seq.accel, rtol=1e-9, atol=0)
    assert evio.write_imu_csv(back) == text


def test_ppm_empty_frame():
    f = EventFrame.empty(346, 260)
    data = evio.export_frame_ppm(f)
    assert data.startswith(b"P6\n346 260\n255\n")
    assert len(data) == len(b"P6\n346 260\n255\n") + 346 * 260 * 3
    assert not any(data[len(b"P6\n346 260\n255\n"):])


def test_ppm_single_event():
    f = accumulate_frame([Event(3, 2, 0, 1)], 5, 4, 0, 10)
    rgb = evio.read_ppm(evio.export_frame_ppm(f))
    assert rgb[2, 3, 0] == 255
    assert (rgb[..., 0] == 255).sum() == 1
    assert not rgb[..., 1].any()


def test_config_defaults():
    cfg = evio.parse_config("")
    c, g = cfg.compensation, cfg.igs
    assert (c.gamma_min, c.gamma_max, c.a, c.b, c.t_stable) == (2, 5, 0.15, 3, 3.0)
    assert (c.n_min, c.n_max) == (5, 50)
    assert (g.w_rel, g.w_q, g.w_u, g.w_d, g.tau, g.hist_bins) == (0.1, 0.1, 0.6, 0.1, 1.0, 8)
    assert np.array_equal(cfg.camera.r_ci, np.eye(3))


def test_config_invariant_violation():
    with pytest.raises(InvariantViolation):
        evio.parse_config("gamma_min = 6")


def test_config_order_insensitive():
    a = evio.parse_config("n_max = 50\nn_min = 5")
    b = evio.parse_config("n_min = 5\nn_max = 50 # trailing comment")
    assert a.compensation == b.compensation
    assert (a.compensation.n_min, a.compensation.n_max) == (5, 50)


def test_config_errors():
    with pytest.raises(UnknownKey):
        evio.parse_config("gama_min = 1")
    with pytest.raises(TypeMismatch):
        evio.parse_config("n_min = 2.5")
    with pytest.raises(TypeMismatch):
        evio.parse_config("beta_axes = theta")


def test_config_reserialization_idempotent():
    cfg = evio.parse_config("gamma_max = 7\nr_ci = 0,-1,0, 1,0,0, 0,0,1\nk = 4\nwarp_reference = mid")
    text = evio.format_config(cfg)
    again = evio.parse_config(text)
    assert evio.format_config(again) == text
    assert again.compensation == cfg.compensation and again.igs == cfg.igs
    assert np.array_equal(again.camera.r_ci, cfg.camera.r_ci)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=120))
def test_readers_never_crash(data):
    for call in (lambda: evio.read_events(data, "bin"), lambda: evio.read_events(data, "csv"),
                 lambda: evio.read_imu_csv(data)):
        try:
            call()
        except EventStabError:
            pass
