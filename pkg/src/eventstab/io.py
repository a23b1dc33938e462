"""Readers and writers for event streams, IMU traces, frames and configuration.

Binary event layout (little-endian)::

    header  magic "EVS1" | version u32 = 1 | width u32 | height u32 | count u64   (24 bytes)
    record  t u64 | x u16 | y u16 | p i8                                          (13 bytes)
"""
from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import (
    BadMagic,
    BadVersion,
    CoordinateOverflow,
    InvariantViolation,
    NonMonotonicTimestamps,
    OutOfBoundsCoordinate,
    ParseError,
    TruncatedPayload,
    TypeMismatch,
    UnknownKey,
)
from .model import (
    CameraModel,
    CompensationConfig,
    EventFrame,
    EventStream,
    IgsConfig,
    ImuSequence,
    validate_stream,
)

MAGIC = b"EVS1"
VERSION = 1
HEADER = struct.Struct("<4sIIIQ")
RECORD = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
assert HEADER.size == 24 and RECORD.itemsize == 13

EVENT_CSV_HEADER = "t,x,y,p"
IMU_CSV_HEADER = "t,wx,wy,wz,ax,ay,az"
_INT = re.compile(r"-?[0-9]+\Z")
_I64_MAX = 2**63 - 1


# ---------------------------------------------------------------------------
# events


def write_events(stream: EventStream, fmt: str = "bin") -> bytes:
    if fmt == "bin":
        return _write_bin(stream)
    if fmt == "csv":
        rows = [EVENT_CSV_HEADER]
        rows.extend(f"{t},{x},{y},{p}" for t, x, y, p in zip(stream.t.tolist(), stream.x.tolist(),
                                                              stream.y.tolist(), stream.p.tolist()))
        return ("\n".join(rows) + "\n").encode("ascii")
    raise ValueError(f"unknown event format {fmt!r}")


def _write_bin(stream: EventStream) -> bytes:
    if len(stream) and (stream.x.min() < 0 or stream.y.min() < 0
                        or stream.x.max() > 0xFFFF or stream.y.max() > 0xFFFF):
        raise CoordinateOverflow("pixel coordinate does not fit in u16")
    if stream.width > 0xFFFFFFFF or stream.height > 0xFFFFFFFF:
        raise CoordinateOverflow("sensor size does not fit in u32")
    if len(stream) and stream.t.min() < 0:
        raise CoordinateOverflow("negative timestamp cannot be stored as u64")
    rec = np.empty(len(stream), dtype=RECORD)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.p
    return HEADER.pack(MAGIC, VERSION, stream.width, stream.height, len(stream)) + rec.tobytes()


def read_events(data: bytes, fmt: str = "bin", width: int = 346, height: int = 260) -> EventStream:
    """Parse an event stream.

    ``width``/``height`` only apply to CSV input; binary files carry their own geometry.
    """
    if fmt == "bin":
        return _read_bin(bytes(data))
    if fmt == "csv":
        return _read_events_csv(bytes(data), width, height)
    raise ValueError(f"unknown event format {fmt!r}")


def _read_bin(data: bytes) -> EventStream:
    if len(data) >= 4 and data[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {data[:4]!r}")
    if len(data) < HEADER.size:
        raise TruncatedPayload(f"header needs {HEADER.size} bytes, got {len(data)}")
    _, version, width, height, count = HEADER.unpack_from(data)
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    payload = len(data) - HEADER.size
    if payload != count * RECORD.itemsize:
        raise TruncatedPayload(f"header declares {count} records, payload holds {payload} bytes")
    rec = np.frombuffer(data, dtype=RECORD, offset=HEADER.size, count=count)
    if count and rec["t"].max() > _I64_MAX:
        raise ParseError("timestamp exceeds int64 range")
    stream = EventStream(width, height, rec["t"].astype(np.int64), rec["x"], rec["y"], rec["p"])
    return validate_stream(stream)


def _read_events_csv(data: bytes, width: int, height: int) -> EventStream:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError(f"non-ascii byte at offset {exc.start}", line=1) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != EVENT_CSV_HEADER:
        raise ParseError(f"line 1: expected header {EVENT_CSV_HEADER!r}", line=1)
    cols = ([], [], [], [])
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.strip().split(",")
        if len(parts) != 4 or not all(_INT.match(v) for v in parts):
            raise ParseError(f"line {lineno}: expected 4 integers", line=lineno)
        t, x, y, p = (int(v) for v in parts)
        if p not in (1, -1):
            raise ParseError(f"line {lineno}: polarity must be +1 or -1, got {p}", line=lineno)
        if not 0 <= t <= _I64_MAX:
            raise ParseError(f"line {lineno}: timestamp out of range", line=lineno)
        if not (0 <= x < width and 0 <= y < height):
            raise OutOfBoundsCoordinate(f"line {lineno}: ({x}, {y}) outside {width}x{height}",
                                        index=lineno - 2)
        for c, v in zip(cols, (t, x, y, p)):
            c.append(v)
    return validate_stream(EventStream(width, height, *cols))


# ---------------------------------------------------------------------------
# IMU


def read_imu_csv(text: str) -> ImuSequence:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid utf-8 at offset {exc.start}", line=1) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != IMU_CSV_HEADER:
        raise ParseError(f"line 1: expected header {IMU_CSV_HEADER!r}", line=1)
    ts, vals = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.strip().split(",")
        if len(parts) != 7 or not _INT.match(parts[0]):
            raise ParseError(f"line {lineno}: expected integer t and 6 values", line=lineno)
        t = int(parts[0])
        if not 0 <= t <= _I64_MAX:
            raise ParseError(f"line {lineno}: timestamp out of range", line=lineno)
        try:
            row = [float(v) for v in parts[1:]]
        except ValueError:
            raise ParseError(f"line {lineno}: bad number", line=lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError(f"line {lineno}: non-finite value", line=lineno)
        if ts and t <= ts[-1]:
            raise NonMonotonicTimestamps(f"line {lineno}: timestamp {t} not after {ts[-1]}", line=lineno)
        ts.append(t)
        vals.append(row)
    v = np.array(vals, dtype=np.float64).reshape(-1, 6)
    return ImuSequence(np.array(ts, dtype=np.int64), v[:, :3], v[:, 3:])


def write_imu_csv(seq: ImuSequence) -> str:
    rows = [IMU_CSV_HEADER]
    for t, w, a in zip(seq.t.tolist(), seq.omega.tolist(), seq.accel.tolist()):
        rows.append(",".join([str(t)] + [repr(float(v)) for v in (*w, *a)]))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# frames


def export_frame_ppm(frame: EventFrame) -> bytes:
    """Render a frame as binary PPM: R = positive, G = negative, B = mean time."""
    peak = max(int(frame.pos_count.max(initial=0)), int(frame.neg_count.max(initial=0)))
    s = 255.0 / peak if peak else 0.0
    rgb = np.empty((frame.height, frame.width, 3), dtype=np.uint8)
    rgb[..., 0] = np.minimum(255, np.rint(frame.pos_count * s))
    rgb[..., 1] = np.minimum(255, np.rint(frame.neg_count * s))
    rgb[..., 2] = np.rint(255 * np.clip(frame.mean_ts, 0, 1))
    return f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii") + rgb.tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    """Decode a P6 image written by :func:`export_frame_ppm` into an (H, W, 3) array."""
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise ParseError("not a binary PPM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ParseError("only 8-bit PPM is supported")
    body = data[m.end():]
    if len(body) != w * h * 3:
        raise TruncatedPayload(f"PPM body has {len(body)} bytes, expected {w * h * 3}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def save_frames_npz(path, frames) -> None:
    """Lossless sidecar for a frame sequence (PPM exports are rescaled per frame)."""
    if not frames:
        np.savez(path, pos=np.zeros((0, 0, 0), np.int64), neg=np.zeros((0, 0, 0), np.int64),
                 mean_ts=np.zeros((0, 0, 0)), spans=np.zeros((0, 2), np.int64))
        return
    np.savez(
        path,
        pos=np.stack([f.pos_count for f in frames]),
        neg=np.stack([f.neg_count for f in frames]),
        mean_ts=np.stack([f.mean_ts for f in frames]),
        spans=np.array([[f.t_start, f.t_end] for f in frames], dtype=np.int64),
    )


def load_frames_npz(path) -> list:
    with np.load(path) as z:
        pos, neg, mean_ts, spans = z["pos"], z["neg"], z["mean_ts"], z["spans"]
    return [
        EventFrame(pos.shape[2], pos.shape[1], pos[i], neg[i], mean_ts[i], int(spans[i, 0]), int(spans[i, 1]))
        for i in range(len(pos))
    ]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Config:
    compensation: CompensationConfig = field(default_factory=CompensationConfig)
    igs: IgsConfig = field(default_factory=IgsConfig)
    camera: CameraModel = field(default_factory=CameraModel.centered)


_CAMERA_KEYS = {
    "focal_length": float,
    "pixel_pitch": float,
    "width": int,
    "height": int,
    "c_x": float,
    "c_y": float,
    "r_ci": "matrix",
}
_CHOICES = {"beta_axes": ("phi", "psi"), "warp_reference": ("start", "mid", "end")}


def _key_types():
    types = {}
    for cls in (CompensationConfig, IgsConfig):
        for f in fields(cls):
            types[f.name] = str if f.name in _CHOICES else f.type
    types.update(_CAMERA_KEYS)
    return {k: {"float": float, "int": int, "str": str}.get(v, v) for k, v in types.items()}


CONFIG_KEYS = _key_types()


def _convert(key, raw):
    kind = CONFIG_KEYS[key]
    raw = raw.strip()
    if kind is int:
        if not _INT.match(raw):
            raise TypeMismatch(f"{key}: expected integer, got {raw!r}", key=key)
        return int(raw)
    if kind is float:
        try:
            v = float(raw)
        except ValueError:
            raise TypeMismatch(f"{key}: expected number, got {raw!r}", key=key) from None
        if not math.isfinite(v):
            raise TypeMismatch(f"{key}: value must be finite", key=key)
        return v
    if kind == "matrix":
        try:
            vals = [float(v) for v in raw.replace(";", ",").split(",")]
        except ValueError:
            raise TypeMismatch(f"{key}: expected 9 comma-separated numbers", key=key) from None
        if len(vals) != 9:
            raise TypeMismatch(f"{key}: expected 9 comma-separated numbers", key=key)
        return tuple(vals)
    if raw not in _CHOICES[key]:
        raise TypeMismatch(f"{key}: expected one of {'/'.join(_CHOICES[key])}, got {raw!r}", key=key)
    return raw


def parse_config_values(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of typed values."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value'", line=lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UnknownKey(f"line {lineno}: unknown key {key!r}", key=key)
        if key in values:
            raise ParseError(f"line {lineno}: duplicate key {key!r}", line=lineno)
        values[key] = _convert(key, raw)
    return values


def build_config(values: dict) -> Config:
    for key in values:
        if key not in CONFIG_KEYS:
            raise UnknownKey(f"unknown key {key!r}", key=key)
    comp = CompensationConfig(**{f.name: values[f.name] for f in fields(CompensationConfig) if f.name in values})
    igs = IgsConfig(**{f.name: values[f.name] for f in fields(IgsConfig) if f.name in values})
    comp.validate()
    igs.validate()
    width = values.get("width", 346)
    height = values.get("height", 260)
    if width < 1 or height < 1:
        raise InvariantViolation("width and height must be positive")
    r_ci = np.array(values.get("r_ci", np.eye(3).ravel()), dtype=np.float64).reshape(3, 3)
    camera = CameraModel(
        f=values.get("focal_length", 4e-3),
        w=values.get("pixel_pitch", 18.5e-6),
        c_o=(values.get("c_x", (width - 1) / 2.0), values.get("c_y", (height - 1) / 2.0)),
        r_ci=r_ci,
        width=width,
        height=height,
    )
    return Config(comp, igs, camera)


def parse_config(text: str = "") -> Config:
    return build_config(parse_config_values(text))


def config_values(cfg: Config) -> dict:
    values = {}
    for part in (cfg.compensation, cfg.igs):
        for f in fields(part):
            values[f.name] = getattr(part, f.name)
    cam = cfg.camera
    values.update(
        focal_length=cam.f,
        pixel_pitch=cam.w,
        width=cam.width,
        height=cam.height,
        c_x=cam.c_o[0],
        c_y=cam.c_o[1],
        r_ci=tuple(float(v) for v in cam.r_ci.ravel()),
    )
    return values


def _fmt(v):
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg: Config) -> str:
    """Serialize every key in a fixed order; ``parse_config`` reads it back unchanged."""
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in config_values(cfg).items())


__all__ = [
    "Config",
    "CONFIG_KEYS",
    "build_config",
    "export_frame_ppm",
    "format_config",
    "load_frames_npz",
    "parse_config",
    "parse_config_values",
    "read_events",
    "read_imu_csv",
    "read_ppm",
    "save_frames_npz",
    "write_events",
    "write_imu_csv",
]
