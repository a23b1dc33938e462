"""Shared data model: events, IMU samples, camera, configs and event frames."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    EmptySequence,
    InvalidPolarity,
    InvariantViolation,
    NonMonotonicTimestamps,
    NonOrthonormalRotation,
    OutOfBoundsCoordinate,
    TimestampOutsideSpan,
    UnsortedTimestamps,
)

AXES = ("x", "y", "z")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Event:
    x: int
    y: int
    t: int  # microseconds
    p: int  # +1 / -1


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-ordered events stored column-wise.

    ``t`` is int64 microseconds, ``x``/``y`` int32 pixel indices and ``p``
    int8 polarity. Columns are read-only once the stream is built.
    """

    width: int
    height: int
    t: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    x: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int32))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int32))
    p: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t, np.int64))
        object.__setattr__(self, "x", _frozen(self.x, np.int32))
        object.__setattr__(self, "y", _frozen(self.y, np.int32))
        object.__setattr__(self, "p", _frozen(self.p, np.int8))
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event columns must have equal length")

    @classmethod
    def from_events(cls, events: Sequence[Event], width: int, height: int) -> "EventStream":
        return cls(
            width,
            height,
            t=[e.t for e in events],
            x=[e.x for e in events],
            y=[e.y for e in events],
            p=[e.p for e in events],
        )

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), int(self.p[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    @property
    def events(self) -> list:
        return list(self)

    def take(self, index) -> "EventStream":
        """Sub-stream from a slice, boolean mask or index array."""
        return EventStream(self.width, self.height, self.t[index], self.x[index], self.y[index], self.p[index])


def validate_stream(stream: EventStream) -> EventStream:
    """Check ordering, bounds and polarity; return the stream unchanged."""
    if len(stream) > 1:
        bad = np.flatnonzero(np.diff(stream.t) < 0)
        if bad.size:
            i = int(bad[0]) + 1
            raise UnsortedTimestamps(f"timestamp decreases at index {i}", index=i)
    oob = (stream.x < 0) | (stream.x >= stream.width) | (stream.y < 0) | (stream.y >= stream.height)
    if oob.any():
        i = int(np.flatnonzero(oob)[0])
        raise OutOfBoundsCoordinate(
            f"event {i} at ({stream.x[i]}, {stream.y[i]}) outside {stream.width}x{stream.height}", index=i
        )
    badp = (stream.p != 1) & (stream.p != -1)
    if badp.any():
        i = int(np.flatnonzero(badp)[0])
        raise InvalidPolarity(f"event {i} has polarity {stream.p[i]}", index=i)
    return stream


@dataclass(frozen=True)
class ImuSample:
    t: int
    omega: tuple  # rad/s
    accel: tuple  # m/s^2


@dataclass(frozen=True, eq=False)
class ImuSequence:
    """Gyroscope + accelerometer samples with strictly increasing timestamps."""

    t: np.ndarray
    omega: np.ndarray  # (n, 3) rad/s
    accel: np.ndarray  # (n, 3) m/s^2

    def __post_init__(self):
        t = _frozen(self.t, np.int64)
        omega = _frozen(np.reshape(self.omega, (-1, 3)), np.float64)
        accel = _frozen(np.reshape(self.accel, (-1, 3)), np.float64)
        if not (len(t) == len(omega) == len(accel)):
            raise ValueError("IMU columns must have equal length")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            i = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 1
            raise NonMonotonicTimestamps(f"IMU timestamp not increasing at sample {i}", index=i)
        if not (np.isfinite(omega).all() and np.isfinite(accel).all()):
            raise InvariantViolation("IMU sample values must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "accel", accel)

    @classmethod
    def from_samples(cls, samples: Sequence[ImuSample]) -> "ImuSequence":
        return cls(
            np.array([s.t for s in samples], dtype=np.int64),
            np.array([s.omega for s in samples], dtype=np.float64).reshape(-1, 3),
            np.array([s.accel for s in samples], dtype=np.float64).reshape(-1, 3),
        )

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> ImuSample:
        return ImuSample(int(self.t[i]), tuple(self.omega[i]), tuple(self.accel[i]))

    def __eq__(self, other):
        if not isinstance(other, ImuSequence):
            return NotImplemented
        return (
            np.array_equal(self.t, other.t)
            and np.array_equal(self.omega, other.omega)
            and np.array_equal(self.accel, other.accel)
        )

    @property
    def samples(self) -> list:
        return [self[i] for i in range(len(self))]

    def require_nonempty(self):
        if len(self) == 0:
            raise EmptySequence("IMU sequence is empty")


def check_rotation(r, tol=1e-9) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3) or not np.isfinite(r).all():
        raise NonOrthonormalRotation("rotation must be a finite 3x3 matrix")
    if np.abs(r @ r.T - np.eye(3)).max() > tol or np.linalg.det(r) <= 0:
        raise NonOrthonormalRotation("rotation matrix is not orthonormal with det +1")
    return r


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera with focal length ``f`` and pixel pitch ``w`` in meters."""

    f: float = 4e-3
    w: float = 18.5e-6
    c_o: tuple = (172.5, 129.5)
    r_ci: np.ndarray = field(default_factory=lambda: np.eye(3))
    width: int = 346
    height: int = 260

    def __post_init__(self):
        if not (self.f > 0 and self.w > 0):
            raise InvariantViolation("focal length and pixel pitch must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvariantViolation("sensor size must be positive")
        object.__setattr__(self, "c_o", (float(self.c_o[0]), float(self.c_o[1])))
        r = _frozen(check_rotation(self.r_ci), np.float64)
        object.__setattr__(self, "r_ci", r)

    @property
    def rho(self) -> float:
        """Focal length expressed in pixels."""
        return self.f / self.w

    @classmethod
    def centered(cls, width=346, height=260, f=4e-3, w=18.5e-6, r_ci=None) -> "CameraModel":
        return cls(
            f=f,
            w=w,
            c_o=((width - 1) / 2.0, (height - 1) / 2.0),
            r_ci=np.eye(3) if r_ci is None else r_ci,
            width=width,
            height=height,
        )


class RotationAngles(NamedTuple):
    phi: float = 0.0  # about camera x
    theta: float = 0.0  # about camera y
    psi: float = 0.0  # about camera z


@dataclass(frozen=True)
class CompensationConfig:
    gamma_min: float = 2.0
    gamma_max: float = 5.0
    a: float = 0.15
    b: float = 3.0
    t_stable: float = 3.0  # rad/s
    n_min: int = 5
    n_max: int = 50
    constant_depth: float = 1.0  # meters; the warp is purely rotational
    beta_axes: str = "phi"  # axis driving the y-direction warp: phi or psi
    warp_reference: str = "start"  # start | mid | end

    def validate(self) -> "CompensationConfig":
        if not (0 < self.gamma_min < self.gamma_max):
            raise InvariantViolation("require 0 < gamma_min < gamma_max")
        if not (self.a > 0 and self.b > 0):
            raise InvariantViolation("require a > 0 and b > 0")
        if self.t_stable < 0:
            raise InvariantViolation("t_stable must be non-negative")
        if not (1 <= self.n_min <= self.n_max):
            raise InvariantViolation("require 1 <= n_min <= n_max")
        if self.constant_depth <= 0:
            raise InvariantViolation("constant_depth must be positive")
        if self.beta_axes not in ("phi", "psi"):
            raise InvariantViolation("beta_axes must be phi or psi")
        if self.warp_reference not in ("start", "mid", "end"):
            raise InvariantViolation("warp_reference must be start, mid or end")
        return self


@dataclass(frozen=True)
class IgsConfig:
    k: int = 8
    w_rel: float = 0.1
    w_q: float = 0.1
    w_u: float = 0.6
    w_d: float = 0.1
    tau: float = 1.0
    hist_bins: int = 8

    def validate(self) -> "IgsConfig":
        weights = (self.w_rel, self.w_q, self.w_u, self.w_d)
        if self.k < 1:
            raise InvariantViolation("k must be at least 1")
        if min(weights) < 0 or max(weights) <= 0:
            raise InvariantViolation("weights must be >= 0 with at least one > 0")
        if self.tau <= 0:
            raise InvariantViolation("tau must be positive")
        if self.hist_bins < 1:
            raise InvariantViolation("hist_bins must be at least 1")
        return self


@dataclass(frozen=True, eq=False)
class EventFrame:
    """Three-channel raster: positive count, negative count, mean normalized time."""

    width: int
    height: int
    pos_count: np.ndarray
    neg_count: np.ndarray
    mean_ts: np.ndarray
    t_start: int
    t_end: int

    @property
    def counts(self) -> np.ndarray:
        return self.pos_count + self.neg_count

    @classmethod
    def empty(cls, width, height, t_start=0, t_end=0) -> "EventFrame":
        z = np.zeros((height, width), dtype=np.int64)
        return cls(width, height, z, z.copy(), np.zeros((height, width)), t_start, t_end)


EventsLike = Union[EventStream, Sequence[Event]]


def _columns(events: EventsLike, width, height):
    if isinstance(events, EventStream):
        return events.t, events.x, events.y, events.p
    s = EventStream.from_events(list(events), width, height)
    return s.t, s.x, s.y, s.p


def accumulate_frame(events: EventsLike, width: int, height: int, t_start: int, t_end: int) -> EventFrame:
    """Accumulate events into an :class:`EventFrame` covering ``[t_start, t_end]``."""
    if t_start > t_end:
        raise TimestampOutsideSpan(f"t_start {t_start} > t_end {t_end}")
    t, x, y, p = _columns(events, width, height)
    if len(t) == 0:
        return EventFrame.empty(width, height, t_start, t_end)
    oob = (x < 0) | (x >= width) | (y < 0) | (y >= height)
    if oob.any():
        i = int(np.flatnonzero(oob)[0])
        raise OutOfBoundsCoordinate(f"event {i} at ({x[i]}, {y[i]}) outside {width}x{height}", index=i)
    outside = (t < t_start) | (t > t_end)
    if outside.any():
        i = int(np.flatnonzero(outside)[0])
        raise TimestampOutsideSpan(f"event {i} at t={t[i]} outside [{t_start}, {t_end}]", index=i)

    npix = width * height
    idx = y.astype(np.int64) * width + x
    pos = np.bincount(idx[p > 0], minlength=npix)
    neg = np.bincount(idx[p < 0], minlength=npix)
    if t_end > t_start:
        norm = (t - t_start) / float(t_end - t_start)
    else:
        norm = np.zeros(len(t))
    total = pos + neg
    tsum = np.bincount(idx, weights=norm, minlength=npix)
    mean = np.zeros(npix)
    hit = total > 0
    mean[hit] = np.clip(tsum[hit] / total[hit], 0.0, 1.0)
    shape = (height, width)
    return EventFrame(
        width, height, pos.reshape(shape), neg.reshape(shape), mean.reshape(shape), int(t_start), int(t_end)
    )


class FrameStats(NamedTuple):
    event_count: int
    active_pixels: int
    density: float


def frame_stats(frame: EventFrame) -> FrameStats:
    counts = frame.counts
    n = int(counts.sum())
    active = int(np.count_nonzero(counts))
    return FrameStats(n, active, n / active if active else 0.0)
