"""Rotational event warping driven by integrated gyroscope angles.

For an event at pixel ``x`` with offset ``rel = x - c_o`` from the principal point,
the incidence angle is ``atan(rel / rho)`` with ``rho = f / w``. A camera rotation
``rot`` about the orthogonal image axis moves it to ``beta = alpha - rot`` and the
equivalent translation is ``T = rel - rho * tan(beta)``. Rotation about the optical
axis enters as a plain 2-D rotation, so the warped position is::

    x' = R(psi) @ rel - T + c_o

Axis convention: camera x right, y down, z forward; ``theta`` (about y) drives the
x-direction warp and ``phi`` (about x) the y-direction warp.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ImuDoesNotCoverEvents, TangentDomain
from .imu import GroupSet, angles_at, cumulative_angles, group_imu, to_camera_frame
from .model import (
    CameraModel,
    CompensationConfig,
    Event,
    EventFrame,
    EventStream,
    ImuSequence,
    RotationAngles,
    accumulate_frame,
)

# incidence angles closer than this to +-pi/2 are treated as unwarpable
TANGENT_MARGIN = 1e-6
_LIMIT = math.pi / 2 - TANGENT_MARGIN


def incidence_angle(rel, rho):
    return np.arctan(np.divide(rel, rho)) if np.ndim(rel) else math.atan(rel / rho)


def translation_component(rel, rot, rho):
    """Per-axis equivalent translation ``rel - rho * tan(atan(rel / rho) - rot)`` in pixels."""
    if np.ndim(rel) or np.ndim(rot):
        beta = np.arctan(np.divide(rel, rho)) - rot
        if np.any(np.abs(beta) >= _LIMIT):
            raise TangentDomain("incidence angle after rotation reaches +-pi/2")
        return np.where(np.equal(rot, 0), 0.0, rel - rho * np.tan(beta))
    if rot == 0:
        return 0.0
    beta = math.atan(rel / rho) - rot
    if abs(beta) >= _LIMIT:
        raise TangentDomain(f"beta = {beta:.6f} rad is outside the tangent domain")
    return rel - rho * math.tan(beta)


def warp_event(event: Event, rot: RotationAngles, cam: CameraModel, beta_axes: str = "phi") -> Tuple[float, float]:
    """Continuous (sub-pixel) position of ``event`` after undoing rotation ``rot``."""
    rot = RotationAngles(*rot)
    cx, cy = cam.c_o
    rx, ry = event.x - cx, event.y - cy
    tx = translation_component(rx, rot.theta, cam.rho)
    ty = translation_component(ry, rot.phi if beta_axes == "phi" else rot.psi, cam.rho)
    c, s = math.cos(rot.psi), math.sin(rot.psi)
    return c * rx - s * ry - tx + cx, s * rx + c * ry - ty + cy


def warp_coords(x, y, phi, theta, psi, cam: CameraModel, beta_axes: str = "phi"):
    """Vectorized :func:`warp_event`.

    Returns ``(xw, yw, ok)``; ``ok`` is False where the tangent model breaks down, and the
    corresponding coordinates are NaN.
    """
    rho = cam.rho
    cx, cy = cam.c_o
    rx = np.asarray(x, dtype=np.float64) - cx
    ry = np.asarray(y, dtype=np.float64) - cy
    by_rot = phi if beta_axes == "phi" else psi
    bx = np.arctan(rx / rho) - theta
    by = np.arctan(ry / rho) - by_rot
    ok = (np.abs(bx) < _LIMIT) & (np.abs(by) < _LIMIT)
    with np.errstate(invalid="ignore"):
        tx = np.where(np.equal(theta, 0), 0.0, rx - rho * np.tan(np.where(ok, bx, np.nan)))
        ty = np.where(np.equal(by_rot, 0), 0.0, ry - rho * np.tan(np.where(ok, by, np.nan)))
    c, s = np.cos(psi), np.sin(psi)
    return c * rx - s * ry - tx + cx, s * rx + c * ry - ty + cy, ok


def round_half_away(v):
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def scale_and_round(orig: Event, warped, gamma: float, width: int, height: int) -> Optional[Event]:
    """Scale the warp displacement by ``gamma`` and snap to the pixel grid.

    Returns None when the result falls outside the sensor (the event is dropped).
    """
    fx = float(round_half_away(orig.x + gamma * (warped[0] - orig.x)))
    fy = float(round_half_away(orig.y + gamma * (warped[1] - orig.y)))
    if not (0 <= fx < width and 0 <= fy < height):
        return None
    return Event(int(fx), int(fy), orig.t, orig.p)


@dataclass
class CompensationResult:
    stream: EventStream
    frames: list
    dropped: int
    group_spans: list
    groups: Optional[GroupSet] = None
    frame_groups: list = field(default_factory=list)  # group index of each frame
    timings: dict = field(default_factory=dict)  # seconds per stage
    kept: Optional[np.ndarray] = None  # input-event mask of events present in ``stream``
    event_groups: Optional[np.ndarray] = None  # group index of every input event


def group_boundaries(groups: GroupSet) -> np.ndarray:
    return np.array([g.t_start for g in groups.groups], dtype=np.int64)


def _reference_times(groups: GroupSet, mode: str) -> np.ndarray:
    if mode == "start":
        return np.array([g.t_start for g in groups.groups], dtype=np.int64)
    if mode == "end":
        return np.array([g.t_end for g in groups.groups], dtype=np.int64)
    return np.array([(g.t_start + g.t_end) // 2 for g in groups.groups], dtype=np.int64)


def compensate_stream(
    stream: EventStream,
    imu: ImuSequence,
    cam: CameraModel,
    cfg: CompensationConfig,
    groups: Optional[GroupSet] = None,
) -> CompensationResult:
    """Warp every event back to its group's reference pose and build one frame per group.

    ``imu`` is in the IMU frame; ``cam.r_ci`` is applied here. A group owns the time
    interval from its first sample up to the next group's first sample (the last group is
    closed at its last sample).
    """
    imu.require_nonempty()
    timings = {}
    t0 = time.perf_counter()
    imu_c = to_camera_frame(imu, cam.r_ci)
    if groups is None:
        groups = group_imu(imu_c, cfg)
    cum = cumulative_angles(imu_c)
    timings["grouping"] = time.perf_counter() - t0

    n = len(stream)
    if n and (stream.t[0] < imu.t[0] or stream.t[-1] > imu.t[-1]):
        raise ImuDoesNotCoverEvents(
            f"events span [{stream.t[0]}, {stream.t[-1]}] but IMU covers [{imu.t[0]}, {imu.t[-1]}]"
        )
    if n == 0:
        timings.update(warping=0.0, accumulation=0.0)
        return CompensationResult(stream, [], 0, [], groups, [], timings, np.zeros(0, bool), np.zeros(0, np.int64))

    t1 = time.perf_counter()
    bounds = group_boundaries(groups)
    gidx = np.searchsorted(bounds, stream.t, side="right") - 1
    ref_t = _reference_times(groups, cfg.warp_reference)
    # integrate once per event and once per group, then difference
    ang_ev = angles_at(imu_c, cum, stream.t)
    ang_ref = angles_at(imu_c, cum, ref_t)
    rot = ang_ev - ang_ref[gidx]
    xw, yw, ok = warp_coords(stream.x, stream.y, rot[:, 0], rot[:, 1], rot[:, 2], cam, cfg.beta_axes)
    gamma = np.array([g.gamma for g in groups.groups])[gidx]
    with np.errstate(invalid="ignore"):
        fx = round_half_away(stream.x + gamma * (xw - stream.x))
        fy = round_half_away(stream.y + gamma * (yw - stream.y))
        keep = ok & (fx >= 0) & (fx < stream.width) & (fy >= 0) & (fy < stream.height)
    out = EventStream(
        stream.width,
        stream.height,
        stream.t[keep],
        fx[keep].astype(np.int32),
        fy[keep].astype(np.int32),
        stream.p[keep],
    )
    timings["warping"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    g_first, g_last = int(gidx[0]), int(gidx[-1])
    kept_g = gidx[keep]
    edges = np.searchsorted(kept_g, np.arange(g_first, g_last + 2), side="left")
    frames, spans, owners = [], [], []
    for j, gi in enumerate(range(g_first, g_last + 1)):
        ts = int(bounds[gi])
        te = int(bounds[gi + 1]) if gi + 1 < len(bounds) else int(groups.groups[gi].t_end)
        frames.append(accumulate_frame(out.take(slice(edges[j], edges[j + 1])), stream.width, stream.height, ts, te))
        spans.append((ts, te))
        owners.append(gi)
    timings["accumulation"] = time.perf_counter() - t2
    return CompensationResult(out, frames, int(n - keep.sum()), spans, groups, owners, timings, keep, gidx)
