"""Synthetic event + IMU generator for a constant-depth point scene under camera rotation.

Each scene point projects to an integer pixel at zero rotation. Its image track under
rotation is the exact inverse of the compensation warp, and an event is emitted whenever
the track crosses an integer pixel boundary. Events sit on the crossed boundary, so an
exact warp puts them back on the starting pixel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .compensation import TANGENT_MARGIN, round_half_away
from .errors import InvariantViolation, TangentDomain
from .model import AXES, CameraModel, EventStream, ImuSequence

GRAVITY = (0.0, 0.0, -9.81)
PROFILES = ("sinusoid", "ramp", "constant")
COARSE_STEP_US = 50
_CHUNK = 32


@dataclass(frozen=True, eq=False)
class Scene:
    points: np.ndarray  # (n, 3) meters, camera frame at zero rotation
    pixels: np.ndarray  # (n, 2) integer zero-rotation projections
    depth: float
    seed: int

    def __len__(self):
        return len(self.points)


def make_scene(n_points: int, cam: CameraModel, margin_px: float = 20, seed: int = 0, depth: float = 1.0) -> Scene:
    """Sample points whose zero-rotation projections land on integer pixels inside the margin.

    The margin is clamped per axis so the allowed window always contains the principal point.
    """
    if n_points < 1:
        raise InvariantViolation("n_points must be at least 1")
    rng = np.random.default_rng(seed)
    cols = []
    for size, c in ((cam.width, cam.c_o[0]), (cam.height, cam.c_o[1])):
        m = min(float(margin_px), math.floor(c), math.floor(size - 1 - c))
        lo, hi = math.ceil(m), math.floor(size - 1 - m)
        cols.append(rng.integers(lo, hi + 1, size=n_points))
    pixels = np.stack(cols, axis=1).astype(np.int64)
    rel = pixels - np.asarray(cam.c_o)
    points = np.column_stack([rel * depth / cam.rho, np.full(n_points, float(depth))])
    return Scene(points, pixels, float(depth), int(seed))


@dataclass(frozen=True)
class Trajectory:
    profile: str = "sinusoid"
    axis: str = "y"
    amplitude: float = 0.26  # rad
    frequency: float = 2.0  # Hz, sinusoid only
    duration: float = 3.0  # s
    imu_rate: float = 1000.0  # Hz

    def validate(self) -> "Trajectory":
        if self.profile not in PROFILES:
            raise InvariantViolation(f"profile must be one of {PROFILES}")
        if self.axis not in AXES:
            raise InvariantViolation("axis must be x, y or z")
        if not self.duration > 0:
            raise InvariantViolation("duration must be positive")
        if self.imu_rate < 100:
            raise InvariantViolation("imu_rate must be at least 100 Hz")
        if not abs(self.amplitude) < math.pi / 3:
            raise InvariantViolation("peak angle must stay below pi/3")
        if self.profile == "sinusoid" and not self.frequency > 0:
            raise InvariantViolation("sinusoid frequency must be positive")
        return self

    @property
    def duration_us(self) -> int:
        return int(round(self.duration * 1e6))

    def angle(self, t_s) -> np.ndarray:
        """Rotation angle on the trajectory axis at times ``t_s`` (seconds)."""
        t_s = np.asarray(t_s, dtype=np.float64)
        if self.profile == "sinusoid":
            return self.amplitude * np.sin(2 * np.pi * self.frequency * t_s)
        return self.amplitude * t_s / self.duration

    def rate(self, t_s) -> np.ndarray:
        t_s = np.asarray(t_s, dtype=np.float64)
        if self.profile == "sinusoid":
            w = 2 * np.pi * self.frequency
            return self.amplitude * w * np.cos(w * t_s)
        return np.full_like(t_s, self.amplitude / self.duration)


def make_trajectory(traj: Trajectory) -> Tuple[ImuSequence, Callable]:
    """Exact-rate IMU samples for ``traj`` plus its analytic angle function.

    The angle function maps seconds to (m, 3) angles ``[phi, theta, psi]``.
    """
    traj.validate()
    n = math.ceil(traj.duration * traj.imu_rate - 1e-9) + 1
    t_us = np.round(np.arange(n) * (1e6 / traj.imu_rate)).astype(np.int64)
    axis = AXES.index(traj.axis)
    omega = np.zeros((n, 3))
    omega[:, axis] = traj.rate(t_us * 1e-6)
    accel = np.tile(GRAVITY, (n, 1))

    def angles(t_s):
        t_s = np.atleast_1d(np.asarray(t_s, dtype=np.float64))
        out = np.zeros((t_s.size, 3))
        out[:, axis] = traj.angle(t_s)
        return out

    return ImuSequence(t_us, omega, accel), angles


def forward_track(pixels: np.ndarray, angle: np.ndarray, axis: str, cam: CameraModel):
    """Image position of zero-rotation pixels under a single-axis rotation.

    ``pixels`` is (p, 2), ``angle`` broadcasts against (p, m). Returns (ux, uy), each (p, m).
    This inverts :func:`eventstab.compensation.warp_event` for a rotation on one axis.
    """
    rho = cam.rho
    px = pixels[:, 0:1].astype(np.float64)
    py = pixels[:, 1:2].astype(np.float64)
    rx, ry = px - cam.c_o[0], py - cam.c_o[1]
    angle = np.broadcast_to(angle, np.broadcast_shapes(angle.shape, px.shape))
    if axis == "z":
        c, s = np.cos(angle), np.sin(angle)
        return px + (c - 1) * rx + s * ry, py - s * rx + (c - 1) * ry
    rel = rx if axis == "y" else ry
    a0 = np.arctan(rel / rho)
    beta = a0 + angle
    if np.any(np.abs(beta) >= math.pi / 2 - TANGENT_MARGIN):
        raise TangentDomain("scene point leaves the tangent model's domain")
    shift = rho * (np.tan(beta) - np.tan(a0))
    if axis == "y":
        return px + shift, np.broadcast_to(py, shift.shape)
    return np.broadcast_to(px, shift.shape), py + shift


def _crossings(u: np.ndarray):
    """(point, step, boundary, direction) for every integer boundary crossed between samples."""
    k = np.floor(u)
    dk = np.diff(k, axis=1)
    pts, steps = np.nonzero(dk)
    out_p, out_s, out_b, out_d = [], [], [], []
    for n in range(1, int(np.abs(dk).max(initial=0)) + 1):
        sel = np.abs(dk[pts, steps]) >= n
        p, s = pts[sel], steps[sel]
        d = np.sign(dk[p, s]).astype(np.int64)
        # nth boundary in the direction of travel
        b = np.where(d > 0, k[p, s] + n, k[p, s] - n + 1)
        out_p.append(p), out_s.append(s), out_b.append(b), out_d.append(d)
    if not out_p:
        e = np.zeros(0, np.int64)
        return e, e, np.zeros(0), e
    return np.concatenate(out_p), np.concatenate(out_s), np.concatenate(out_b), np.concatenate(out_d)


def _render_chunk(pixels, ids, traj: Trajectory, cam: CameraModel, grid_us):
    a = traj.angle(grid_us * 1e-6)[None, :]
    ux, uy = forward_track(pixels, a, traj.axis, cam)
    cols = {"t": [], "x": [], "y": [], "p": [], "id": []}
    for ax, u in ((0, ux), (1, uy)):
        p, s, b, d = _crossings(u)
        if p.size == 0:
            continue
        lo = grid_us[s].copy()  # condition false here
        hi = grid_us[s + 1].copy()  # condition true here
        while True:
            open_ = hi - lo > 1
            if not open_.any():
                break
            mid = (lo + hi) // 2
            val = forward_track(pixels[p], traj.angle(mid * 1e-6)[:, None], traj.axis, cam)[ax][:, 0]
            past = np.where(d > 0, val >= b, val < b)
            hi = np.where(open_ & past, mid, hi)
            lo = np.where(open_ & ~past, mid, lo)
        other = forward_track(pixels[p], traj.angle(hi * 1e-6)[:, None], traj.axis, cam)[1 - ax][:, 0]
        xy = (b, round_half_away(other)) if ax == 0 else (round_half_away(other), b)
        cols["t"].append(hi)
        cols["x"].append(xy[0])
        cols["y"].append(xy[1])
        cols["p"].append(d)
        cols["id"].append(ids[p])
    return cols


def render(scene: Scene, traj: Trajectory, cam: CameraModel, noise_rate: float = 0.0, seed: int = 0):
    """Render ``scene`` under ``traj``.

    Returns ``(stream, imu, provenance)`` where ``provenance[i]`` is the scene point id that
    generated event ``i`` (-1 for background noise).
    """
    imu, _ = make_trajectory(traj)
    dur = traj.duration_us
    grid_us = np.unique(np.append(np.arange(0, dur + 1, COARSE_STEP_US, dtype=np.int64), dur))
    parts = {"t": [], "x": [], "y": [], "p": [], "id": []}
    for start in range(0, len(scene), _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, len(scene)))
        chunk = _render_chunk(scene.pixels[ids], ids, traj, cam, grid_us)
        for key in parts:
            parts[key].extend(chunk[key])
    if noise_rate > 0:
        rng = np.random.default_rng(seed)
        m = rng.poisson(noise_rate * traj.duration)
        parts["t"].append(rng.integers(0, dur + 1, m))
        parts["x"].append(rng.integers(0, cam.width, m))
        parts["y"].append(rng.integers(0, cam.height, m))
        parts["p"].append(rng.choice([-1, 1], m))
        parts["id"].append(np.full(m, -1))
    cat = {k: (np.concatenate(v) if v else np.zeros(0)) for k, v in parts.items()}
    t = cat["t"].astype(np.int64)
    x = cat["x"].astype(np.int64)
    y = cat["y"].astype(np.int64)
    ids = cat["id"].astype(np.int64)
    inside = (x >= 0) & (x < cam.width) & (y >= 0) & (y < cam.height)
    t, x, y, p, ids = t[inside], x[inside], y[inside], cat["p"].astype(np.int8)[inside], ids[inside]
    order = np.lexsort((x, y, ids, t))
    stream = EventStream(cam.width, cam.height, t[order], x[order], y[order], p[order])
    return stream, imu, ids[order]
