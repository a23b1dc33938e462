"""IMU handling: camera-frame alignment, rotation integration and adaptive grouping.

Grouping runs in three stages over the gyroscope rate on the dominant axis:

1. label each sample Stable (``|w| <= t_stable``) or Active and take maximal runs;
2. refine Active runs by sign, then at the speed peak (acceleration / deceleration),
   then at the half-energy point of the cumulative ``|w|``;
3. merge runs shorter than ``n_min`` and bisect runs longer than ``n_max``.

Each final group gets the scaling factor ``g_min + (g_max - g_min) / (a * n + b)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from .errors import EmptySequence, SpanOutsideSequence
from .model import AXES, CompensationConfig, ImuSequence, RotationAngles, check_rotation

STABLE = "Stable"
ACTIVE = "Active"
US = 1e-6

Range = Tuple[int, int]  # inclusive (first, last)


@dataclass(frozen=True)
class Group:
    kind: str
    first_idx: int
    last_idx: int
    t_start: int
    t_end: int
    gamma: float = float("nan")

    @property
    def n_imu(self) -> int:
        return self.last_idx - self.first_idx + 1


@dataclass(frozen=True)
class GroupSet:
    groups: tuple
    dominant_axis: str  # axis used for segmentation, over the whole sequence
    group_axes: tuple = ()  # per group: axis of largest mean |w| inside the group

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, i) -> Group:
        return self.groups[i]

    @property
    def lengths(self) -> List[int]:
        return [g.n_imu for g in self.groups]

    @property
    def ranges(self) -> List[Range]:
        return [(g.first_idx, g.last_idx) for g in self.groups]


# ---------------------------------------------------------------------------
# frames and integration


def to_camera_frame(seq: ImuSequence, r_ci) -> ImuSequence:
    """Rotate gyroscope and accelerometer vectors from the IMU frame into the camera frame."""
    r = check_rotation(r_ci)
    return ImuSequence(seq.t, seq.omega @ r.T, seq.accel @ r.T)


def cumulative_angles(seq: ImuSequence) -> np.ndarray:
    """Trapezoidal integral of the angular rate from the first sample to every sample, (n, 3) rad."""
    seq.require_nonempty()
    dt = np.diff(seq.t) * US
    steps = 0.5 * (seq.omega[1:] + seq.omega[:-1]) * dt[:, None]
    out = np.zeros_like(seq.omega)
    np.cumsum(steps, axis=0, out=out[1:])
    return out


def angles_at(seq: ImuSequence, cum: np.ndarray, t) -> np.ndarray:
    """Integrated angle at arbitrary times (rad, shape (m, 3)), rate interpolated linearly.

    Times must lie within the sample span; that is the caller's check.
    """
    t = np.asarray(t, dtype=np.int64)
    ts = seq.t
    if len(ts) == 1:
        return np.zeros((t.size, 3))
    k = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
    tau = ((t - ts[k]) * US)[:, None]
    span = ((ts[k + 1] - ts[k]) * US)[:, None]
    w0 = seq.omega[k]
    slope = (seq.omega[k + 1] - w0) / span
    return cum[k] + w0 * tau + 0.5 * slope * tau * tau


def integrate_rotation(seq: ImuSequence, t0: int, t1: int, cum=None) -> RotationAngles:
    """Rotation (phi, theta, psi) accumulated between ``t0`` and ``t1`` (microseconds)."""
    seq.require_nonempty()
    if t0 > t1 or t0 < seq.t[0] or t1 > seq.t[-1]:
        raise SpanOutsideSequence(f"[{t0}, {t1}] not within [{seq.t[0]}, {seq.t[-1]}]")
    if t0 == t1:
        return RotationAngles(0.0, 0.0, 0.0)
    if cum is None:
        cum = cumulative_angles(seq)
    a = angles_at(seq, cum, [t0, t1])
    d = a[1] - a[0]
    return RotationAngles(float(d[0]), float(d[1]), float(d[2]))


# ---------------------------------------------------------------------------
# grouping


def dominant_axis(omega: np.ndarray) -> int:
    """Index of the axis with the largest mean |w| (first one on ties)."""
    return int(np.argmax(np.abs(np.reshape(omega, (-1, 3))).mean(axis=0)))


def _runs(labels: np.ndarray) -> List[Range]:
    if labels.size == 0:
        return []
    cuts = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate(([0], cuts))
    ends = np.concatenate((cuts - 1, [labels.size - 1]))
    return list(zip(starts.tolist(), ends.tolist()))


def _make_group(seq: ImuSequence, kind: str, first: int, last: int) -> Group:
    return Group(kind, first, last, int(seq.t[first]), int(seq.t[last]))


def segment_stable_active(seq: ImuSequence, t_stable: float) -> GroupSet:
    seq.require_nonempty()
    axis = dominant_axis(seq.omega)
    stable = np.abs(seq.omega[:, axis]) <= t_stable
    groups = tuple(
        _make_group(seq, STABLE if stable[a] else ACTIVE, a, b) for a, b in _runs(stable)
    )
    return GroupSet(groups, AXES[axis])


def _half_energy_split(w: np.ndarray) -> List[Range]:
    e = np.abs(w)
    cum = np.cumsum(e)
    j = int(np.searchsorted(cum, cum[-1] / 2.0, side="left"))
    j = min(j, len(w) - 1)
    return [r for r in ((0, j), (j + 1, len(w) - 1)) if r[1] >= r[0]]


def refine_active_group(values: Sequence[float]) -> List[Range]:
    """Split an Active run into sign-constant, monotone-speed, energy-balanced sub-ranges.

    Returned ranges are inclusive and relative to ``values``.
    """
    w = np.asarray(values, dtype=np.float64)
    out: List[Range] = []
    for s0, s1 in _runs(np.sign(w)):
        seg = w[s0:s1 + 1]
        k = int(np.argmax(np.abs(seg)))
        for p0, p1 in ((0, k), (k + 1, len(seg) - 1)):
            if p1 < p0:
                continue
            for a, b in _half_energy_split(seg[p0:p1 + 1]):
                out.append((s0 + p0 + a, s0 + p0 + b))
    return out


def refine_groups(raw: GroupSet, seq: ImuSequence) -> GroupSet:
    """Stage 2 over a raw segmentation; Stable groups pass through untouched."""
    axis = AXES.index(raw.dominant_axis)
    w = seq.omega[:, axis]
    out = []
    for g in raw.groups:
        if g.kind == STABLE:
            out.append(g)
            continue
        for a, b in refine_active_group(w[g.first_idx:g.last_idx + 1]):
            out.append(_make_group(seq, ACTIVE, g.first_idx + a, g.first_idx + b))
    return GroupSet(tuple(out), raw.dominant_axis)


def _merge(a: Group, b: Group, seq) -> Group:
    kind = ACTIVE if ACTIVE in (a.kind, b.kind) else STABLE
    return _make_group(seq, kind, a.first_idx, b.last_idx)


def _bisect(g: Group, n_max: int, seq) -> List[Group]:
    if g.n_imu <= n_max:
        return [g]
    mid = g.first_idx + g.n_imu // 2
    return (_bisect(_make_group(seq, g.kind, g.first_idx, mid - 1), n_max, seq)
            + _bisect(_make_group(seq, g.kind, mid, g.last_idx), n_max, seq))


def regularize_groups(groups: GroupSet, n_min: int, n_max: int, seq: ImuSequence) -> GroupSet:
    """Merge groups shorter than ``n_min`` forward (the tail backward), then bisect long ones.

    Bisection halves a group of ``n`` samples into ``n // 2`` and ``n - n // 2``; the halves
    stay at or above ``n_min`` whenever ``n_max >= 2 * n_min - 1``.
    """
    merged: List[Group] = []
    pending = None
    for g in groups.groups:
        pending = g if pending is None else _merge(pending, g, seq)
        if pending.n_imu >= n_min:
            merged.append(pending)
            pending = None
    if pending is not None:
        if merged:
            merged[-1] = _merge(merged[-1], pending, seq)
        else:
            merged.append(pending)
    out = []
    for g in merged:
        out.extend(_bisect(g, n_max, seq))
    return GroupSet(tuple(out), groups.dominant_axis)


def scaling_factor(n_imu: int, cfg: CompensationConfig) -> float:
    return cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) / (cfg.a * n_imu + cfg.b)


def group_imu(seq: ImuSequence, cfg: CompensationConfig) -> GroupSet:
    """Full grouping pipeline; ``seq`` must already be in the camera frame."""
    if len(seq) == 0:
        raise EmptySequence("cannot group an empty IMU sequence")
    raw = segment_stable_active(seq, cfg.t_stable)
    refined = refine_groups(raw, seq)
    final = regularize_groups(refined, cfg.n_min, cfg.n_max, seq)
    groups = tuple(replace(g, gamma=scaling_factor(g.n_imu, cfg)) for g in final.groups)
    axes = tuple(AXES[dominant_axis(seq.omega[g.first_idx:g.last_idx + 1])] for g in groups)
    return GroupSet(groups, final.dominant_axis, axes)
