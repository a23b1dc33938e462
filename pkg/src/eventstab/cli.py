"""Command-line front end.

Subcommands: ``synth``, ``compensate``, ``sample``, ``eval`` and ``bench``.
Exit codes: 0 success, 2 usage error, 3 input format error, 4 invariant/config violation.
Errors print a single line ``error: <kind>: <detail>`` to stderr.
"""
from __future__ import annotations

import argparse
import logging
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import io as evio
from .compensation import compensate_stream
from .errors import EventStabError
from .metrics import AXIS_NAMES, bench_compensation, density_report
from .model import EventFrame, IgsConfig
from .sampling import igs_select
from .synth import Trajectory, make_scene, render

logger = logging.getLogger("eventstab")

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_INVARIANT = 0, 2, 3, 4
FRAME_RE = re.compile(r"frame_(\d+)_(-?\d+)_(-?\d+)\.ppm\Z")


class UsageError(Exception):
    kind = "UsageError"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path, data) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _event_format(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "bin"


def _read_file(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise evio.ParseError(f"cannot read {path}: {exc.strerror}") from None


def load_events(path, width=346, height=260):
    return evio.read_events(_read_file(path), _event_format(path), width, height)


def load_config(args):
    """Config file first, then ``--set`` overrides. Returns (Config, raw value strings)."""
    text = _read_file(args.config).decode("utf-8", "replace") if args.config else ""
    values = evio.parse_config_values(text)
    raw = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            raw[k] = v
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        values.update(evio.parse_config_values(f"{k} = {v}"))
        raw[k] = v
    return evio.build_config(values), raw


def config_block(cfg, raw) -> str:
    defaults = evio.config_values(cfg)
    lines = []
    for k, v in defaults.items():
        lines.append(f"config.{k} = {raw[k] if k in raw else evio._fmt(v)}")
    return "\n".join(lines) + "\n"


def _report(items) -> str:
    return "".join(f"{k} = {v}\n" for k, v in items)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    cfg, _ = load_config(args)
    cam = cfg.camera
    traj = Trajectory(args.profile, args.axis, args.amplitude, args.freq, args.duration, args.imu_rate).validate()
    scene = make_scene(args.points, cam, args.margin, args.seed, cfg.compensation.constant_depth)
    stream, imu, prov = render(scene, traj, cam, args.noise_rate, args.seed)
    _atomic_write(args.out_events, evio.write_events(stream, _event_format(args.out_events)))
    _atomic_write(args.out_imu, evio.write_imu_csv(imu))
    sidecar = "event_index,point_id\n" + "".join(f"{i},{p}\n" for i, p in enumerate(prov.tolist()))
    _atomic_write(str(args.out_events) + ".prov.csv", sidecar)
    print(f"events = {len(stream)}\nimu_samples = {len(imu)}")
    return EXIT_OK


def cmd_compensate(args) -> int:
    cfg, raw = load_config(args)
    cam = cfg.camera
    stream = load_events(args.events, cam.width, cam.height)
    imu = evio.read_imu_csv(_read_file(args.imu))
    res = compensate_stream(stream, imu, cam, cfg.compensation)
    _atomic_write(args.out_events, evio.write_events(res.stream, _event_format(args.out_events)))
    if args.frames_dir:
        d = Path(args.frames_dir)
        d.mkdir(parents=True, exist_ok=True)
        for i, f in enumerate(res.frames):
            _atomic_write(d / f"frame_{i:05d}_{f.t_start}_{f.t_end}.ppm", evio.export_frame_ppm(f))
        evio.save_frames_npz(d / "frames.npz", res.frames)
    axis = AXIS_NAMES[res.groups.dominant_axis] if res.groups else "yaw"
    rep = density_report(stream, res.stream, axis, res.group_spans)
    items = [
        ("input_events", len(stream)),
        ("output_events", len(res.stream)),
        ("dropped", res.dropped),
        ("groups", len(res.groups)),
        ("frames", len(res.frames)),
        ("dominant_axis", res.groups.dominant_axis),
        ("density.axis", rep.axis),
        ("density.raw", f"{rep.raw_density:.6f}"),
        ("density.compensated", f"{rep.compensated_density:.6f}"),
        ("density.ratio", f"{rep.ratio:.6f}"),
        ("frame_density.raw_mean", f"{rep.raw_frame_density:.6f}"),
        ("frame_density.compensated_mean", f"{rep.compensated_frame_density:.6f}"),
        ("frame_density.ratio", f"{rep.frame_ratio:.6f}"),
    ]
    for i, g in enumerate(res.groups):
        items.append((f"group.{i}", f"{g.kind} {g.first_idx} {g.last_idx} {g.t_start} {g.t_end} "
                                    f"{g.n_imu} {g.gamma:.9f}"))
    text = _report(items) + config_block(cfg, raw)
    if args.report:
        _atomic_write(args.report, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def load_frames_dir(path):
    d = Path(path)
    if not d.is_dir():
        raise evio.ParseError(f"{path} is not a directory")
    npz = d / "frames.npz"
    if npz.exists():
        return evio.load_frames_npz(npz)
    frames = []
    files = sorted(((int(m.group(1)), p, m) for p in d.iterdir() if (m := FRAME_RE.match(p.name))),
                   key=lambda item: item[0])
    for _, p, m in files:
        rgb = evio.read_ppm(p.read_bytes()).astype(np.int64)
        h, w, _ = rgb.shape
        frames.append(EventFrame(w, h, rgb[..., 0], rgb[..., 1], rgb[..., 2] / 255.0,
                                 int(m.group(2)), int(m.group(3))))
    return frames


def cmd_sample(args) -> int:
    if args.k is not None and args.k < 1:
        raise UsageError("--k must be a positive integer")
    cfg, _ = load_config(args)
    frames = load_frames_dir(args.frames_dir)
    igs = cfg.igs if args.k is None else IgsConfig(**{**cfg.igs.__dict__, "k": args.k}).validate()
    picks = igs_select(frames, igs)
    text = "".join(f"{i}\n" for i in picks)
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    raw_stream = load_events(args.raw, args.width, args.height)
    comp = load_events(args.compensated, args.width, args.height)
    spans = None
    if args.frames_dir:
        spans = [(f.t_start, f.t_end) for f in load_frames_dir(args.frames_dir)]
    rep = density_report(raw_stream, comp, args.axis, spans)
    items = [
        ("axis", rep.axis),
        ("raw_density", f"{rep.raw_density:.6f}"),
        ("compensated_density", f"{rep.compensated_density:.6f}"),
        ("ratio", f"{rep.ratio:.6f}"),
    ]
    if spans:
        items += [
            ("frame.raw_density", f"{rep.raw_frame_density:.6f}"),
            ("frame.compensated_density", f"{rep.compensated_frame_density:.6f}"),
            ("frame.ratio", f"{rep.frame_ratio:.6f}"),
        ]
    text = _report(items)
    if args.report:
        _atomic_write(args.report, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    cfg, _ = load_config(args)
    stream = load_events(args.events, cfg.camera.width, cfg.camera.height)
    imu = evio.read_imu_csv(_read_file(args.imu))
    rep = bench_compensation(stream, imu, cfg.camera, cfg.compensation, args.reps)
    items = [
        ("event_count", rep.event_count),
        ("wall_time_us", f"{rep.wall_time_us:.1f}"),
        ("throughput_events_per_s", f"{rep.throughput:.1f}"),
        ("identical_outputs", str(rep.identical_outputs).lower()),
    ]
    items += [(f"stage.{k}_us", f"{v:.1f}") for k, v in rep.stages_us.items()]
    sys.stdout.write(_report(items))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eventstab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        return sp

    s = with_config(sub.add_parser("synth", help="render a synthetic event + IMU pair"))
    s.add_argument("--profile", choices=("sinusoid", "ramp", "constant"), default="sinusoid")
    s.add_argument("--axis", choices=("x", "y", "z"), default="y")
    s.add_argument("--amplitude", type=float, default=0.26)
    s.add_argument("--freq", type=float, default=2.0)
    s.add_argument("--duration", type=float, default=3.0)
    s.add_argument("--imu-rate", type=float, default=1000.0)
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--margin", type=float, default=80.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-rate", type=float, default=0.0, help="background events per second")
    s.add_argument("--out-events", required=True)
    s.add_argument("--out-imu", required=True)
    s.set_defaults(func=cmd_synth)

    c = with_config(sub.add_parser("compensate", help="stabilize an event stream with IMU data"))
    c.add_argument("--events", required=True)
    c.add_argument("--imu", required=True)
    c.add_argument("--out-events", required=True)
    c.add_argument("--frames-dir")
    c.add_argument("--report")
    c.set_defaults(func=cmd_compensate)

    sm = with_config(sub.add_parser("sample", help="select keyframes from a frames directory"))
    sm.add_argument("--frames-dir", required=True)
    sm.add_argument("--k", type=int)
    sm.add_argument("--out")
    sm.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", help="pixel-event density of raw vs compensated streams")
    e.add_argument("--raw", required=True)
    e.add_argument("--compensated", required=True)
    e.add_argument("--frames-dir", help="use the frame spans found here for per-frame densities")
    e.add_argument("--axis", default="yaw", choices=("yaw", "pitch", "roll"))
    e.add_argument("--width", type=int, default=346, help="sensor width for CSV input")
    e.add_argument("--height", type=int, default=260, help="sensor height for CSV input")
    e.add_argument("--report")
    e.set_defaults(func=cmd_eval)

    b = with_config(sub.add_parser("bench", help="time the compensation pipeline"))
    b.add_argument("--events", required=True)
    b.add_argument("--imu", required=True)
    b.add_argument("--reps", type=int, default=5)
    b.set_defaults(func=cmd_bench)
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        return args.func(args)
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EventStabError as exc:
        detail = str(exc).replace("\n", " ")
        print(f"error: {exc.kind}: {detail}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: IOError: {exc}", file=sys.stderr)
        return EXIT_FORMAT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
