"""Command-line entry point: batch rendering, validation, calibration, serving.

Exit codes: 0 success, 1 lint diagnostics, 2 user-input error, 3 I/O or
environment error. ``PROSCENIUM_SEED`` is reserved but ignored; the engine
has no randomness.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import calibration as cal
from .compositor import Viewpoint, write_composite
from .core import DomainError, read_text_file, to_pam_bytes, to_ppm_bytes
from .profile import ParseError, parse_profile, validate
from .runtime import Command, Engine, command_from_wire, read_sensor_file
from .runtime import Step as RuntimeStep

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_USER_ERROR = 2
EXIT_IO_ERROR = 3


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_profile_text(path: str):
    return parse_profile(read_text_file(path))


def read_command_file(path: str | Path) -> list[tuple[int, Command, str]]:
    """NDJSON command log: one `{"tick": n, "cmd": ...}` object per line."""
    out: list[tuple[int, Command, str]] = []
    for lineno, line in enumerate(read_text_file(path).splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}:{lineno}: invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise DomainError(f"{path}:{lineno}: expected a JSON object")
        tick = obj.get("tick", 0)
        if not isinstance(tick, int) or tick < 0:
            raise DomainError(f"{path}:{lineno}: 'tick' must be a non-negative integer")
        origin = obj.get("origin", "operator")
        out.append((tick, command_from_wire(obj), origin))
    out.sort(key=lambda item: item[0])
    return out


def _parse_eye(text: str) -> Viewpoint:
    fields = text.split(",")
    if len(fields) != 3:
        raise DomainError(f"--eye takes X,Y,Z, got {text!r}")
    try:
        x, y, z = (float(f) for f in fields)
    except ValueError:
        raise DomainError(f"--eye takes numbers, got {text!r}") from None
    return Viewpoint(x, y, z)


class _Manifest:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.entries: list[tuple[str, str]] = []

    def write_file(self, name: str, data: bytes) -> None:
        (self.out_dir / name).write_bytes(data)
        self.entries.append((name, hashlib.sha256(data).hexdigest()))

    def finish(self) -> None:
        lines = [f"{digest}  {name}" for name, digest in self.entries]
        (self.out_dir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_render(args) -> int:
    try:
        profile = _load_profile_text(args.profile)
    except ParseError as exc:
        _err(f"{args.profile}: line {exc.line}, column {exc.column}: {exc.message}")
        return EXIT_USER_ERROR

    try:
        commands = read_command_file(args.commands) if args.commands else []
        sensors = read_sensor_file(args.sensors) if args.sensors else []
        calibration = cal.read_transform(args.calibration) if args.calibration else None
        eye = _parse_eye(args.eye)
        engine = Engine(profile, asset_root=Path(args.profile).parent, eye=eye,
                        calibration=calibration)
    except (DomainError, cal.CalibrationError) as exc:
        _err(str(exc))
        return EXIT_USER_ERROR

    if sensors:
        # Binding-fired triggers will fire again from the sensor replay.
        commands = [c for c in commands if c[2] != "binding"]

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = _Manifest(out_dir)
        cmd_idx = 0
        sensor_idx = 0
        for frame_no in range(args.frames):
            while cmd_idx < len(commands) and commands[cmd_idx][0] <= engine.tick:
                _, command, origin = commands[cmd_idx]
                cmd_idx += 1
                if isinstance(command, RuntimeStep):
                    # The offline loop already advances every tick; a logged
                    # step's effect lives in later commands' tick stamps.
                    continue
                ok, reply = engine.handle_command(command, origin=origin)
                if not ok:
                    _err(f"command at tick {engine.tick} failed: {reply}")
                    return EXIT_USER_ERROR
            front, back, frame = engine.render()
            manifest.write_file(f"front_{frame_no:05d}.pam", to_pam_bytes(front))
            manifest.write_file(f"back_{frame_no:05d}.pam", to_pam_bytes(back))
            manifest.write_file(f"composite_{frame_no:05d}.ppm", to_ppm_bytes(frame.buffer))
            batch = []
            while sensor_idx < len(sensors) and sensors[sensor_idx][0] <= engine.tick:
                batch.append(sensors[sensor_idx][1])
                sensor_idx += 1
            engine.step(batch)
        manifest.finish()
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO_ERROR
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        profile = _load_profile_text(args.profile)
    except ParseError as exc:
        _err(f"{args.profile}: line {exc.line}, column {exc.column}: {exc.message}")
        return EXIT_USER_ERROR
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO_ERROR
    notes = validate(profile)
    for note in notes:
        print(note)
    return EXIT_DIAGNOSTICS if notes else EXIT_OK


def cmd_calibrate(args) -> int:
    try:
        src, dst = cal.read_correspondences(args.pairs)
        transform = cal.estimate_similarity(src, dst, with_scale=not args.no_scale)
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO_ERROR
    except (DomainError, cal.CalibrationError) as exc:
        _err(str(exc))
        return EXIT_USER_ERROR
    try:
        cal.write_transform(transform, args.out)
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO_ERROR
    report = cal.rmse(transform, src, dst)
    print(f"rmse {report.rmse_m * 1000.0:.3f} mm")
    return EXIT_OK


def _read_eye_path(path: str) -> list[tuple[float, Viewpoint]]:
    samples: list[tuple[float, Viewpoint]] = []
    for lineno, raw in enumerate(read_text_file(path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4:
            raise DomainError(f"{path}:{lineno}: expected `t x y z`")
        try:
            t, x, y, z = (float(f) for f in fields)
        except ValueError:
            raise DomainError(f"{path}:{lineno}: non-numeric field") from None
        samples.append((t, Viewpoint(x, y, z)))
    if not samples:
        raise DomainError(f"{path}: empty eye path")
    return samples


def cmd_simulate_view(args) -> int:
    try:
        profile = _load_profile_text(args.profile)
    except ParseError as exc:
        _err(f"{args.profile}: line {exc.line}, column {exc.column}: {exc.message}")
        return EXIT_USER_ERROR
    try:
        eyes = _read_eye_path(args.eye_path)
        engine = Engine(profile, asset_root=Path(args.profile).parent)
    except DomainError as exc:
        _err(str(exc))
        return EXIT_USER_ERROR
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO_ERROR

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = _Manifest(out_dir)
        for i, (_, eye) in enumerate(eyes):
            engine.eye = eye
            _, _, frame = engine.render()
            name = f"composite_{i:05d}.ppm"
            meta = f"composite_{i:05d}.meta"
            write_composite(frame, out_dir / name, out_dir / meta)
            manifest.entries.append(
                (name, hashlib.sha256((out_dir / name).read_bytes()).hexdigest()))
            manifest.entries.append(
                (meta, hashlib.sha256((out_dir / meta).read_bytes()).hexdigest()))
        manifest.finish()
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO_ERROR
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import serve  # imported lazily; pulls in networking

    try:
        profile = _load_profile_text(args.profile)
    except ParseError as exc:
        _err(f"{args.profile}: line {exc.line}, column {exc.column}: {exc.message}")
        return EXIT_USER_ERROR
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO_ERROR
    try:
        return serve(profile, asset_root=Path(args.profile).parent, port=args.port,
                     rate_hz=args.rate, http_port=args.http_port)
    except OSError as exc:
        _err(f"cannot serve: {exc}")
        return EXIT_IO_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proscenium",
        description="Dual-layer transparent-display experience simulator")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("render", help="render profile frames to an output directory")
    p.add_argument("--profile", required=True)
    p.add_argument("--commands", help="NDJSON command log to replay")
    p.add_argument("--sensors", help="sensor replay file")
    p.add_argument("--calibration", help="13-number transform file")
    p.add_argument("--out", required=True)
    p.add_argument("--eye", default="0,0,1.5", help="viewer position X,Y,Z in meters")
    p.add_argument("--frames", type=int, default=30)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("validate", help="parse and lint a profile")
    p.add_argument("--profile", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("calibrate", help="fit a similarity transform to point pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-scale", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate-view", help="render composites along an eye path")
    p.add_argument("--profile", required=True)
    p.add_argument("--eye-path", required=True, dest="eye_path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate_view)

    p = sub.add_parser("serve", help="run the live control server")
    p.add_argument("--profile", required=True)
    p.add_argument("--port", type=int, default=7470)
    p.add_argument("--http-port", type=int, default=None, dest="http_port",
                   help="frame/state HTTP port (default: command port + 1)")
    p.add_argument("--rate", type=int, default=30)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches our user-error code.
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _err(f"file not found: {exc.filename}")
        return EXIT_IO_ERROR
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO_ERROR
    except (DomainError, cal.CalibrationError) as exc:
        _err(str(exc))
        return EXIT_USER_ERROR
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
