#!/usr/bin/env python3
"""Regenerate the committed fixture assets, calibration files, and sensor
replays under fixtures/. Everything here is procedural and deterministic so
reruns are byte-identical."""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from proscenium.calibration import (  # noqa: E402
    SimilarityTransform,
    apply,
    front_panel_grid,
    write_transform,
)
from proscenium.core import PixelBuffer, write_pam  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"


def canvas(w: int, h: int) -> np.ndarray:
    return np.zeros((h, w, 4))


def grids(w: int, h: int):
    yy, xx = np.mgrid[0:h, 0:w]
    return xx + 0.5, yy + 0.5


def paint(arr: np.ndarray, mask: np.ndarray, rgb, alpha: float = 1.0) -> None:
    arr[mask, 0] = rgb[0]
    arr[mask, 1] = rgb[1]
    arr[mask, 2] = rgb[2]
    arr[mask, 3] = np.maximum(arr[mask, 3], alpha)


def ellipse(xx, yy, cx, cy, rx, ry):
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def box(xx, yy, x0, y0, x1, y1):
    return (xx >= x0) & (xx <= x1) & (yy >= y0) & (yy <= y1)


def make_hand(w=40, h=52) -> np.ndarray:
    arr = canvas(w, h)
    xx, yy = grids(w, h)
    skin = (0.87, 0.67, 0.52)
    palm = ellipse(xx, yy, w * 0.5, h * 0.68, w * 0.34, h * 0.24)
    paint(arr, palm, skin)
    finger_x = [0.3, 0.43, 0.57, 0.7]
    finger_len = [0.30, 0.38, 0.40, 0.33]
    for fx, fl in zip(finger_x, finger_len):
        top = h * (0.68 - 0.24 - fl)
        fingers = box(xx, yy, w * (fx - 0.05), top, w * (fx + 0.05), h * 0.52)
        tips = ellipse(xx, yy, w * fx, top, w * 0.05, w * 0.05)
        paint(arr, fingers | tips, skin)
    thumb = ellipse(xx, yy, w * 0.16, h * 0.62, w * 0.09, h * 0.13)
    paint(arr, thumb, skin)
    return arr


def make_app(w=44, h=56) -> np.ndarray:
    arr = canvas(w, h)
    xx, yy = grids(w, h)
    body = box(xx, yy, 1, 1, w - 2, h - 2)
    paint(arr, body, (0.93, 0.94, 0.96))
    header = box(xx, yy, 1, 1, w - 2, h * 0.18)
    paint(arr, header, (0.25, 0.45, 0.85))
    for i in range(4):
        y0 = h * (0.28 + i * 0.16)
        line = box(xx, yy, w * 0.12, y0, w * 0.88, y0 + h * 0.07)
        paint(arr, line, (0.55, 0.6, 0.68))
    button = box(xx, yy, w * 0.3, h * 0.88, w * 0.7, h * 0.95)
    paint(arr, button, (0.2, 0.65, 0.4))
    return arr


def make_agent(w=36, h=56) -> np.ndarray:
    arr = canvas(w, h)
    xx, yy = grids(w, h)
    head = ellipse(xx, yy, w * 0.5, h * 0.16, w * 0.2, h * 0.12)
    body = ellipse(xx, yy, w * 0.5, h * 0.62, w * 0.34, h * 0.34)
    paint(arr, body, (0.2, 0.6, 0.6))
    paint(arr, head, (0.25, 0.7, 0.7))
    eye_l = ellipse(xx, yy, w * 0.42, h * 0.15, w * 0.04, h * 0.025)
    eye_r = ellipse(xx, yy, w * 0.58, h * 0.15, w * 0.04, h * 0.025)
    paint(arr, eye_l | eye_r, (0.05, 0.1, 0.1))
    return arr


def make_tool(w=36, h=36) -> np.ndarray:
    arr = canvas(w, h)
    xx, yy = grids(w, h)
    ring = ellipse(xx, yy, w * 0.3, h * 0.3, w * 0.2, h * 0.2) & ~ellipse(
        xx, yy, w * 0.3, h * 0.3, w * 0.09, h * 0.09)
    shaft = (np.abs((yy - h * 0.3) - (xx - w * 0.3)) <= w * 0.09) & box(
        xx, yy, w * 0.3, h * 0.3, w * 0.92, h * 0.92)
    paint(arr, ring | shaft, (0.9, 0.55, 0.15))
    return arr


def make_task(w=56, h=40) -> np.ndarray:
    arr = canvas(w, h)
    xx, yy = grids(w, h)
    board = box(xx, yy, 1, 1, w - 2, h - 2)
    paint(arr, board, (0.96, 0.96, 0.92))
    stickies = [
        (0.12, 0.15, (0.95, 0.85, 0.3)),
        (0.45, 0.2, (0.5, 0.85, 0.5)),
        (0.7, 0.55, (0.95, 0.6, 0.6)),
        (0.2, 0.6, (0.55, 0.7, 0.95)),
    ]
    for sx, sy, rgb in stickies:
        sq = box(xx, yy, w * sx, h * sy, w * (sx + 0.18), h * (sy + 0.26))
        paint(arr, sq, rgb)
    return arr


def make_scene(w=48, h=36) -> np.ndarray:
    arr = canvas(w, h)
    xx, yy = grids(w, h)
    sky = yy / h
    arr[..., 0] = 0.45 + 0.25 * sky
    arr[..., 1] = 0.65 - 0.15 * sky
    arr[..., 2] = 0.9 - 0.3 * sky
    arr[..., 3] = 1.0
    buildings = [(0.05, 0.45, 0.5), (0.3, 0.3, 0.62), (0.55, 0.55, 0.45), (0.78, 0.4, 0.55)]
    for bx, bw_, byt in buildings:
        b = box(xx, yy, w * bx, h * byt, w * (bx + bw_ * 0.4), h - 1)
        paint(arr, b, (0.35, 0.33, 0.38))
    return arr


def make_map(w=56, h=40) -> np.ndarray:
    arr = canvas(w, h)
    arr[..., 0] = 0.88
    arr[..., 1] = 0.9
    arr[..., 2] = 0.85
    arr[..., 3] = 1.0
    xx, yy = grids(w, h)
    roads = np.zeros((h, w), dtype=bool)
    for gx in range(4, w, 10):
        roads |= box(xx, yy, gx, 0, gx + 1.5, h)
    for gy in range(4, h, 8):
        roads |= box(xx, yy, 0, gy, w, gy + 1.5)
    paint(arr, roads, (0.75, 0.75, 0.7))
    marker = ellipse(xx, yy, w * 0.62, h * 0.4, 2.5, 2.5)
    paint(arr, marker, (0.85, 0.15, 0.15))
    return arr


def make_person_frame(phase: float, w=36, h=44) -> tuple[np.ndarray, np.ndarray]:
    """RGBA person plus matching depth map: arm and book reach closer."""
    arr = canvas(w, h)
    xx, yy = grids(w, h)
    head = ellipse(xx, yy, w * 0.42, h * 0.2, w * 0.14, h * 0.12)
    torso = ellipse(xx, yy, w * 0.42, h * 0.66, w * 0.3, h * 0.34)
    paint(arr, torso, (0.3, 0.35, 0.55))
    paint(arr, head, (0.87, 0.67, 0.52))
    # The arm sweeps forward with phase; the held book rides on the wrist.
    reach = 0.18 + 0.16 * phase
    ax = w * (0.58 + reach)
    arm = (np.abs(yy - h * 0.5) <= h * 0.05) & box(xx, yy, w * 0.5, 0, ax, h)
    paint(arr, arm, (0.87, 0.67, 0.52))
    book = box(xx, yy, ax - w * 0.08, h * 0.38, ax + w * 0.08, h * 0.62)
    paint(arr, book, (0.75, 0.2, 0.25))

    depth = np.full((h, w), 2.0)
    covered = arr[..., 3] > 0
    depth[covered] = 1.4
    near = (arm | book) & covered
    depth[near] = 0.7
    # A corner of dropout pixels exercises the invalid-depth path.
    depth[0:3, 0:3] = np.nan
    return arr, depth


def save(name: str, arr: np.ndarray) -> None:
    path = FIXTURES / "assets" / name
    path.parent.mkdir(parents=True, exist_ok=True)
    write_pam(PixelBuffer(np.clip(arr, 0.0, 1.0)), path)
    print(f"wrote {path}")


def write_depth_replay(depths: list[np.ndarray]) -> None:
    lines = []
    for i, depth in enumerate(depths):
        tick = i * 4
        h, w = depth.shape
        flat = " ".join("nan" if math.isnan(v) else repr(float(v)) for v in depth.reshape(-1))
        lines.append(f"{tick} depth_frame {w} {h} {flat}")
    path = FIXTURES / "sensors" / "e14_depth.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def write_walkup_replay() -> None:
    # A visitor walks from public space to the panel over two seconds.
    steps = [(0, 4.5), (6, 3.8), (12, 3.2), (18, 2.4), (24, 1.6), (30, 1.1), (36, 0.7), (48, 0.7)]
    lines = [f"{tick} user_distance {dist!r}" for tick, dist in steps]
    path = FIXTURES / "sensors" / "e5_walkup.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def write_calibration_fixtures() -> None:
    out = FIXTURES / "calibration"
    out.mkdir(parents=True, exist_ok=True)
    grid = front_panel_grid()

    lines = ["# sx sy sz dx dy dz (identity rig)"]
    for p in grid.points:
        x, y, z = (float(v) for v in p)
        lines.append(f"{x!r} {y!r} {z!r} {x!r} {y!r} {z!r}")
    (out / "pairs_identity.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # A plausible sensor mount: slight scale, yawed and pitched, offset below
    # the panel. Committed alongside the pairs so tests can check recovery.
    yaw, pitch = 0.31, -0.12
    rz = np.array([[math.cos(yaw), -math.sin(yaw), 0.0],
                   [math.sin(yaw), math.cos(yaw), 0.0],
                   [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0],
                   [0.0, math.cos(pitch), -math.sin(pitch)],
                   [0.0, math.sin(pitch), math.cos(pitch)]])
    T = SimilarityTransform(1.08, rz @ rx, np.array([0.05, -0.42, 0.11]))
    write_transform(T, out / "known_transform.txt")

    mapped = apply(T, grid.points)
    lines = ["# sensor-frame grid observations -> display-space targets"]
    for s, p in zip(grid.points, mapped):
        sx, sy, sz = (float(v) for v in s)
        dx, dy, dz = (float(v) for v in p)
        lines.append(f"{sx!r} {sy!r} {sz!r} {dx!r} {dy!r} {dz!r}")
    (out / "pairs_known.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out}/pairs_identity.txt, pairs_known.txt, known_transform.txt")


def write_eye_path() -> None:
    lines = ["# t x y z"]
    for i in range(5):
        t = i / 4.0
        x = -0.4 + 0.2 * i
        lines.append(f"{t!r} {x!r} 0.0 1.5")
    path = FIXTURES / "eye_path.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def main() -> None:
    save("hand.pam", make_hand())
    save("app.pam", make_app())
    save("agent.pam", make_agent())
    save("tool.pam", make_tool())
    save("task.pam", make_task())
    save("scene.pam", make_scene())
    save("map.pam", make_map())
    depths = []
    for i in range(3):
        rgba, depth = make_person_frame(i / 2.0)
        save(f"person_{i}.pam", rgba)
        depths.append(depth)
    write_depth_replay(depths)
    write_walkup_replay()
    write_calibration_fixtures()
    write_eye_path()


if __name__ == "__main__":
    main()
