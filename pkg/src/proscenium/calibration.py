"""Least-squares similarity alignment of a sensor frame to display space.

Estimates scale, proper rotation, and translation from point
correspondences, with the reflection case corrected so the rotation always
has determinant +1. Transforms persist as 13 whitespace-separated numbers:
scale, the rotation matrix row-major, then the translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DomainError, read_text_file


class CalibrationError(ValueError):
    """Base class for calibration failures."""


class CountMismatchError(CalibrationError):
    """Source and destination point counts differ."""


class InsufficientPointsError(CalibrationError):
    """Fewer than the three correspondences needed for a unique fit."""


class DegenerateConfigurationError(CalibrationError):
    """Points are collinear or the cross-covariance is rank deficient."""


class PointSet3:
    """Ordered 3-D points in meters, shape (n, 3)."""

    __slots__ = ("points",)

    def __init__(self, points) -> None:
        arr = np.asarray(points, dtype=np.float64).reshape(-1, 3).copy()
        if not np.isfinite(arr).all():
            raise DomainError("point coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __setattr__(self, name, value):
        raise AttributeError("PointSet3 is immutable")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray  # 3x3, proper orthonormal
    translation: np.ndarray  # 3-vector

    def __post_init__(self) -> None:
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise DomainError("rotation must be 3x3")
        if np.abs(R @ R.T - np.eye(3)).max() >= 1e-9:
            raise DomainError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) >= 1e-9:
            raise DomainError("rotation must have determinant +1")
        if not (self.scale > 0.0):
            raise DomainError("scale must be > 0")
        R = R.copy()
        R.setflags(write=False)
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def inverse(self) -> SimilarityTransform:
        inv_s = 1.0 / self.scale
        inv_R = self.rotation.T
        inv_t = -inv_s * (inv_R @ self.translation)
        return SimilarityTransform(inv_s, inv_R, inv_t)


IDENTITY_TRANSFORM = SimilarityTransform(1.0, np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class CalibrationReport:
    rmse_m: float
    residuals_m: tuple[float, ...]


def apply(T: SimilarityTransform, p) -> np.ndarray:
    """Map one point or an (n, 3) array through ``s * R * p + t``."""
    arr = np.asarray(p, dtype=np.float64)
    return T.scale * (arr @ T.rotation.T) + T.translation


def estimate_similarity(src: PointSet3, dst: PointSet3, with_scale: bool = True) -> SimilarityTransform:
    """Best-fit similarity (or rigid, if ``with_scale`` is false) from src to dst.

    Minimizes the sum of squared distances between ``dst`` and the mapped
    ``src`` over proper rotations. If the cross-covariance SVD lands on a
    reflection, the smallest singular direction is negated to keep
    det(R) = +1.
    """
    a = src.points
    b = dst.points
    if len(src) != len(dst):
        raise CountMismatchError(f"{len(src)} source vs {len(dst)} destination points")
    n = len(src)
    if n < 3:
        raise InsufficientPointsError(f"need at least 3 correspondences, got {n}")

    mu_a = a.mean(axis=0)
    mu_b = b.mean(axis=0)
    ac = a - mu_a
    bc = b - mu_b

    src_sv = np.linalg.svd(ac, compute_uv=False)
    if src_sv[0] == 0.0 or src_sv[1] <= 1e-12 * src_sv[0]:
        raise DegenerateConfigurationError("source points are collinear or coincident")

    cov = (bc.T @ ac) / n
    U, D, Vt = np.linalg.svd(cov)
    if D[0] == 0.0 or D[1] <= 1e-12 * D[0]:
        raise DegenerateConfigurationError("cross-covariance is rank deficient")

    sign = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0.0:
        sign[2] = -1.0
    R = U @ np.diag(sign) @ Vt

    if with_scale:
        var_src = (ac ** 2).sum() / n
        s = float((D * sign).sum() / var_src)
        if not (s > 0.0):
            raise DegenerateConfigurationError(f"non-positive recovered scale {s!r}")
    else:
        s = 1.0

    t = mu_b - s * (R @ mu_a)
    return SimilarityTransform(s, R, t)


def rmse(T: SimilarityTransform, src: PointSet3, dst: PointSet3) -> CalibrationReport:
    """Per-point residual distances and their root mean square."""
    if len(src) != len(dst):
        raise CountMismatchError(f"{len(src)} source vs {len(dst)} destination points")
    mapped = apply(T, src.points)
    residuals = np.linalg.norm(dst.points - mapped, axis=1)
    value = float(np.sqrt((residuals ** 2).mean()))
    return CalibrationReport(rmse_m=value, residuals_m=tuple(float(r) for r in residuals))


# ---------------------------------------------------------------------------
# File formats

def read_correspondences(path: str | Path) -> tuple[PointSet3, PointSet3]:
    """Parse `sx sy sz dx dy dz` lines; '#' starts a comment."""
    src_pts: list[list[float]] = []
    dst_pts: list[list[float]] = []
    for lineno, raw in enumerate(read_text_file(path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 6:
            raise DomainError(f"{path}:{lineno}: expected 6 numbers, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise DomainError(f"{path}:{lineno}: non-numeric field") from None
        src_pts.append(values[:3])
        dst_pts.append(values[3:])
    if not src_pts:
        raise DomainError(f"{path}: no correspondence pairs")
    return PointSet3(src_pts), PointSet3(dst_pts)


def write_transform(T: SimilarityTransform, path: str | Path) -> None:
    numbers = [T.scale, *T.rotation.reshape(-1).tolist(), *T.translation.tolist()]
    Path(path).write_text(" ".join(repr(v) for v in numbers) + "\n", encoding="utf-8")


def read_transform(path: str | Path) -> SimilarityTransform:
    fields = read_text_file(path).split()
    if len(fields) != 13:
        raise DomainError(f"{path}: transform file needs 13 numbers, got {len(fields)}")
    values = [float(f) for f in fields]
    return SimilarityTransform(values[0], np.array(values[1:10]).reshape(3, 3), np.array(values[10:13]))


def front_panel_grid(width_m: float = 1.218, height_m: float = 0.685,
                     cols: int = 4, rows: int = 3, inset: float = 0.1) -> PointSet3:
    """Calibration target: a cols-by-rows grid on the front display plane (z=0)."""
    xs = np.linspace(-(0.5 - inset) * width_m, (0.5 - inset) * width_m, cols)
    ys = np.linspace(-(0.5 - inset) * height_m, (0.5 - inset) * height_m, rows)
    pts = [(x, y, 0.0) for y in ys for x in xs]
    return PointSet3(pts)
