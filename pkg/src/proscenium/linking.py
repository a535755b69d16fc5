"""Back-layer visuals that help a viewer connect a front entity across the gap.

Five strategies: none, landmark, halo, outline, clone. Halo and outline are
built from Chebyshev (square structuring element) dilation and erosion of
the entity's coverage mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    BT709_B,
    BT709_G,
    BT709_R,
    Color,
    DomainError,
    PixelBuffer,
)


class BinaryMask:
    """Row-major boolean raster, same frame of reference as a PixelBuffer."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        arr = np.asarray(bits, dtype=bool).copy()
        if arr.ndim != 2:
            raise DomainError(f"mask must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __setattr__(self, name, value):
        raise AttributeError("BinaryMask is immutable")

    @property
    def width_px(self) -> int:
        return self.bits.shape[1]

    @property
    def height_px(self) -> int:
        return self.bits.shape[0]

    def any(self) -> bool:
        return bool(self.bits.any())

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryMask) and np.array_equal(self.bits, other.bits)


class LinkingStyle(Enum):
    NONE = "none"
    LANDMARK = "landmark"
    HALO = "halo"
    OUTLINE = "outline"
    CLONE = "clone"


@dataclass(frozen=True)
class LinkingParams:
    """Knobs for the linking renderers; ``tint=None`` derives one from the frame."""

    halo_radius_px: int = 12
    halo_blur_px: int = 4
    outline_thickness_px: int = 3
    clone_alpha: float = 0.35
    landmark_size_px: int = 24
    tint: Color | None = None

    def __post_init__(self) -> None:
        if self.halo_radius_px <= 0:
            raise DomainError("halo_radius_px must be positive")
        if self.halo_blur_px < 0:
            raise DomainError("halo_blur_px must be non-negative")
        if self.outline_thickness_px <= 0:
            raise DomainError("outline_thickness_px must be positive")
        if not (0.0 <= self.clone_alpha <= 1.0):
            raise DomainError("clone_alpha outside [0, 1]")
        if self.landmark_size_px <= 0:
            raise DomainError("landmark_size_px must be positive")


def mask_of(frame: PixelBuffer, threshold: float) -> BinaryMask:
    """Coverage mask: bit set where the frame's alpha exceeds ``threshold``."""
    return BinaryMask(frame.alpha > threshold)


def _shift_or(bits: np.ndarray, radius: int, combine) -> np.ndarray:
    # Separable square-window pass: rows then columns, zero padding outside.
    out = bits
    for axis in (0, 1):
        acc = out.copy()
        for d in range(1, radius + 1):
            shifted_fwd = np.zeros_like(out)
            shifted_back = np.zeros_like(out)
            if axis == 0:
                shifted_fwd[d:, :] = out[:-d, :]
                shifted_back[:-d, :] = out[d:, :]
            else:
                shifted_fwd[:, d:] = out[:, :-d]
                shifted_back[:, :-d] = out[:, d:]
            acc = combine(acc, shifted_fwd)
            acc = combine(acc, shifted_back)
        out = acc
    return out


def dilate(mask: BinaryMask, radius_px: int) -> BinaryMask:
    """Chebyshev dilation: set where any set bit lies within ``radius_px``."""
    if radius_px < 0:
        raise DomainError("dilation radius must be non-negative")
    if radius_px == 0:
        return mask
    return BinaryMask(_shift_or(mask.bits, radius_px, np.logical_or))


def erode(mask: BinaryMask, radius_px: int) -> BinaryMask:
    """Chebyshev erosion; pixels beyond the border count as unset."""
    if radius_px < 0:
        raise DomainError("erosion radius must be non-negative")
    if radius_px == 0:
        return mask
    return BinaryMask(_shift_or(mask.bits, radius_px, np.logical_and))


def box_blur(field: np.ndarray, passes: int) -> np.ndarray:
    """Repeated radius-1 box blur (3x3 mean, zero padding outside)."""
    out = np.asarray(field, dtype=np.float64)
    for _ in range(passes):
        padded = np.pad(out, 1)
        acc = np.zeros_like(out)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                acc += padded[1 + dy : 1 + dy + out.shape[0], 1 + dx : 1 + dx + out.shape[1]]
        out = acc / 9.0
    return out


def default_tint(frame: PixelBuffer) -> Color:
    """Mean color of the frame's covered pixels, desaturated halfway to gray."""
    covered = frame.alpha > 0.0
    if covered.any():
        mean = frame.rgb[covered].mean(axis=0)
    else:
        mean = np.zeros(3)
    gray = BT709_R * mean[0] + BT709_G * mean[1] + BT709_B * mean[2]
    toned = gray + 0.5 * (mean - gray)
    toned = np.clip(toned, 0.0, 1.0)
    return Color(float(toned[0]), float(toned[1]), float(toned[2]))


def _tinted(mask_bits: np.ndarray, alpha: np.ndarray, tint: Color) -> PixelBuffer:
    h, w = mask_bits.shape
    out = np.zeros((h, w, 4))
    out[..., 0] = np.where(alpha > 0.0, tint.r, 0.0)
    out[..., 1] = np.where(alpha > 0.0, tint.g, 0.0)
    out[..., 2] = np.where(alpha > 0.0, tint.b, 0.0)
    out[..., 3] = alpha
    return PixelBuffer(out, _validate=False)


def render_linking(style: LinkingStyle, frame: PixelBuffer, mask: BinaryMask,
                   p: LinkingParams) -> PixelBuffer:
    """Render the back-layer linking visual for a front-layer entity frame."""
    if (frame.height_px, frame.width_px) != (mask.height_px, mask.width_px):
        raise DomainError(
            f"frame {frame.width_px}x{frame.height_px} and mask "
            f"{mask.width_px}x{mask.height_px} dimensions differ"
        )

    if style is LinkingStyle.NONE:
        return PixelBuffer.blank(frame.width_px, frame.height_px)

    if style is LinkingStyle.CLONE:
        out = frame.data.copy()
        out[..., 3] *= p.clone_alpha
        return PixelBuffer(out, _validate=False)

    tint = p.tint if p.tint is not None else default_tint(frame)

    if style is LinkingStyle.LANDMARK:
        if not mask.any():
            return PixelBuffer.blank(frame.width_px, frame.height_px)
        ys, xs = np.nonzero(mask.bits)
        cy, cx = ys.mean(), xs.mean()
        yy, xx = np.mgrid[0 : mask.height_px, 0 : mask.width_px]
        disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= (p.landmark_size_px / 2.0) ** 2
        return _tinted(disc, disc.astype(np.float64), tint)

    if style is LinkingStyle.HALO:
        band = dilate(mask, p.halo_radius_px).bits & ~mask.bits
        coverage = box_blur(band.astype(np.float64), p.halo_blur_px)
        return _tinted(coverage > 0.0, coverage, tint)

    if style is LinkingStyle.OUTLINE:
        band = mask.bits & ~erode(mask, p.outline_thickness_px).bits
        return _tinted(band, band.astype(np.float64), tint)

    raise DomainError(f"unknown linking style {style!r}")
