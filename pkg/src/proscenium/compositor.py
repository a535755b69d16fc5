"""Simulated view through the stacked panels, plus per-layer scene rendering.

The back panel is seen with parallax: each front pixel is the intersection
of an eye ray, so composite() bilinearly samples the back buffer at the
back-plane point that projects onto that pixel. Optically each panel is
emissive-additive with luminance-gated transmission: a pixel passes
(1 - alpha) of the light behind it, where alpha is the BT.709 luma of its
color scaled by the buffer's alpha channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    BLACK,
    Color,
    DisplayGeometry,
    DomainError,
    PixelBuffer,
    to_ppm_bytes,
)
from .linking import LinkingParams, LinkingStyle, mask_of, render_linking
from .transition import LayerRenderState
from .core import LayerId

# Shadow geometry is fixed; profiles only expose the intensity knob.
SHADOW_OFFSET_PX = (8, 8)
SHADOW_ALPHA_FACTOR = 0.5
LINKING_MASK_THRESHOLD = 0.5


@dataclass(frozen=True)
class Viewpoint:
    """Eye position in meters relative to the front-display center.

    ``z`` is the distance in front of the front plane and must be positive.
    """

    x: float = 0.0
    y: float = 0.0
    z: float = 1.5

    def __post_init__(self) -> None:
        if not (self.z > 0.0):
            raise DomainError("viewpoint must be in front of the front plane (z > 0)")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class OpticalModel:
    ambient: Color = BLACK


@dataclass(frozen=True)
class CompositeFrame:
    buffer: PixelBuffer
    tick: int
    eye: tuple[float, float, float]
    separation_m: float


def project_back_to_front(b: tuple[float, float], v: Viewpoint, d: float) -> tuple[float, float]:
    """Front-plane point covering back-plane point ``b`` from eye ``v``."""
    if d <= 0.0:
        raise DomainError("separation must be > 0")
    k = v.z / (v.z + d)
    return (v.x + (b[0] - v.x) * k, v.y + (b[1] - v.y) * k)


def front_to_back_point(p: tuple[float, float], v: Viewpoint, d: float) -> tuple[float, float]:
    """Inverse of :func:`project_back_to_front`."""
    if d <= 0.0:
        raise DomainError("separation must be > 0")
    k = (v.z + d) / v.z
    return (v.x + (p[0] - v.x) * k, v.y + (p[1] - v.y) * k)


def _bilinear_sample(data: np.ndarray, ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    """Sample (h, w, c) data at continuous pixel coords, clamped to centers."""
    h, w = data.shape[:2]
    sx = np.clip(ux, 0.5, w - 0.5) - 0.5
    sy = np.clip(uy, 0.5, h - 0.5) - 0.5
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _luma(rgb: np.ndarray) -> np.ndarray:
    return 0.2126 * rgb[..., 0] + 0.7152 * rgb[..., 1] + 0.0722 * rgb[..., 2]


def composite(front: PixelBuffer, back: PixelBuffer, g: DisplayGeometry,
              v: Viewpoint, m: OpticalModel | None = None, tick: int = 0) -> CompositeFrame:
    """Per-pixel view through both panels from eye ``v``.

    Observed color per front pixel:
    ``front_rgb + (1 - a_f) * (back_rgb + (1 - a_b) * ambient)`` with each
    ``a`` the luma-times-alpha opacity; back samples outside the back panel
    contribute ambient only.
    """
    m = m or OpticalModel()
    if front.width_px != g.width_px or front.height_px != g.height_px:
        raise DomainError("front buffer does not match display geometry")
    if back.width_px != g.width_px or back.height_px != g.height_px:
        raise DomainError("back buffer does not match display geometry")

    w, h = g.width_px, g.height_px
    d = g.separation_m
    # Metric coordinates of every front pixel center.
    px = (np.arange(w) + 0.5)[None, :]
    py = (np.arange(h) + 0.5)[:, None]
    fx = (px / w - 0.5) * g.physical_width_m
    fy = (0.5 - py / h) * g.physical_height_m

    k = (v.z + d) / v.z
    bx = v.x + (fx - v.x) * k
    by = v.y + (fy - v.y) * k

    ux = (bx / g.physical_width_m + 0.5) * w
    uy = (0.5 - by / g.physical_height_m) * h
    ux, uy = np.broadcast_arrays(ux, uy)
    inside = (ux >= 0.0) & (ux <= w) & (uy >= 0.0) & (uy <= h)

    back_rgba = _bilinear_sample(back.data, ux, uy)
    back_rgba[~inside] = 0.0
    back_rgb = back_rgba[..., :3]
    back_a = _luma(back_rgb) * back_rgba[..., 3]

    front_rgb = front.rgb
    front_a = _luma(front_rgb) * front.alpha

    ambient = np.array([m.ambient.r, m.ambient.g, m.ambient.b])
    behind = back_rgb + (1.0 - back_a)[..., None] * ambient
    observed = np.clip(front_rgb + (1.0 - front_a)[..., None] * behind, 0.0, 1.0)

    out = np.concatenate([observed, np.ones((h, w, 1))], axis=2)
    return CompositeFrame(
        buffer=PixelBuffer(out, _validate=False),
        tick=tick,
        eye=v.as_tuple(),
        separation_m=d,
    )


def write_composite(frame: CompositeFrame, ppm_path: str | Path,
                    sidecar_path: str | Path | None = None) -> None:
    Path(ppm_path).write_bytes(to_ppm_bytes(frame.buffer))
    if sidecar_path is not None:
        ex, ey, ez = frame.eye
        lines = [
            f"tick={frame.tick}",
            f"eye_x_m={ex!r}",
            f"eye_y_m={ey!r}",
            f"eye_z_m={ez!r}",
            f"separation_m={frame.separation_m!r}",
        ]
        Path(sidecar_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Scene rendering: entities onto per-layer buffers.

@dataclass(frozen=True)
class SceneEntity:
    """One entity resolved to a concrete frame and per-layer parameters."""

    name: str
    frame: PixelBuffer
    center_m: tuple[float, float]
    nominal_size_m: tuple[float, float]
    base_scale: float
    base_alpha: float
    state: LayerRenderState
    linking_style: LinkingStyle = LinkingStyle.NONE
    linking: LinkingParams = LinkingParams()


def resample_bilinear(buf: PixelBuffer, out_w: int, out_h: int) -> PixelBuffer:
    """Bilinear resample to ``out_w`` x ``out_h`` (edge-clamped)."""
    if out_w <= 0 or out_h <= 0:
        raise DomainError("resample target must be positive")
    ux = (np.arange(out_w) + 0.5) * (buf.width_px / out_w)
    uy = (np.arange(out_h) + 0.5) * (buf.height_px / out_h)
    gx, gy = np.meshgrid(ux, uy)
    return PixelBuffer(_bilinear_sample(buf.data, gx, gy), _validate=False)


def _blit_over(canvas: np.ndarray, sprite: np.ndarray, left: int, top: int) -> None:
    """Straight-alpha OVER of sprite onto a mutable (h, w, 4) canvas."""
    ch, cw = canvas.shape[:2]
    sh, sw = sprite.shape[:2]
    x0, y0 = max(left, 0), max(top, 0)
    x1, y1 = min(left + sw, cw), min(top + sh, ch)
    if x0 >= x1 or y0 >= y1:
        return
    src = sprite[y0 - top : y1 - top, x0 - left : x1 - left]
    dst = canvas[y0:y1, x0:x1]
    a_s = src[..., 3:4]
    a_d = dst[..., 3:4]
    out_a = a_s + a_d * (1.0 - a_s)
    with np.errstate(invalid="ignore", divide="ignore"):
        out_rgb = np.where(
            out_a > 0.0,
            (src[..., :3] * a_s + dst[..., :3] * a_d * (1.0 - a_s)) / np.where(out_a > 0.0, out_a, 1.0),
            0.0,
        )
    dst[..., :3] = out_rgb
    dst[..., 3:4] = out_a


def _sprite_pixel_size(e: SceneEntity, g: DisplayGeometry, scale: float) -> tuple[int, int]:
    w = max(1, int(round(e.nominal_size_m[0] * scale / g.m_per_px_x)))
    h = max(1, int(round(e.nominal_size_m[1] * scale / g.m_per_px_y)))
    return w, h


def _center_to_px(g: DisplayGeometry, center: tuple[float, float]) -> tuple[float, float]:
    cx = (center[0] / g.physical_width_m + 0.5) * g.width_px
    cy = (0.5 - center[1] / g.physical_height_m) * g.height_px
    return cx, cy


def _linking_margin_px(style: LinkingStyle, p: LinkingParams) -> int:
    if style is LinkingStyle.HALO:
        return p.halo_radius_px + p.halo_blur_px
    if style is LinkingStyle.LANDMARK:
        return p.landmark_size_px // 2 + 1
    return 0


def render_layers(scene: list[SceneEntity], g: DisplayGeometry,
                  viewpoint: Viewpoint | None = None,
                  viewer_corrected_linking: bool = False) -> tuple[PixelBuffer, PixelBuffer]:
    """Draw every entity onto fresh front and back buffers.

    Entities composite in declaration order with straight-alpha OVER. A
    front-layer presence with a linking style also draws its linking visual
    into the back buffer, on-axis by default or corrected for ``viewpoint``.
    """
    canvases = {
        LayerId.FRONT: np.zeros((g.height_px, g.width_px, 4)),
        LayerId.BACK: np.zeros((g.height_px, g.width_px, 4)),
    }

    for e in scene:
        link_overlay: PixelBuffer | None = None
        link_pos: tuple[int, int] | None = None
        for layer in (LayerId.BACK, LayerId.FRONT):
            p = e.state.for_layer(layer)
            eff_alpha = e.base_alpha * p.alpha
            if eff_alpha <= 0.0:
                continue
            eff_scale = e.base_scale * p.scale
            sw, sh = _sprite_pixel_size(e, g, eff_scale)
            shape = resample_bilinear(e.frame, sw, sh)
            sprite = shape.with_alpha_scaled(eff_alpha)
            center = (e.center_m[0] + p.offset_m[0], e.center_m[1] + p.offset_m[1])
            cx, cy = _center_to_px(g, center)
            left = int(round(cx - sw / 2.0))
            top = int(round(cy - sh / 2.0))
            if p.shadow > 0.0:
                shade = np.zeros_like(sprite.data)
                covered = sprite.alpha > 0.0
                shade[..., 3] = np.where(covered, p.shadow * SHADOW_ALPHA_FACTOR, 0.0)
                _blit_over(canvases[layer], shade, left + SHADOW_OFFSET_PX[0], top + SHADOW_OFFSET_PX[1])
            _blit_over(canvases[layer], sprite.data, left, top)

            if layer is LayerId.FRONT and e.linking_style is not LinkingStyle.NONE:
                # Halo and landmark extend beyond the sprite bounds, so the
                # overlay canvas gets a margin. The mask comes from the
                # unfaded shape; the overlay then fades with the entity.
                pad = _linking_margin_px(e.linking_style, e.linking)
                shape_buf = PixelBuffer(
                    np.pad(shape.data, ((pad, pad), (pad, pad), (0, 0))), _validate=False)
                mask = mask_of(shape_buf, LINKING_MASK_THRESHOLD)
                if e.linking_style is LinkingStyle.CLONE:
                    faded = PixelBuffer(
                        np.pad(sprite.data, ((pad, pad), (pad, pad), (0, 0))), _validate=False)
                    overlay = render_linking(LinkingStyle.CLONE, faded, mask, e.linking)
                else:
                    overlay = render_linking(e.linking_style, shape_buf, mask, e.linking)
                    overlay = overlay.with_alpha_scaled(eff_alpha)
                link_overlay = overlay
                if viewer_corrected_linking and viewpoint is not None:
                    bc = front_to_back_point(center, viewpoint, g.separation_m)
                    bx, by = _center_to_px(g, bc)
                    link_pos = (int(round(bx - sw / 2.0)) - pad,
                                int(round(by - sh / 2.0)) - pad)
                else:
                    link_pos = (left - pad, top - pad)
        if link_overlay is not None and link_pos is not None:
            _blit_over(canvases[LayerId.BACK], link_overlay.data, link_pos[0], link_pos[1])

    front = PixelBuffer(np.clip(canvases[LayerId.FRONT], 0.0, 1.0), _validate=False)
    back = PixelBuffer(np.clip(canvases[LayerId.BACK], 0.0, 1.0), _validate=False)
    return front, back
