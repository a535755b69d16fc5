"""Pixel, color, and display-geometry primitives shared by every module.

Color channels are linear-light reals in [0, 1]; 8-bit file I/O converts by
plain division by 255 (no gamma decode). Pixel coordinates have their origin
at the top-left of a buffer; metric coordinates have their origin at the
display center with +x right and +y up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

# BT.709 luma weights; they sum to exactly 1.
BT709_R = 0.2126
BT709_G = 0.7152
BT709_B = 0.0722


class DomainError(ValueError):
    """Input outside an operation's stated domain."""


class LayerId(Enum):
    FRONT = "front"
    BACK = "back"

    @property
    def other(self) -> LayerId:
        return LayerId.BACK if self is LayerId.FRONT else LayerId.FRONT


@dataclass(frozen=True)
class Color:
    """Linear RGB color, each channel in [0, 1]."""

    r: float
    g: float
    b: float

    def __post_init__(self) -> None:
        for name, v in (("r", self.r), ("g", self.g), ("b", self.b)):
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"color channel {name}={v!r} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.g, self.b)


BLACK = Color(0.0, 0.0, 0.0)
WHITE = Color(1.0, 1.0, 1.0)


def luminance_alpha(c: Color) -> float:
    """Transparency of a transparent-OLED pixel showing color ``c``.

    The panel transmits fully where black is rendered and blocks fully at
    white; in between, opacity follows the BT.709 luma of the pixel.
    """
    return BT709_R * c.r + BT709_G * c.g + BT709_B * c.b


@dataclass(frozen=True)
class DisplayGeometry:
    """One panel's pixel grid, physical size, and the front-back gap."""

    width_px: int = 1920
    height_px: int = 1080
    physical_width_m: float = 1.218
    physical_height_m: float = 0.685
    separation_m: float = 0.72

    def __post_init__(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise DomainError("pixel dimensions must be positive")
        if self.physical_width_m <= 0 or self.physical_height_m <= 0:
            raise DomainError("physical dimensions must be positive")
        if self.separation_m <= 0:
            raise DomainError("separation_m must be positive")
        px_aspect = self.width_px / self.height_px
        m_aspect = self.physical_width_m / self.physical_height_m
        if abs(m_aspect / px_aspect - 1.0) > 0.01:
            raise DomainError(
                f"aspect mismatch: {px_aspect:.4f} px vs {m_aspect:.4f} physical"
            )

    @property
    def m_per_px_x(self) -> float:
        return self.physical_width_m / self.width_px

    @property
    def m_per_px_y(self) -> float:
        return self.physical_height_m / self.height_px


def px_to_m(g: DisplayGeometry, p: tuple[float, float]) -> tuple[float, float]:
    """Map a pixel coordinate (top-left origin) to meters (center origin)."""
    px, py = p
    if not (0.0 <= px <= g.width_px and 0.0 <= py <= g.height_px):
        raise DomainError(f"pixel coordinate {p!r} outside panel")
    x = (px / g.width_px - 0.5) * g.physical_width_m
    y = (0.5 - py / g.height_px) * g.physical_height_m
    return (x, y)


def m_to_px(g: DisplayGeometry, p: tuple[float, float]) -> tuple[float, float]:
    """Inverse of :func:`px_to_m`; raises outside the panel extents."""
    x, y = p
    hw = g.physical_width_m / 2.0
    hh = g.physical_height_m / 2.0
    if not (-hw <= x <= hw and -hh <= y <= hh):
        raise DomainError(f"metric coordinate {p!r} outside panel")
    px = (x / g.physical_width_m + 0.5) * g.width_px
    py = (0.5 - y / g.physical_height_m) * g.height_px
    return (px, py)


class PixelBuffer:
    """Rectangular RGBA raster backed by a read-only float64 array.

    ``data`` has shape (height, width, 4) with channels (r, g, b, a), all in
    [0, 1]. Instances are immutable; operations build new buffers.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray, _validate: bool = True):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise DomainError(f"expected (h, w, 4) array, got {arr.shape}")
        if _validate and (arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0):
            raise DomainError("pixel channels outside [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("PixelBuffer is immutable")

    @classmethod
    def blank(cls, width_px: int, height_px: int) -> PixelBuffer:
        """Fully transparent black buffer."""
        if width_px <= 0 or height_px <= 0:
            raise DomainError("buffer dimensions must be positive")
        return cls(np.zeros((height_px, width_px, 4)), _validate=False)

    @classmethod
    def filled(cls, width_px: int, height_px: int, color: Color, alpha: float = 1.0) -> PixelBuffer:
        arr = np.empty((height_px, width_px, 4))
        arr[..., 0] = color.r
        arr[..., 1] = color.g
        arr[..., 2] = color.b
        arr[..., 3] = alpha
        return cls(arr)

    @property
    def width_px(self) -> int:
        return self.data.shape[1]

    @property
    def height_px(self) -> int:
        return self.data.shape[0]

    @property
    def rgb(self) -> np.ndarray:
        return self.data[..., :3]

    @property
    def alpha(self) -> np.ndarray:
        return self.data[..., 3]

    def same_size(self, other: PixelBuffer) -> bool:
        return self.data.shape == other.data.shape

    def pixel(self, x: int, y: int) -> tuple[Color, float]:
        r, g, b, a = self.data[y, x]
        return Color(r, g, b), float(a)

    def with_alpha_scaled(self, factor: float) -> PixelBuffer:
        """Alpha channel multiplied by ``factor``; RGB untouched."""
        if factor < 0:
            raise DomainError("alpha factor must be non-negative")
        out = self.data.copy()
        out[..., 3] = np.clip(out[..., 3] * factor, 0.0, 1.0)
        return PixelBuffer(out, _validate=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, PixelBuffer) and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"PixelBuffer({self.width_px}x{self.height_px})"


def luminance_map(buf: PixelBuffer) -> np.ndarray:
    """Per-pixel BT.709 luma of a buffer's RGB, shape (h, w)."""
    return (
        BT709_R * buf.data[..., 0]
        + BT709_G * buf.data[..., 1]
        + BT709_B * buf.data[..., 2]
    )


# ---------------------------------------------------------------------------
# Netpbm I/O. PPM (P6) carries RGB, PAM (P7, RGB_ALPHA) carries RGBA; both
# 8-bit, the bit-exact interchange formats for tests and exported frames.

def _quantize(channels: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(channels * 255.0), 0, 255).astype(np.uint8)


def to_ppm_bytes(buf: PixelBuffer) -> bytes:
    header = f"P6\n{buf.width_px} {buf.height_px}\n255\n".encode("ascii")
    return header + _quantize(buf.rgb).tobytes()


def to_pam_bytes(buf: PixelBuffer) -> bytes:
    header = (
        f"P7\nWIDTH {buf.width_px}\nHEIGHT {buf.height_px}\n"
        "DEPTH 4\nMAXVAL 255\nTUPLTYPE RGB_ALPHA\nENDHDR\n"
    ).encode("ascii")
    return header + _quantize(buf.data).tobytes()


def write_ppm(buf: PixelBuffer, path: str | Path) -> None:
    Path(path).write_bytes(to_ppm_bytes(buf))


def write_pam(buf: PixelBuffer, path: str | Path) -> None:
    Path(path).write_bytes(to_pam_bytes(buf))


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # Skips whitespace and '#' comments between header tokens.
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise DomainError("truncated Netpbm header")
    return data[start:pos], pos


def from_ppm_bytes(data: bytes) -> PixelBuffer:
    if not data.startswith(b"P6"):
        raise DomainError("not a P6 PPM stream")
    pos = 2
    w_tok, pos = _read_token(data, pos)
    h_tok, pos = _read_token(data, pos)
    maxval_tok, pos = _read_token(data, pos)
    w, h, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    if maxval != 255:
        raise DomainError(f"unsupported PPM maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    if len(data) - pos < w * h * 3:
        raise DomainError("truncated PPM raster")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    rgb = raster.reshape(h, w, 3).astype(np.float64) / 255.0
    out = np.concatenate([rgb, np.ones((h, w, 1))], axis=2)
    return PixelBuffer(out, _validate=False)


def from_pam_bytes(data: bytes) -> PixelBuffer:
    if not data.startswith(b"P7"):
        raise DomainError("not a P7 PAM stream")
    try:
        end = data.index(b"ENDHDR\n")
    except ValueError:
        raise DomainError("PAM header missing ENDHDR") from None
    fields: dict[str, str] = {}
    for line in data[2:end].decode("ascii").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition(" ")
        fields[key] = value.strip()
    try:
        w = int(fields["WIDTH"])
        h = int(fields["HEIGHT"])
        depth = int(fields["DEPTH"])
        maxval = int(fields["MAXVAL"])
    except KeyError as exc:
        raise DomainError(f"PAM header missing {exc}") from None
    if depth != 4 or maxval != 255 or fields.get("TUPLTYPE") != "RGB_ALPHA":
        raise DomainError("only 8-bit RGB_ALPHA PAM is supported")
    pos = end + len(b"ENDHDR\n")
    if len(data) - pos < w * h * 4:
        raise DomainError("truncated PAM raster")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * 4, offset=pos)
    return PixelBuffer(raster.reshape(h, w, 4).astype(np.float64) / 255.0, _validate=False)


def read_text_file(path: str | Path) -> str:
    """UTF-8 file read with undecodable bytes reported as a domain error."""
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DomainError(f"{path}: not valid UTF-8 text ({exc})") from None


def read_ppm(path: str | Path) -> PixelBuffer:
    return from_ppm_bytes(Path(path).read_bytes())


def read_pam(path: str | Path) -> PixelBuffer:
    return from_pam_bytes(Path(path).read_bytes())


def default_geometry() -> DisplayGeometry:
    """55-inch 16:9 full-HD panel pair, 72 cm apart."""
    return DisplayGeometry()


def panel_size_from_diagonal(diagonal_m: float, aspect_w: int = 16, aspect_h: int = 9) -> tuple[float, float]:
    """Physical (width, height) in meters for a diagonal and aspect ratio."""
    k = diagonal_m / math.hypot(aspect_w, aspect_h)
    return (aspect_w * k, aspect_h * k)
