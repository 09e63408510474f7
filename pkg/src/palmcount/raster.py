"""Raster data model, band access and ground-sample-distance conversions.

Pixels are held as ``uint8`` numpy arrays of shape ``(height, width,
channels)`` which is the row-major, channel-interleaved layout. Channel
order for colour data is R, G, B[, A].
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import CorruptImage, UnsupportedFormat, WrongChannelCount

PathLike = Union[str, os.PathLike]

#: BT.601 luma weights for R, G, B.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

#: QuickBird panchromatic-sharpened resolution, meters/pixel.
DEFAULT_GSD_M = 0.6

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_TIFF_MAGICS = (b"II*\x00", b"MM\x00*")


@dataclass(frozen=True)
class GeoMeta:
    """Ground sample distance in meters/pixel along x and y."""

    gsd_x: float = DEFAULT_GSD_M
    gsd_y: float = DEFAULT_GSD_M

    def __post_init__(self):
        for name in ("gsd_x", "gsd_y"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        object.__setattr__(self, "gsd_x", float(self.gsd_x))
        object.__setattr__(self, "gsd_y", float(self.gsd_y))

    @classmethod
    def square(cls, gsd: float) -> "GeoMeta":
        return cls(gsd, gsd)


@dataclass(eq=False)
class Raster:
    pixels: np.ndarray
    geo: Optional[GeoMeta] = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3, 4):
            raise WrongChannelCount(f"expected 1, 3 or 4 channels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")
        if px.dtype != np.uint8:
            raise UnsupportedFormat(f"only 8-bit samples are supported, got {px.dtype}")
        self.pixels = np.ascontiguousarray(px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def with_geo(self, geo: Optional[GeoMeta]) -> "Raster":
        return replace(self, geo=geo)

    def to_rgb(self) -> "Raster":
        """Copy as 3-channel RGB (gray replicated, alpha dropped)."""
        if self.channels == 1:
            px = np.repeat(self.pixels, 3, axis=2)
        else:
            px = self.pixels[:, :, :3].copy()
        return Raster(px, self.geo)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.geo == other.geo and np.array_equal(self.pixels, other.pixels)


@dataclass(eq=False)
class GrayRaster:
    values: np.ndarray
    geo: Optional[GeoMeta] = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError(f"gray raster must be 2-D, got shape {v.shape}")
        if v.dtype != np.uint8:
            raise UnsupportedFormat(f"only 8-bit samples are supported, got {v.dtype}")
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _bit_depth(img: Image.Image, head: bytes) -> int:
    if head.startswith(_PNG_MAGIC):
        # IHDR: 8 magic + 4 length + 4 type + 4 width + 4 height, then depth
        return head[24] if len(head) > 24 else 0
    bps = img.tag_v2.get(258, 8)
    if isinstance(bps, tuple):
        return max(bps)
    return int(bps)


def load_image(path: PathLike) -> Raster:
    """Read an 8-bit PNG or baseline TIFF.

    Palette and bilevel images are expanded to RGB(A) / gray. Raises
    ``FileNotFoundError``, :class:`UnsupportedFormat` or :class:`CorruptImage`.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(32)
    if not (head.startswith(_PNG_MAGIC) or head[:4] in _TIFF_MAGICS):
        raise UnsupportedFormat(f"{path}: not a PNG or TIFF file")
    try:
        with Image.open(path) as img:
            depth = _bit_depth(img, head)
            if depth > 8:
                raise UnsupportedFormat(f"{path}: {depth}-bit samples are not supported")
            img.load()
            mode = img.mode
            if mode == "1":
                img = img.convert("L")
            elif mode == "P":
                img = img.convert("RGBA" if "transparency" in img.info else "RGB")
            elif mode == "LA":
                img = img.convert("RGBA")
            elif mode not in ("L", "RGB", "RGBA"):
                raise UnsupportedFormat(f"{path}: unsupported pixel mode {mode!r}")
            px = np.array(img, dtype=np.uint8)
    except UnsupportedFormat:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError, EOFError) as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    return Raster(px)


def save_png(img: Raster, path: PathLike) -> None:
    px = img.pixels
    mode = {1: "L", 3: "RGB", 4: "RGBA"}[img.channels]
    data = px[:, :, 0] if img.channels == 1 else px
    Image.fromarray(data, mode=mode).save(path, format="PNG")


def read_gsd_sidecar(image_path: PathLike) -> Optional[GeoMeta]:
    """Return the GSD from ``<image>.gsd`` if that file exists.

    The sidecar holds one value (square pixels) or two (x then y).
    """
    side = Path(str(image_path) + ".gsd")
    if not side.exists():
        return None
    tokens = side.read_text(encoding="ascii").split()
    if len(tokens) not in (1, 2):
        raise ValueError(f"{side}: expected one or two numbers, got {len(tokens)}")
    vals = [float(t) for t in tokens]
    return GeoMeta(vals[0], vals[-1])


def extract_green_band(img: Raster) -> GrayRaster:
    if img.channels < 3:
        raise WrongChannelCount("green band requires a 3- or 4-channel raster")
    return GrayRaster(img.pixels[:, :, 1].copy(), img.geo)


def to_grayscale(img: Raster) -> GrayRaster:
    """BT.601 luma, rounded half away from zero and clamped to 0..255."""
    if img.channels == 1:
        return GrayRaster(img.pixels[:, :, 0].copy(), img.geo)
    rgb = img.pixels[:, :, :3].astype(np.float64)
    luma = rgb @ np.array(LUMA_WEIGHTS)
    # np.round is half-to-even; add 0.5 and floor for conventional rounding
    out = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return GrayRaster(out, img.geo)


def pixels_to_area_m2(n_pixels: float, geo: GeoMeta) -> float:
    if n_pixels < 0:
        raise ValueError("pixel count must be non-negative")
    return n_pixels * geo.gsd_x * geo.gsd_y


def equivalent_diameter_m(area_m2: float) -> float:
    """Diameter of the disk whose area is ``area_m2``."""
    if area_m2 < 0:
        raise ValueError("area must be non-negative")
    return 2.0 * math.sqrt(area_m2 / math.pi)
