"""Per-component measurements and the centroid-anchored radial signature."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import CenterOutOfBounds, ZeroPerimeter
from .segment import LabelMap
from .validation import check_mask

#: Ray-marching increment in pixels.
RAY_STEP_PX = 0.5


@dataclass(frozen=True)
class Component:
    label: int
    area_px: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]
    perimeter_px: int


@dataclass(frozen=True)
class RadialSignature:
    """Boundary distances from ``center``.

    Entry ``k`` is for angle ``k * step_deg`` counterclockwise from +x as the
    image is displayed (y axis pointing down).
    """

    center: tuple[float, float]
    step_deg: float
    distances: tuple[float, ...]


def measure_components(labels: LabelMap) -> list[Component]:
    """Area, centroid, tight bbox and 4-neighbour exposed-edge perimeter."""
    lab = labels.labels
    n = labels.component_count
    if n == 0:
        return []
    h, w = lab.shape
    ys, xs = np.nonzero(lab)
    ids = lab[ys, xs]

    area = np.bincount(ids, minlength=n + 1)
    sx = np.bincount(ids, weights=xs, minlength=n + 1)
    sy = np.bincount(ids, weights=ys, minlength=n + 1)

    min_x = np.full(n + 1, w, dtype=np.int64)
    min_y = np.full(n + 1, h, dtype=np.int64)
    max_x = np.full(n + 1, -1, dtype=np.int64)
    max_y = np.full(n + 1, -1, dtype=np.int64)
    np.minimum.at(min_x, ids, xs)
    np.minimum.at(min_y, ids, ys)
    np.maximum.at(max_x, ids, xs)
    np.maximum.at(max_y, ids, ys)

    padded = np.pad(lab, 1)
    centre = padded[1:-1, 1:-1]
    perim = np.zeros(n + 1, dtype=np.int64)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nb = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        exposed = (centre > 0) & (centre != nb)
        perim += np.bincount(centre[exposed], minlength=n + 1)

    out = []
    for k in range(1, n + 1):
        a = int(area[k])
        out.append(
            Component(
                label=k,
                area_px=a,
                centroid=(float(sx[k] / a), float(sy[k] / a)),
                bbox=(int(min_x[k]), int(min_y[k]), int(max_x[k]), int(max_y[k])),
                perimeter_px=int(perim[k]),
            )
        )
    return out


def circularity(area_px: float, perimeter_px: float) -> float:
    """``4*pi*A / P**2``; 1 for a continuous disk."""
    if perimeter_px <= 0:
        raise ZeroPerimeter("perimeter must be positive")
    return 4.0 * math.pi * area_px / (perimeter_px * perimeter_px)


def _angle_count(step_deg: float) -> int:
    if step_deg <= 0:
        raise ValueError("step_deg must be positive")
    n = round(360.0 / step_deg)
    if n < 1 or abs(n * step_deg - 360.0) > 1e-9:
        raise ValueError(f"step_deg {step_deg} does not divide 360")
    return n


def _nearest_away(v: np.ndarray, c: float) -> np.ndarray:
    """Nearest pixel index, breaking .5 ties away from ``c`` (rotation-symmetric)."""
    return np.where(v >= c, np.floor(v + 0.5), np.ceil(v - 0.5)).astype(np.int64)


def radial_signature(mask, center, step_deg: float = 30.0) -> RadialSignature:
    """Distance from ``center`` to the farthest foreground sample on each ray.

    Rays are marched in 0.5 px increments to the image edge; a sample counts
    as foreground when its nearest pixel is foreground, ties going to the
    pixel farther from the centre. Taking the farthest hit (not the first
    miss) lets rays cross dark gaps between fronds.
    """
    m = check_mask(mask)
    h, w = m.shape
    cx, cy = float(center[0]), float(center[1])
    if not (-0.5 <= cx < w - 0.5 and -0.5 <= cy < h - 0.5):
        raise CenterOutOfBounds(f"center {center} outside {w}x{h} image")
    n = _angle_count(step_deg)

    theta = np.deg2rad(np.arange(n) * step_deg)[:, None]
    # snap so axis-aligned rays carry no 1e-16 drift
    cos_t, sin_t = np.round(np.cos(theta), 12), np.round(np.sin(theta), 12)
    max_steps = int(math.ceil(math.hypot(w, h) / RAY_STEP_PX)) + 2
    t = np.arange(max_steps + 1) * RAY_STEP_PX
    px = _nearest_away(cx + t * cos_t, cx)
    py = _nearest_away(cy - t * sin_t, cy)
    inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)
    hit = np.zeros_like(inside)
    hit[inside] = m[py[inside], px[inside]]

    dist = np.where(hit, t, 0.0).max(axis=1)
    return RadialSignature((cx, cy), float(step_deg), tuple(float(d) for d in dist))


def signature_stats(sig: RadialSignature) -> tuple[float, float]:
    """Mean distance and coefficient of variation (population std / mean).

    CV is ``inf`` when the mean is zero.
    """
    d = np.asarray(sig.distances, dtype=np.float64)
    if d.size == 0:
        raise ValueError("signature has no distances")
    mean = float(d.mean())
    if mean == 0.0:
        return mean, math.inf
    return mean, float(d.std() / mean)
