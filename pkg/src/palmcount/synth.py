"""Synthetic palm groves with known ground truth, and detection scoring.

Randomness comes from numpy's PCG64 bit generator seeded through a
``SeedSequence``; independent streams for layout, palms, distractors and
noise are obtained with ``SeedSequence.spawn``. A given spec therefore
always renders byte-identical images on any platform numpy supports.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .exceptions import SpecInfeasible
from .raster import GeoMeta, Raster

PathLike = Union[str, os.PathLike]

SOIL_RGB = (135, 110, 80)
FROND_RGB = (70, 150, 50)
FROND_SHADOW_RGB = (45, 90, 35)
CORE_RGB = (40, 75, 30)
DISTRACTOR_RGB = (80, 155, 60)
DISTRACTOR_LEAF_GAP_RGB = (60, 115, 45)

#: Relative radius of the dark self-shadow core.
CORE_FRACTION = 0.2
#: Coefficient of variation of distractor vertex radii.
DISTRACTOR_JITTER_CV = 0.4
#: Distractor vertices are resampled until they lie in this band of ``r0``.
DISTRACTOR_RADIUS_BAND = (0.3, 1.9)
PLACEMENT_ATTEMPTS_PER_ITEM = 1000
# densest packing of equal disks in the plane
_HEX_DENSITY = math.pi / (2.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class GroveSpec:
    width: int = 512
    height: int = 512
    gsd: GeoMeta = field(default_factory=GeoMeta)
    n_palms: int = 25
    palm_radius_range_px: tuple[float, float] = (8.0, 12.0)
    n_distractors: int = 0
    min_spacing_px: float = 30.0
    noise_density: float = 0.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.palm_radius_range_px
        if self.width < 1 or self.height < 1:
            raise SpecInfeasible("image must be at least 1x1")
        if self.n_palms < 0 or self.n_distractors < 0:
            raise SpecInfeasible("object counts must be non-negative")
        if not 0 < lo <= hi:
            raise SpecInfeasible(f"bad palm radius range {self.palm_radius_range_px}")
        if hi >= min(self.width, self.height) / 2:
            raise SpecInfeasible("palm radius does not fit inside the image")
        if self.min_spacing_px < 2 * hi:
            raise SpecInfeasible("min_spacing_px must be at least twice the max palm radius")
        if not 0.0 <= self.noise_density <= 1.0:
            raise SpecInfeasible("noise_density must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["palm_radius_range_px"] = list(self.palm_radius_range_px)
        return d


@dataclass(frozen=True)
class GroveTruth:
    palms: list[tuple[tuple[float, float], float]]
    distractors: list[tuple[tuple[float, float], float]]


@dataclass(frozen=True)
class MatchResult:
    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def precision(self) -> float:
        d = self.true_positives + self.false_positives
        return 1.0 if d == 0 else self.true_positives / d

    @property
    def recall(self) -> float:
        d = self.true_positives + self.false_negatives
        return 1.0 if d == 0 else self.true_positives / d


def _check_packing(n: int, spacing: float, w: float, h: float) -> None:
    # centres at mutual distance >= spacing own disjoint disks of radius spacing/2
    if n > 1:
        region = (w + spacing) * (h + spacing)
        if n * math.pi * (spacing / 2) ** 2 > _HEX_DENSITY * region:
            raise SpecInfeasible(f"{n} palms at spacing {spacing} cannot fit in {w:g}x{h:g}")


def _place(rng, n, lo_xy, hi_xy, clear_of) -> np.ndarray:
    """Rejection-sample ``n`` centres; ``clear_of(p, placed)`` vets each candidate."""
    placed = np.empty((0, 2))
    budget = PLACEMENT_ATTEMPTS_PER_ITEM * n
    attempts = 0
    while len(placed) < n:
        if attempts >= budget:
            raise SpecInfeasible(f"placed only {len(placed)} of {n} objects")
        attempts += 1
        p = rng.uniform(lo_xy, hi_xy)
        if clear_of(p, placed):
            placed = np.vstack([placed, p])
    return placed


def _pixel_grid(cx, cy, reach, w, h):
    x0, x1 = max(0, int(math.floor(cx - reach))), min(w, int(math.ceil(cx + reach)) + 1)
    y0, y1 = max(0, int(math.floor(cy - reach))), min(h, int(math.ceil(cy + reach)) + 1)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    return (slice(y0, y1), slice(x0, x1)), xs - cx, ys - cy


def _paint(img, sl, where, rgb, rng, sigma):
    region = img[sl]
    n = int(where.sum())
    if n == 0:
        return
    base = np.asarray(rgb, dtype=np.float64)
    shade = rng.normal(0.0, sigma, size=(n, 1))
    region[where] = np.clip(np.rint(base + shade), 0, 255).astype(np.uint8)


def _render_palm(img, cx, cy, radius, rng):
    """Frond wedges round a dark core; shadow lines separate the fronds."""
    h, w = img.shape[:2]
    n_fronds = int(rng.integers(8, 13))
    phase = rng.uniform(0.0, 2 * math.pi)
    sl, dx, dy = _pixel_grid(cx, cy, radius + 1, w, h)
    d = np.hypot(dx, dy)
    theta = np.arctan2(-dy, dx)
    u = ((theta - phase) * n_fronds / (2 * math.pi)) % 1.0
    envelope = radius * (0.9 + 0.1 * np.sin(math.pi * u))
    canopy = d <= envelope

    # fronds brighten toward their tips
    frond = canopy & (d > CORE_FRACTION * radius)
    region = img[sl]
    n = int(frond.sum())
    grad = 20.0 * (d[frond] / radius)
    base = np.asarray(FROND_RGB, dtype=np.float64)[None, :] + np.array([[0.5, 1.0, 0.3]]) * grad[:, None]
    base += rng.normal(0.0, 5.0, size=(n, 1))
    region[frond] = np.clip(np.rint(base), 0, 255).astype(np.uint8)

    edge_dist = np.minimum(u, 1.0 - u)
    shadow = canopy & (edge_dist < 0.08) & (d > CORE_FRACTION * radius) & (d < 0.7 * radius)
    _paint(img, sl, shadow, FROND_SHADOW_RGB, rng, 4.0)
    _paint(img, sl, canopy & (d <= CORE_FRACTION * radius), CORE_RGB, rng, 4.0)


def _distractor_vertices(rng, r0):
    lo, hi = DISTRACTOR_RADIUS_BAND
    n = int(rng.integers(7, 12))
    while True:
        z = rng.normal(size=n)
        dev = z - z.mean()
        sd = dev.std()
        if sd == 0:
            continue
        radii = r0 * (1.0 + DISTRACTOR_JITTER_CV * dev / sd)
        if radii.min() >= lo * r0 and radii.max() <= hi * r0:
            break
    angles = (np.arange(n) + rng.uniform(-0.3, 0.3, size=n)) * (2 * math.pi / n)
    return np.cos(angles) * radii, -np.sin(angles) * radii


def _inside_polygon(xs, ys, vx, vy):
    inside = np.zeros(xs.shape, dtype=bool)
    n = len(vx)
    for i in range(n):
        x1, y1, x2, y2 = vx[i], vy[i], vx[(i + 1) % n], vy[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > ys) != (y2 > ys)
        x_at = (x2 - x1) * (ys - y1) / (y2 - y1) + x1
        inside ^= crosses & (xs < x_at)
    return inside


def _render_distractor(img, cx, cy, r0, rng):
    """Irregular polygonal crown with scattered dark leaf gaps."""
    h, w = img.shape[:2]
    vx, vy = _distractor_vertices(rng, r0)
    sl, dx, dy = _pixel_grid(cx, cy, DISTRACTOR_RADIUS_BAND[1] * r0 + 1, w, h)
    crown = _inside_polygon(dx, dy, vx, vy)
    gaps = crown & (rng.random(crown.shape) < 0.15)
    _paint(img, sl, crown & ~gaps, DISTRACTOR_RGB, rng, 6.0)
    _paint(img, sl, gaps, DISTRACTOR_LEAF_GAP_RGB, rng, 4.0)


def generate_grove(spec: GroveSpec) -> tuple[Raster, GroveTruth]:
    """Render a grove image and return it with the planted truth."""
    w, h = spec.width, spec.height
    lo_r, hi_r = spec.palm_radius_range_px
    layout_ss, palm_ss, distractor_ss, noise_ss = np.random.SeedSequence(
        spec.seed & 0xFFFF_FFFF_FFFF_FFFF
    ).spawn(4)
    layout = np.random.Generator(np.random.PCG64(layout_ss))

    margin = hi_r + 1.0
    lo_xy, hi_xy = (margin, margin), (w - 1 - margin, h - 1 - margin)
    _check_packing(spec.n_palms, spec.min_spacing_px, hi_xy[0] - lo_xy[0], hi_xy[1] - lo_xy[1])

    spacing = spec.min_spacing_px

    def palm_ok(p, placed):
        return not len(placed) or np.hypot(*(placed - p).T).min() >= spacing

    palm_xy = _place(layout, spec.n_palms, lo_xy, hi_xy, palm_ok)
    palm_r = layout.uniform(lo_r, hi_r, size=spec.n_palms)

    reach = DISTRACTOR_RADIUS_BAND[1]
    d_r = layout.uniform(lo_r, hi_r, size=spec.n_distractors)
    d_xy = np.empty((0, 2))
    for i in range(spec.n_distractors):
        ext = reach * d_r[i]
        d_lo = (min(ext, w / 2), min(ext, h / 2))
        d_hi = (max(w - 1 - ext, w / 2), max(h - 1 - ext, h / 2))

        def clear(p, _placed, ext=ext):
            if len(palm_xy) and (np.hypot(*(palm_xy - p).T) - palm_r).min() < ext + 3:
                return False
            if len(d_xy) and (np.hypot(*(d_xy - p).T) - reach * d_r[: len(d_xy)]).min() < ext + 3:
                return False
            return True

        d_xy = np.vstack([d_xy, _place(layout, 1, d_lo, d_hi, clear)])

    noise = np.random.Generator(np.random.PCG64(noise_ss))
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = SOIL_RGB

    d_rng = np.random.Generator(np.random.PCG64(distractor_ss))
    for (cx, cy), r0 in zip(d_xy, d_r):
        _render_distractor(img, cx, cy, r0, d_rng)
    p_rng = np.random.Generator(np.random.PCG64(palm_ss))
    for (cx, cy), r in zip(palm_xy, palm_r):
        _render_palm(img, cx, cy, r, p_rng)

    if spec.noise_density > 0:
        hit = noise.random((h, w)) < spec.noise_density
        salt = noise.random((h, w)) < 0.5
        img[hit & salt] = 255
        img[hit & ~salt] = 0

    truth = GroveTruth(
        palms=[((float(x), float(y)), float(r)) for (x, y), r in zip(palm_xy, palm_r)],
        distractors=[((float(x), float(y)), float(r)) for (x, y), r in zip(d_xy, d_r)],
    )
    return Raster(img, spec.gsd), truth


def match_detections(report, truth: GroveTruth, tol_px: float = 5.0) -> MatchResult:
    """Greedy one-to-one matching of accepted detections to truth palms.

    Candidate pairs are taken in order of increasing centroid distance; a
    pair is kept when both members are still free and it is within
    ``tol_px``.
    """
    if tol_px <= 0:
        raise ValueError("tol_px must be positive")
    det = np.array([d.component.centroid for d in report.detections if d.accepted]).reshape(-1, 2)
    gt = np.array([c for c, _ in truth.palms], dtype=np.float64).reshape(-1, 2)
    tp = 0
    if len(det) and len(gt):
        dist = np.hypot(det[:, None, 0] - gt[None, :, 0], det[:, None, 1] - gt[None, :, 1])
        di, gi = np.nonzero(dist <= tol_px)
        order = np.lexsort((gi, di, dist[di, gi]))
        used_d, used_g = set(), set()
        for k in order:
            a, b = int(di[k]), int(gi[k])
            if a not in used_d and b not in used_g:
                used_d.add(a)
                used_g.add(b)
        tp = len(used_d)
    return MatchResult(tp, len(det) - tp, len(gt) - tp)


def truth_to_dict(truth: GroveTruth, spec: GroveSpec | None = None) -> dict:
    out = {
        "palms": [{"x": x, "y": y, "radius_px": r} for (x, y), r in truth.palms],
        "distractors": [{"x": x, "y": y, "approx_radius": r} for (x, y), r in truth.distractors],
    }
    if spec is not None:
        out["spec"] = spec.to_dict()
    return out


def write_truth(truth: GroveTruth, path: PathLike, spec: GroveSpec | None = None) -> None:
    Path(path).write_text(json.dumps(truth_to_dict(truth, spec), indent=2) + "\n", encoding="utf-8")


def read_truth(path: PathLike) -> GroveTruth:
    """Parse a truth file; raises ``ValueError`` when fields are missing."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        palms = [((float(p["x"]), float(p["y"])), float(p["radius_px"])) for p in data["palms"]]
        distractors = [
            ((float(p["x"]), float(p["y"])), float(p["approx_radius"]))
            for p in data.get("distractors", [])
        ]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed truth file ({exc})") from exc
    return GroveTruth(palms, distractors)
