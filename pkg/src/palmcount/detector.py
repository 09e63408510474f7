"""End-to-end palm detection: band -> threshold -> morphology -> blobs -> filters."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigError, MissingGeo, WrongChannelCount
from .raster import (
    GeoMeta,
    Raster,
    equivalent_diameter_m,
    extract_green_band,
    pixels_to_area_m2,
    to_grayscale,
)
from .segment import (
    StructuringElement,
    close,
    fill_holes,
    label_components,
    remove_small,
    threshold_otsu,
)
from .shape import Component, circularity, measure_components, radial_signature, signature_stats
from .validation import check_raster

PathLike = Union[str, os.PathLike]

REJECT_REASONS = ("none", "too_small", "too_large", "not_circular", "irregular_signature")


@dataclass(frozen=True)
class DetectorConfig:
    band: str = "auto"
    threshold: Union[str, int] = "otsu"
    invert: bool = False
    se: StructuringElement = StructuringElement.SQUARE3
    connectivity: int = 8
    min_canopy_diameter_m: float = 3.0
    max_canopy_diameter_m: float = 16.0
    min_circularity: float = 0.4
    max_signature_cv: float = 0.12
    signature_step_deg: float = 30.0
    noise_min_area_px: int = 8

    def __post_init__(self):
        if self.band not in ("green", "luma", "auto"):
            raise ConfigError(f"band must be green, luma or auto, got {self.band!r}")
        if self.threshold != "otsu":
            if isinstance(self.threshold, bool) or not isinstance(self.threshold, (int, np.integer)):
                raise ConfigError(f"threshold must be 'otsu' or an integer, got {self.threshold!r}")
            if not 0 <= self.threshold <= 255:
                raise ConfigError("fixed threshold must lie in 0..255")
            object.__setattr__(self, "threshold", int(self.threshold))
        try:
            object.__setattr__(self, "se", StructuringElement(self.se))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.connectivity not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")
        if not 0 < self.min_canopy_diameter_m < self.max_canopy_diameter_m:
            raise ConfigError("need 0 < min_canopy_diameter_m < max_canopy_diameter_m")
        if not math.isfinite(self.max_canopy_diameter_m):
            raise ConfigError("max_canopy_diameter_m must be finite")
        if not 0 <= self.min_circularity <= 1.2:
            raise ConfigError("min_circularity must lie in [0, 1.2]")
        if not self.max_signature_cv >= 0:
            raise ConfigError("max_signature_cv must be non-negative")
        if self.signature_step_deg <= 0 or abs(
            round(360 / self.signature_step_deg) * self.signature_step_deg - 360
        ) > 1e-9:
            raise ConfigError("signature_step_deg must divide 360")
        if self.noise_min_area_px < 0:
            raise ConfigError("noise_min_area_px must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["se"] = self.se.value
        return d


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(name: str, text: str):
    text = text.strip()
    if name == "threshold":
        return "otsu" if text.lower() == "otsu" else int(text)
    if name == "invert":
        try:
            return _BOOL_WORDS[text.lower()]
        except KeyError:
            raise ValueError(f"not a boolean: {text!r}") from None
    if name in ("connectivity", "noise_min_area_px"):
        return int(text)
    if name in ("band", "se"):
        return text
    return float(text)


CONFIG_KEYS = tuple(f.name for f in fields(DetectorConfig))


def parse_config_text(text: str, extra_keys: Sequence[str] = ()) -> dict:
    """Parse ``key = value`` lines (``#`` comments) into typed overrides.

    Keys must be DetectorConfig field names or one of ``extra_keys``; extra
    keys are returned as raw strings.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in extra_keys:
            out[key] = value
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path: PathLike, extra_keys: Sequence[str] = ()) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), extra_keys)


@dataclass(frozen=True)
class Detection:
    component: Component
    area_m2: Optional[float]
    equivalent_diameter_m: Optional[float]
    circularity: float
    signature_cv: Optional[float]
    accepted: bool
    reject_reason: str = "none"


@dataclass(frozen=True)
class RunReport:
    source: str
    count: int
    detections: list[Detection]
    config: DetectorConfig
    gsd: Optional[GeoMeta]

    @property
    def accepted(self) -> list[Detection]:
        return [d for d in self.detections if d.accepted]


def area_window_px(cfg: DetectorConfig, geo: GeoMeta) -> tuple[int, int]:
    """Pixel-area bounds of disks with the configured canopy diameters."""
    px_area = geo.gsd_x * geo.gsd_y
    lo = math.pi * (cfg.min_canopy_diameter_m / 2) ** 2 / px_area
    hi = math.pi * (cfg.max_canopy_diameter_m / 2) ** 2 / px_area
    return math.ceil(lo), math.floor(hi)


def select_band(img: Raster, band: str):
    if band == "auto":
        band = "green" if img.channels >= 3 else "luma"
    if band == "green":
        if img.channels < 3:
            raise WrongChannelCount("band=green needs a colour image")
        return extract_green_band(img)
    return to_grayscale(img)


def segment_canopy(img: Raster, cfg: DetectorConfig) -> np.ndarray:
    """Foreground mask after thresholding, closing, hole filling and despeckling."""
    gray = select_band(img, cfg.band)
    t = threshold_otsu(gray) if cfg.threshold == "otsu" else cfg.threshold
    mask = gray.values > t
    if cfg.invert:
        mask = ~mask
    mask = close(mask, cfg.se)
    mask = fill_holes(mask)
    return remove_small(mask, cfg.noise_min_area_px, cfg.connectivity)


def detect(img: Raster, cfg: DetectorConfig = DetectorConfig(), source: str = "") -> RunReport:
    """Run the pipeline and classify every blob.

    Filters run in a fixed order (area window, circularity, radial
    signature) and a rejected blob records the first one it fails. The
    signature is only computed for blobs inside the area window.
    """
    img = check_raster(img)
    geo = img.geo
    if geo is None:
        raise MissingGeo("a ground sample distance is required for the canopy size bounds")
    min_px, max_px = area_window_px(cfg, geo)

    mask = segment_canopy(img, cfg)
    labels = label_components(mask, cfg.connectivity)
    detections = []
    for comp in measure_components(labels):
        area_m2 = pixels_to_area_m2(comp.area_px, geo)
        circ = circularity(comp.area_px, comp.perimeter_px)
        cv = None
        if comp.area_px < min_px:
            reason = "too_small"
        elif comp.area_px > max_px:
            reason = "too_large"
        else:
            x0, y0, x1, y1 = comp.bbox
            crop = labels.labels[y0 : y1 + 1, x0 : x1 + 1] == comp.label
            cx, cy = comp.centroid
            # the component alone: rays beyond its bbox can only find background
            sig = radial_signature(crop, (cx - x0, cy - y0), cfg.signature_step_deg)
            cv = signature_stats(sig)[1]
            if circ < cfg.min_circularity:
                reason = "not_circular"
            elif cv > cfg.max_signature_cv:
                reason = "irregular_signature"
            else:
                reason = "none"
        detections.append(
            Detection(
                component=comp,
                area_m2=area_m2,
                equivalent_diameter_m=equivalent_diameter_m(area_m2),
                circularity=circ,
                signature_cv=cv,
                accepted=reason == "none",
                reject_reason=reason,
            )
        )
    count = sum(d.accepted for d in detections)
    return RunReport(source, count, detections, cfg, geo)


class PalmDetector(BaseEstimator):
    """Estimator wrapper around :func:`detect`.

    Hyper-parameters mirror :class:`DetectorConfig`. The detector learns
    nothing from data; ``fit`` only validates the parameters so the object
    can sit in grid searches and pipelines.

    Parameters
    ----------
    band : {'auto', 'green', 'luma'}
        Which channel feeds the threshold. ``auto`` uses green for colour
        input and luma for single-channel input.
    threshold : 'otsu' or int
        Automatic Otsu threshold or a fixed intensity.
    gsd : float, optional
        Meters/pixel assumed for inputs that carry no ``GeoMeta``.

    The remaining parameters are documented on :class:`DetectorConfig`.
    """

    def __init__(
        self,
        band="auto",
        threshold="otsu",
        invert=False,
        se="square3",
        connectivity=8,
        min_canopy_diameter_m=3.0,
        max_canopy_diameter_m=16.0,
        min_circularity=0.4,
        max_signature_cv=0.12,
        signature_step_deg=30.0,
        noise_min_area_px=8,
        gsd=None,
    ):
        self.band = band
        self.threshold = threshold
        self.invert = invert
        self.se = se
        self.connectivity = connectivity
        self.min_canopy_diameter_m = min_canopy_diameter_m
        self.max_canopy_diameter_m = max_canopy_diameter_m
        self.min_circularity = min_circularity
        self.max_signature_cv = max_signature_cv
        self.signature_step_deg = signature_step_deg
        self.noise_min_area_px = noise_min_area_px
        self.gsd = gsd

    def _make_config(self) -> DetectorConfig:
        params = {k: v for k, v in self.get_params().items() if k in CONFIG_KEYS}
        return DetectorConfig(**params)

    def fit(self, X=None, y=None):
        self.config_ = self._make_config()
        if self.gsd is not None:
            GeoMeta.square(self.gsd)
        return self

    def _prepare(self, img) -> Raster:
        img = check_raster(img)
        if img.geo is None and self.gsd is not None:
            img = img.with_geo(GeoMeta.square(self.gsd))
        return img

    def _config(self) -> DetectorConfig:
        return getattr(self, "config_", None) or self._make_config()

    def detect(self, img, source: str = "") -> RunReport:
        return detect(self._prepare(img), self._config(), source)

    def predict(self, X) -> np.ndarray:
        """Palm count for each image in ``X`` (a Raster, array, or sequence of them)."""
        if isinstance(X, Raster) or (isinstance(X, np.ndarray) and X.ndim in (2, 3)):
            X = [X]
        return np.array([self.detect(img).count for img in X], dtype=np.int64)

    def score(self, X, y) -> float:
        """Negative mean absolute count error (higher is better)."""
        y = np.asarray(y, dtype=np.float64)
        return -float(np.mean(np.abs(self.predict(X) - y)))
