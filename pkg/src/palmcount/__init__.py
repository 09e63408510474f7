"""Count palm trees in overhead imagery."""

from .detector import DetectorConfig, Detection, PalmDetector, RunReport, area_window_px, detect
from .raster import GeoMeta, GrayRaster, Raster, load_image, save_png
from .synth import GroveSpec, GroveTruth, generate_grove, match_detections

__all__ = [
    "Detection",
    "DetectorConfig",
    "GeoMeta",
    "GrayRaster",
    "GroveSpec",
    "GroveTruth",
    "PalmDetector",
    "Raster",
    "RunReport",
    "area_window_px",
    "detect",
    "generate_grove",
    "load_image",
    "match_detections",
    "save_png",
]

__version__ = "0.1.0"
