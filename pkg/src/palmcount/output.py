"""Annotated images, per-palm crops and CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .detector import Detection, DetectorConfig, RunReport
from .exceptions import WrongChannelCount
from .raster import GeoMeta, Raster, save_png
from .shape import Component

PathLike = Union[str, os.PathLike]

RED = (255, 0, 0)

CSV_COLUMNS = (
    "index",
    "accepted",
    "reject_reason",
    "centroid_x",
    "centroid_y",
    "area_px",
    "area_m2",
    "equiv_diameter_m",
    "circularity",
    "signature_cv",
)
INDEX_COLUMNS = ("file", "centroid_x", "centroid_y", "area_px")
CROP_MARGIN_PX = 2


@dataclass(frozen=True)
class Annotation:
    center: tuple[float, float]
    radius: float
    color: tuple[int, int, int] = RED

    @classmethod
    def for_detection(cls, det: Detection, color=RED) -> "Annotation":
        r = math.sqrt(det.component.area_px / math.pi)
        return cls(det.component.centroid, max(r, 2.0), tuple(color))


def midpoint_circle(radius: int) -> set[tuple[int, int]]:
    """Offsets ``(dx, dy)`` of the midpoint-circle raster of ``radius``."""
    pts = set()
    x, y = 0, radius
    p = 1 - radius
    while x <= y:
        for a, b in ((x, y), (y, x)):
            pts.update({(a, b), (-a, b), (a, -b), (-a, -b)})
        x += 1
        if p < 0:
            p += 2 * x + 1
        else:
            y -= 1
            p += 2 * (x - y) + 1
    return pts


def draw_circle(img: Raster, ann: Annotation) -> Raster:
    """Copy of ``img`` with a 1 px circle; off-image pixels are clipped."""
    if img.channels < 3:
        raise WrongChannelCount("annotation needs an RGB or RGBA image")
    out = img.pixels.copy()
    cx, cy = int(math.floor(ann.center[0] + 0.5)), int(math.floor(ann.center[1] + 0.5))
    r = max(int(math.floor(ann.radius + 0.5)), 1)
    offs = np.array(sorted(midpoint_circle(r)))
    xs, ys = offs[:, 0] + cx, offs[:, 1] + cy
    keep = (xs >= 0) & (xs < img.width) & (ys >= 0) & (ys < img.height)
    out[ys[keep], xs[keep], :3] = ann.color
    return Raster(out, img.geo)


def annotate(img: Raster, report: RunReport, color=RED) -> Raster:
    """RGB copy of ``img`` with one circle per accepted detection."""
    out = img.to_rgb()
    for det in report.accepted:
        out = draw_circle(out, Annotation.for_detection(det, color))
    return out


def _atomic_write(path: Path, write) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_png(img: Raster, path: PathLike) -> None:
    buf = io.BytesIO()
    save_png(img, buf)
    _atomic_write(Path(path), lambda fh: fh.write(buf.getvalue()))


def _sig6(v: Optional[float]):
    if v is None or not math.isfinite(v):
        return None
    return float(f"{v:.6g}")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if not math.isfinite(v) else f"{v:.6g}"
    return str(v)


def _crop_box(comp: Component, width: int, height: int):
    x0, y0, x1, y1 = comp.bbox
    return (
        max(0, x0 - CROP_MARGIN_PX),
        max(0, y0 - CROP_MARGIN_PX),
        min(width - 1, x1 + CROP_MARGIN_PX),
        min(height - 1, y1 + CROP_MARGIN_PX),
    )


def export_crops(img: Raster, report: RunReport, out_dir: PathLike) -> list[Path]:
    """Save one PNG per accepted detection plus an ``index.csv``.

    Crops are the bbox grown by 2 px and clipped to the image. Files are
    numbered from 1 in report order: ``palm_0001.png``, ...
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    rows = []
    for i, det in enumerate(report.accepted, 1):
        x0, y0, x1, y1 = _crop_box(det.component, img.width, img.height)
        crop = Raster(img.pixels[y0 : y1 + 1, x0 : x1 + 1], img.geo)
        path = out_dir / f"palm_{i:04d}.png"
        write_png(crop, path)
        paths.append(path)
        cx, cy = det.component.centroid
        rows.append((path.name, _cell(cx), _cell(cy), str(det.component.area_px)))

    text = io.StringIO()
    w = csv.writer(text, lineterminator="\n")
    w.writerow(INDEX_COLUMNS)
    w.writerows(rows)
    _atomic_write(out_dir / "index.csv", lambda fh: fh.write(text.getvalue().encode("utf-8")))
    return paths


def report_to_csv(report: RunReport) -> str:
    text = io.StringIO()
    w = csv.writer(text, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i, det in enumerate(report.detections, 1):
        c = det.component
        w.writerow(
            [
                _cell(i),
                _cell(det.accepted),
                det.reject_reason,
                _cell(c.centroid[0]),
                _cell(c.centroid[1]),
                _cell(c.area_px),
                _cell(det.area_m2),
                _cell(det.equivalent_diameter_m),
                _cell(det.circularity),
                _cell(det.signature_cv),
            ]
        )
    return text.getvalue()


def report_to_dict(report: RunReport) -> dict:
    cfg = {k: (_sig6(v) if isinstance(v, float) else v) for k, v in report.config.to_dict().items()}
    gsd = None
    if report.gsd is not None:
        gsd = {"gsd_x": _sig6(report.gsd.gsd_x), "gsd_y": _sig6(report.gsd.gsd_y)}
    dets = []
    for i, det in enumerate(report.detections, 1):
        c = det.component
        dets.append(
            {
                "index": i,
                "label": c.label,
                "accepted": det.accepted,
                "reject_reason": det.reject_reason,
                "centroid_x": _sig6(c.centroid[0]),
                "centroid_y": _sig6(c.centroid[1]),
                "bbox": list(c.bbox),
                "area_px": c.area_px,
                "perimeter_px": c.perimeter_px,
                "area_m2": _sig6(det.area_m2),
                "equiv_diameter_m": _sig6(det.equivalent_diameter_m),
                "circularity": _sig6(det.circularity),
                "signature_cv": _sig6(det.signature_cv),
            }
        )
    return {
        "count": report.count,
        "source": report.source,
        "gsd": gsd,
        "config": cfg,
        "detections": dets,
    }


def report_to_json(report: RunReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def report_from_dict(data: dict) -> RunReport:
    """Rebuild a report from its JSON form; raises ``ValueError`` on bad input."""
    try:
        dets = []
        for d in data["detections"]:
            comp = Component(
                label=int(d["label"]),
                area_px=int(d["area_px"]),
                centroid=(float(d["centroid_x"]), float(d["centroid_y"])),
                bbox=tuple(int(v) for v in d["bbox"]),
                perimeter_px=int(d["perimeter_px"]),
            )
            dets.append(
                Detection(
                    component=comp,
                    area_m2=d.get("area_m2"),
                    equivalent_diameter_m=d.get("equiv_diameter_m"),
                    circularity=float(d["circularity"]),
                    signature_cv=d.get("signature_cv"),
                    accepted=bool(d["accepted"]),
                    reject_reason=str(d["reject_reason"]),
                )
            )
        gsd = data.get("gsd")
        geo = None if gsd is None else GeoMeta(gsd["gsd_x"], gsd["gsd_y"])
        cfg = DetectorConfig(**data["config"])
        count = int(data["count"])
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"malformed report: {exc!r}") from exc
    if count != sum(d.accepted for d in dets):
        raise ValueError("report count disagrees with accepted detections")
    return RunReport(str(data.get("source", "")), count, dets, cfg, geo)


def read_report(path: PathLike) -> RunReport:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: report must be a JSON object")
    return report_from_dict(data)


def write_report(report: RunReport, fmt: str, path: PathLike) -> None:
    if fmt == "json":
        text = report_to_json(report)
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    _atomic_write(Path(path), lambda fh: fh.write(text.encode("utf-8")))
