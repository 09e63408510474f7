"""Command-line front end.

Only contracted results go to stdout; diagnostics go to stderr. Exit
codes: 0 success, 1 runtime or I/O failure, 2 bad arguments or spec.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .detector import CONFIG_KEYS, DetectorConfig, RunReport, detect, load_config
from .exceptions import (
    ConfigError,
    CorruptImage,
    MissingGeo,
    SpecInfeasible,
    UnsupportedFormat,
    WrongChannelCount,
)
from .output import annotate, export_crops, read_report, write_png, write_report
from .raster import GeoMeta, Raster, load_image, read_gsd_sidecar
from .synth import GroveSpec, generate_grove, match_detections, read_truth, write_truth

log = logging.getLogger("palmcount")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)


def _threshold(text: str):
    if text.lower() == "otsu":
        return "otsu"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'otsu' or an integer, got {text!r}") from None


# flag dest -> DetectorConfig field
_FLAG_FIELDS = {
    "band": "band",
    "threshold": "threshold",
    "invert": "invert",
    "se": "se",
    "connectivity": "connectivity",
    "min_diameter": "min_canopy_diameter_m",
    "max_diameter": "max_canopy_diameter_m",
    "min_circularity": "min_circularity",
    "max_signature_cv": "max_signature_cv",
    "signature_step": "signature_step_deg",
    "noise_min_area": "noise_min_area_px",
}


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("image", type=Path)
    p.add_argument("--gsd", type=float, nargs="+", metavar="M",
                   help="meters/pixel: one value, or x then y")
    p.add_argument("--config", type=Path, help="key=value detector config file")
    p.add_argument("--band", choices=("auto", "green", "luma"), default=None)
    p.add_argument("--threshold", type=_threshold, default=None, help="'otsu' or 0..255")
    p.add_argument("--invert", action="store_const", const=True, default=None,
                   help="treat dark pixels as canopy")
    p.add_argument("--se", choices=("square3", "cross3", "square5"), default=None)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=None)
    p.add_argument("--min-diameter", type=float, default=None, metavar="M")
    p.add_argument("--max-diameter", type=float, default=None, metavar="M")
    p.add_argument("--min-circularity", type=float, default=None)
    p.add_argument("--max-signature-cv", type=float, default=None)
    p.add_argument("--signature-step", type=float, default=None, metavar="DEG")
    p.add_argument("--noise-min-area", type=int, default=None, metavar="PX")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="palmcount", description="Detect and count palm trees in overhead imagery.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="print the number of palms")
    _add_detector_flags(p)
    p.add_argument("--out", type=Path, help="report path (.json or .csv)")

    p = sub.add_parser("annotate", help="draw a circle round each palm")
    _add_detector_flags(p)
    p.add_argument("--out", type=Path, required=True, help="annotated PNG path")
    p.add_argument("--report", type=Path, help="also write a report (.json or .csv)")

    p = sub.add_parser("crops", help="export one PNG per palm plus index.csv")
    _add_detector_flags(p)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("synth", help="render a synthetic grove with ground truth")
    p.add_argument("--palms", type=int, required=True)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--gsd", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distractors", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="salt-and-pepper density")
    p.add_argument("--radius-min", type=float, default=8.0)
    p.add_argument("--radius-max", type=float, default=12.0)
    p.add_argument("--spacing", type=float, default=30.0, help="minimum palm spacing, px")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)

    p = sub.add_parser("eval", help="score a report against synthetic truth")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--tol-px", type=float, default=5.0)
    return parser


def _geo_from_values(values) -> GeoMeta:
    if len(values) not in (1, 2):
        raise UsageError("--gsd takes one or two values")
    try:
        return GeoMeta(values[0], values[-1])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def resolve_settings(args) -> tuple[DetectorConfig, GeoMeta]:
    """Merge settings: CLI flag > config file > GSD sidecar > built-in default."""
    geo = read_gsd_sidecar(args.image)
    overrides = {}
    if args.config is not None:
        try:
            file_vals = load_config(args.config, extra_keys=("gsd",))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if "gsd" in file_vals:
            try:
                geo = _geo_from_values([float(v) for v in file_vals.pop("gsd").split()])
            except ValueError:
                raise UsageError("config gsd must be one or two numbers") from None
        overrides.update(file_vals)
    for dest, field in _FLAG_FIELDS.items():
        v = getattr(args, dest)
        if v is not None:
            overrides[field] = v
    if args.gsd is not None:
        geo = _geo_from_values(args.gsd)
    if geo is None:
        raise UsageError("no ground sample distance: pass --gsd or provide <image>.gsd")
    unknown = set(overrides) - set(CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return DetectorConfig(**overrides), geo


def _report_format(path: Path) -> str:
    fmt = path.suffix.lower().lstrip(".")
    if fmt not in ("json", "csv"):
        raise UsageError(f"report path must end in .json or .csv, got {path}")
    return fmt


def _run_detector(args) -> tuple[Raster, RunReport]:
    cfg, geo = resolve_settings(args)
    img = load_image(args.image).with_geo(geo)
    log.info("loaded %s (%dx%d, %d channels)", args.image, img.width, img.height, img.channels)
    report = detect(img, cfg, source=str(args.image))
    log.info("%d blobs, %d accepted", len(report.detections), report.count)
    return img, report


def cmd_count(args) -> int:
    fmt = _report_format(args.out) if args.out else None
    _, report = _run_detector(args)
    if args.out:
        write_report(report, fmt, args.out)
    print(report.count)
    return EXIT_OK


def cmd_annotate(args) -> int:
    fmt = _report_format(args.report) if args.report else None
    img, report = _run_detector(args)
    write_png(annotate(img, report), args.out)
    if args.report:
        write_report(report, fmt, args.report)
    print(report.count)
    return EXIT_OK


def cmd_crops(args) -> int:
    img, report = _run_detector(args)
    export_crops(img, report, args.out_dir)
    print(report.count)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = GroveSpec(
            width=args.width,
            height=args.height,
            gsd=GeoMeta.square(args.gsd),
            n_palms=args.palms,
            palm_radius_range_px=(args.radius_min, args.radius_max),
            n_distractors=args.distractors,
            min_spacing_px=args.spacing,
            noise_density=args.noise,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    img, truth = generate_grove(spec)
    write_png(img, args.out)
    Path(str(args.out) + ".gsd").write_text(f"{spec.gsd.gsd_x!r} {spec.gsd.gsd_y!r}\n", encoding="ascii")
    write_truth(truth, args.truth, spec)
    log.info("wrote %s with %d palms, %d distractors", args.out, len(truth.palms), len(truth.distractors))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.tol_px <= 0:
        raise UsageError("--tol-px must be positive")
    try:
        report = read_report(args.report)
        truth = read_truth(args.truth)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    m = match_detections(report, truth, args.tol_px)
    print(f"{m.true_positives} {m.false_positives} {m.false_negatives} {m.precision:.6f} {m.recall:.6f}")
    return EXIT_OK


COMMANDS = {
    "count": cmd_count,
    "annotate": cmd_annotate,
    "crops": cmd_crops,
    "synth": cmd_synth,
    "eval": cmd_eval,
}


def _configure_logging(verbose: bool) -> None:
    # own handler on the current stderr, so repeated calls never stack or go stale
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, MissingGeo, SpecInfeasible, WrongChannelCount) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (OSError, CorruptImage, UnsupportedFormat, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
