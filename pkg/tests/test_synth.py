import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from palmcount.detector import Detection, DetectorConfig, RunReport
from palmcount.exceptions import SpecInfeasible
from palmcount.raster import GeoMeta
from palmcount.shape import Component
from palmcount.synth import (
    SOIL_RGB,
    GroveSpec,
    GroveTruth,
    generate_grove,
    match_detections,
    read_truth,
    write_truth,
)


def report_at(points):
    dets = [
        Detection(Component(i + 1, 100, (float(x), float(y)), (0, 0, 1, 1), 40), None, None, 0.5, 0.05, True)
        for i, (x, y) in enumerate(points)
    ]
    return RunReport("t", len(dets), dets, DetectorConfig(), None)


def truth_at(points):
    return GroveTruth([((float(x), float(y)), 10.0) for x, y in points], [])


def exhaustive_tp(det, gt, tol):
    """Maximum-cardinality matching by brute force over all injections."""
    best = 0
    small, large = (det, gt) if len(det) <= len(gt) else (gt, det)
    for perm in itertools.permutations(range(len(large)), len(small)):
        tp = sum(math.dist(small[i], large[j]) <= tol for i, j in enumerate(perm))
        best = max(best, tp)
    return best


def test_empty_scene_is_uniform():
    img, truth = generate_grove(GroveSpec(40, 30, GeoMeta(), 0, (8, 12), 0, 30, 0.0, seed=1))
    assert (img.pixels == SOIL_RGB).all()
    assert truth.palms == [] and truth.distractors == []


def test_deterministic_bytes():
    spec = GroveSpec(128, 128, GeoMeta(), 5, (6, 9), 3, 20, 0.01, seed=2**63 + 5)
    a, ta = generate_grove(spec)
    b, tb = generate_grove(spec)
    assert a.pixels.tobytes() == b.pixels.tobytes()
    assert ta == tb
    c, _ = generate_grove(GroveSpec(128, 128, GeoMeta(), 5, (6, 9), 3, 20, 0.01, seed=6))
    assert c.pixels.tobytes() != a.pixels.tobytes()


def test_acceptance_layout_spacing():
    spec = GroveSpec(512, 512, GeoMeta(), 25, (8, 12), 0, 30, 0.0, seed=42)
    _, truth = generate_grove(spec)
    assert len(truth.palms) == 25
    centres = [c for c, _ in truth.palms]
    assert min(math.dist(a, b) for a, b in itertools.combinations(centres, 2)) >= 30
    assert all(8 <= r <= 12 for _, r in truth.palms)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), n=st.integers(0, 12), nd=st.integers(0, 5))
def test_truth_invariants(seed, n, nd):
    spec = GroveSpec(200, 200, GeoMeta(), n, (6, 9), nd, 20, 0.0, seed=seed)
    img, truth = generate_grove(spec)
    assert len(truth.palms) == n and len(truth.distractors) == nd
    for (a, _), (b, _) in itertools.combinations(truth.palms, 2):
        assert math.dist(a, b) >= 20
    assert img.geo == spec.gsd


def _green_dominant(px):
    p = px.astype(int)
    return (p[..., 1] > p[..., 0]) & (p[..., 1] > p[..., 2])


@pytest.mark.parametrize("seed", range(5))
def test_palm_envelope_is_greener_than_surroundings(seed):
    img, truth = generate_grove(GroveSpec(256, 256, GeoMeta(), 8, (8, 12), 6, 30, 0.002, seed=seed))
    green = _green_dominant(img.pixels)
    ys, xs = np.mgrid[: img.height, : img.width]
    for (cx, cy), r in truth.palms:
        d = np.hypot(xs - cx, ys - cy)
        inside = green[d <= r].mean()
        ring = green[(d > r) & (d <= 2 * r)].mean()
        assert inside > ring


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(palm_radius_range_px=(8, 40), width=64, height=64),
        dict(min_spacing_px=10),
        dict(noise_density=1.5),
        dict(n_palms=-1),
    ],
)
def test_spec_invariants(kwargs):
    base = dict(width=128, height=128, n_palms=1, palm_radius_range_px=(8, 12), min_spacing_px=30)
    with pytest.raises(SpecInfeasible):
        GroveSpec(**(base | kwargs))


def test_overcrowded_spec_infeasible():
    with pytest.raises(SpecInfeasible):
        generate_grove(GroveSpec(64, 64, GeoMeta(), 10000, (8, 12), 0, 30, 0.0))


def test_rejection_budget_exhaustion():
    # passes the packing bound but cannot actually be laid out
    with pytest.raises(SpecInfeasible):
        generate_grove(GroveSpec(100, 100, GeoMeta(), 12, (8, 12), 0, 30, 0.0, seed=0))


def test_match_perfect():
    pts = [(10, 10), (50, 50), (90, 20)]
    m = match_detections(report_at(pts), truth_at(pts), 5)
    assert (m.true_positives, m.false_positives, m.false_negatives) == (3, 0, 0)
    assert m.precision == 1.0 and m.recall == 1.0


def test_match_vacuous():
    m = match_detections(report_at([]), truth_at([]), 5)
    assert m.precision == 1.0 and m.recall == 1.0


def test_match_midway_detection():
    det, gt = [(14, 10)], [(10, 10), (20, 10)]
    assert exhaustive_tp(det, gt, 5) == 1
    m = match_detections(report_at(det), truth_at(gt), 5)
    assert (m.true_positives, m.false_negatives, m.false_positives) == (1, 1, 0)


def test_match_ignores_rejected_detections():
    rep = report_at([(10, 10)])
    d = rep.detections[0]
    rejected = Detection(d.component, None, None, 0.5, 0.9, False, "irregular_signature")
    rep = RunReport("t", 0, [rejected], DetectorConfig(), None)
    m = match_detections(rep, truth_at([(10, 10)]), 5)
    assert (m.true_positives, m.false_positives, m.false_negatives) == (0, 0, 1)


@settings(max_examples=60)
@given(
    det=st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=5),
    gt=st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=5),
)
def test_match_counts_consistent(det, gt):
    m = match_detections(report_at(det), truth_at(gt), 5)
    assert m.true_positives + m.false_negatives == len(gt)
    assert m.true_positives + m.false_positives == len(det)
    # greedy never beats the optimum
    assert m.true_positives <= exhaustive_tp(det, gt, 5)


@settings(max_examples=60)
@given(
    gt=st.lists(st.tuples(st.integers(0, 200), st.integers(0, 200)), max_size=5, unique=True),
    jitter=st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=5, max_size=5),
)
def test_match_greedy_optimal_when_separated(gt, jitter):
    # truth at least 2*tol apart: greedy equals the exhaustive optimum
    if any(math.dist(a, b) < 10 for a, b in itertools.combinations(gt, 2)):
        return
    det = [(x + dx, y + dy) for (x, y), (dx, dy) in zip(gt, jitter)]
    m = match_detections(report_at(det), truth_at(gt), 5)
    assert m.true_positives == exhaustive_tp(det, gt, 5) == len(gt)


def test_truth_file_round_trip(tmp_path):
    spec = GroveSpec(128, 128, GeoMeta(), 3, (6, 9), 2, 20, 0.0, seed=9)
    _, truth = generate_grove(spec)
    p = tmp_path / "truth.json"
    write_truth(truth, p, spec)
    assert read_truth(p) == truth
    import json

    data = json.loads(p.read_text())
    assert set(data) == {"palms", "distractors", "spec"}
    assert set(data["palms"][0]) == {"x", "y", "radius_px"}
    assert data["spec"]["seed"] == 9


def test_truth_file_missing_fields(tmp_path):
    p = tmp_path / "t.json"
    p.write_text('{"palms": [{"x": 1}]}')
    with pytest.raises(ValueError):
        read_truth(p)
