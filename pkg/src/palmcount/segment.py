"""Binarization, binary morphology and connected-component labeling.

Masks are plain 2-D ``bool`` arrays indexed ``[y, x]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import EmptyImage
from .validation import check_connectivity, check_gray, check_mask


class StructuringElement(str, Enum):
    SQUARE3 = "square3"
    CROSS3 = "cross3"
    SQUARE5 = "square5"

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        """(dy, dx) pairs of the footprint, centre included."""
        if self is StructuringElement.CROSS3:
            return ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))
        r = 1 if self is StructuringElement.SQUARE3 else 2
        return tuple((dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1))

    @property
    def radius(self) -> int:
        return 2 if self is StructuringElement.SQUARE5 else 1


@dataclass(eq=False)
class LabelMap:
    labels: np.ndarray
    component_count: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def threshold_global(img, t: int) -> np.ndarray:
    """Foreground where the intensity is strictly greater than ``t``."""
    return check_gray(img).values > t


def threshold_otsu(img) -> int:
    """Otsu threshold: split ``{<= t}`` vs ``{> t}`` maximizing between-class variance.

    Comparisons are done in exact integer arithmetic so ties resolve to the
    smallest ``t``. A constant image returns its single value.
    """
    values = check_gray(img).values
    if values.size == 0:
        raise EmptyImage("cannot threshold an empty image")
    hist = np.bincount(values.ravel(), minlength=256).tolist()
    n = sum(hist)
    total = sum(i * c for i, c in enumerate(hist))

    best_t = None
    best_num, best_den = 0, 1
    n0 = s0 = 0
    for t in range(256):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            continue
        s1 = total - s0
        # N^2 * sigma_b^2 == (s0*n1 - s1*n0)^2 / (n0*n1)
        num = (s0 * n1 - s1 * n0) ** 2
        den = n0 * n1
        if best_t is None or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    if best_t is None:
        return int(values.flat[0])
    return best_t


def _shifted_stack(mask: np.ndarray, se: StructuringElement, pad_value: bool):
    r = se.radius
    h, w = mask.shape
    padded = np.pad(mask, r, constant_values=pad_value)
    for dy, dx in se.offsets:
        yield padded[r + dy : r + dy + h, r + dx : r + dx + w]


def erode(mask, se: StructuringElement = StructuringElement.SQUARE3) -> np.ndarray:
    """Out-of-bounds neighbours count as background, so border objects erode."""
    m = check_mask(mask)
    se = StructuringElement(se)
    out = np.ones_like(m)
    for view in _shifted_stack(m, se, False):
        out &= view
    return out


def dilate(mask, se: StructuringElement = StructuringElement.SQUARE3) -> np.ndarray:
    m = check_mask(mask)
    se = StructuringElement(se)
    out = np.zeros_like(m)
    for view in _shifted_stack(m, se, False):
        out |= view
    return out


def close(mask, se: StructuringElement = StructuringElement.SQUARE3) -> np.ndarray:
    return erode(dilate(mask, se), se)


def open_(mask, se: StructuringElement = StructuringElement.SQUARE3) -> np.ndarray:
    return dilate(erode(mask, se), se)


def _runs(mask: np.ndarray):
    """Horizontal foreground runs in raster order as (rows, starts, ends) lists."""
    h, w = mask.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    d = np.diff(padded, axis=1)
    sy, sx = np.nonzero(d == 1)
    _, ex = np.nonzero(d == -1)
    return sy, sx, ex


def label_components(mask, connectivity: int = 8) -> LabelMap:
    """Two-pass union-find labeling over horizontal runs.

    Labels follow the raster-scan order of each component's first pixel.
    """
    m = check_mask(mask)
    gap = 1 if check_connectivity(connectivity) == 8 else 0
    h, w = m.shape
    rows_a, starts_a, ends_a = _runs(m)
    n_runs = len(rows_a)
    if n_runs == 0:
        return LabelMap(np.zeros((h, w), dtype=np.int32), 0)

    rows = rows_a.tolist()
    starts = starts_a.tolist()
    ends = ends_a.tolist()
    row_bounds = np.searchsorted(rows_a, np.arange(h + 1)).tolist()

    parent = list(range(n_runs))
    size = [e - s for s, e in zip(starts, ends)]

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri == rj:
            return
        if size[ri] < size[rj]:
            ri, rj = rj, ri
        parent[rj] = ri
        size[ri] += size[rj]

    for y in range(1, h):
        a, b = row_bounds[y], row_bounds[y + 1]
        c, d = row_bounds[y - 1], row_bounds[y]
        j = c
        for r in range(a, b):
            s, e = starts[r], ends[r]
            while j < d and ends[j] + gap <= s:
                j += 1
            k = j
            while k < d and starts[k] < e + gap:
                union(r, k)
                k += 1

    # second pass: relabel roots in raster order of first run
    label_of_root = {}
    run_label = np.empty(n_runs, dtype=np.int64)
    for r in range(n_runs):
        root = find(r)
        lab = label_of_root.get(root)
        if lab is None:
            lab = len(label_of_root) + 1
            label_of_root[root] = lab
        run_label[r] = lab

    flat_start = rows_a.astype(np.int64) * w + starts_a
    flat_end = rows_a.astype(np.int64) * w + ends_a
    delta = np.zeros(h * w + 1, dtype=np.int64)
    np.add.at(delta, flat_start, run_label)
    np.add.at(delta, flat_end, -run_label)
    labels = np.cumsum(delta[:-1]).reshape(h, w).astype(np.int32)
    return LabelMap(labels, len(label_of_root))


def fill_holes(mask) -> np.ndarray:
    """Set background regions not 4-connected to the border as foreground."""
    m = check_mask(mask)
    lm = label_components(~m, connectivity=4)
    lab = lm.labels
    border = np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]]))
    holes = (lab > 0) & ~np.isin(lab, border)
    return m | holes


def remove_small(mask, min_area: int, connectivity: int = 8) -> np.ndarray:
    """Clear every connected component with fewer than ``min_area`` pixels."""
    if min_area < 0:
        raise ValueError("min_area must be non-negative")
    m = check_mask(mask)
    lm = label_components(m, connectivity)
    counts = np.bincount(lm.labels.ravel(), minlength=lm.component_count + 1)
    keep = counts >= min_area
    keep[0] = False
    return keep[lm.labels]
