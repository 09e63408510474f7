"""Brute-force reference implementations shared by the test modules."""

import math
from collections import deque
from fractions import Fraction

import numpy as np


def bfs_partition(mask, connectivity):
    """Reference flood-fill labeling: list of frozensets of (y, x)."""
    h, w = mask.shape
    if connectivity == 4:
        nbrs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        nbrs = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            comp = set()
            q = deque([(y, x)])
            seen[y, x] = True
            while q:
                cy, cx = q.popleft()
                comp.add((cy, cx))
                for dy, dx in nbrs:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        q.append((ny, nx))
            comps.append(frozenset(comp))
    return comps


def disk_mask(h, w, cx, cy, r):
    ys, xs = np.mgrid[:h, :w]
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r


def otsu_oracle(values):
    """Argmax of between-class variance from its textbook definition, exact."""
    v = [int(x) for x in np.asarray(values).ravel()]
    n = len(v)
    best_t, best = None, Fraction(-1)
    for t in range(256):
        lo = [x for x in v if x <= t]
        hi = [x for x in v if x > t]
        if not lo or not hi:
            var = Fraction(0)
        else:
            w0, w1 = Fraction(len(lo), n), Fraction(len(hi), n)
            m0, m1 = Fraction(sum(lo), len(lo)), Fraction(sum(hi), len(hi))
            var = w0 * w1 * (m0 - m1) ** 2
        if var > best:
            best_t, best = t, var
    if best == 0:
        return v[0]
    return best_t


def erode_oracle(mask, se):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            out[y, x] = all(
                0 <= y + dy < h and 0 <= x + dx < w and mask[y + dy, x + dx] for dy, dx in se.offsets
            )
    return out


def dilate_oracle(mask, se):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            out[y, x] = any(
                0 <= y + dy < h and 0 <= x + dx < w and mask[y + dy, x + dx] for dy, dx in se.offsets
            )
    return out


def dilate_complement_oob_foreground(m, se):
    """Dilation of the complement where out-of-bounds counts as foreground."""
    h, w = m.shape
    c = ~m
    out = np.zeros_like(m)
    for y in range(h):
        for x in range(w):
            out[y, x] = any(
                not (0 <= y + dy < h and 0 <= x + dx < w) or c[y + dy, x + dx] for dy, dx in se.offsets
            )
    return out


def ray_box_distance(half, theta):
    """Continuous distance from the centre of a square of half-width ``half`` to its edge."""
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    return half / max(c, s)
