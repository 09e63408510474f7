"""Input coercion helpers shared by the public functions and the estimator."""

from __future__ import annotations

import numpy as np

from .raster import GrayRaster, Raster


def check_mask(mask) -> np.ndarray:
    """Return ``mask`` as a 2-D boolean array.

    Accepts bool arrays or integer arrays holding only 0 and 1.
    """
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    if m.dtype == bool:
        return m
    if m.size and not np.isin(m, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    return m.astype(bool)


def check_gray(img) -> GrayRaster:
    if isinstance(img, GrayRaster):
        return img
    return GrayRaster(np.asarray(img))


def check_raster(img) -> Raster:
    if isinstance(img, Raster):
        return img
    return Raster(np.asarray(img))


def check_connectivity(connectivity) -> int:
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity!r}")
    return int(connectivity)
