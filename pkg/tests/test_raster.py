import math
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from palmcount.exceptions import CorruptImage, UnsupportedFormat, WrongChannelCount
from palmcount.raster import (
    GeoMeta,
    Raster,
    equivalent_diameter_m,
    extract_green_band,
    load_image,
    pixels_to_area_m2,
    read_gsd_sidecar,
    save_png,
    to_grayscale,
)


def test_load_constant_rgb_png(tmp_path):
    p = tmp_path / "c.png"
    Image.fromarray(np.full((2, 2, 3), (10, 20, 30), dtype=np.uint8)).save(p)
    img = load_image(p)
    assert (img.width, img.height, img.channels) == (2, 2, 3)
    assert (img.pixels.reshape(-1, 3) == (10, 20, 30)).all()
    assert img.geo is None


def test_load_single_gray_pixel(tmp_path):
    p = tmp_path / "g.png"
    Image.fromarray(np.array([[255]], dtype=np.uint8)).save(p)
    img = load_image(p)
    assert (img.width, img.height, img.channels) == (1, 1, 1)
    assert img.pixels[0, 0, 0] == 255


def test_truncated_png_is_corrupt(tmp_path):
    src = tmp_path / "full.png"
    Image.fromarray(np.arange(64 * 64 * 3, dtype=np.uint32).astype(np.uint8).reshape(64, 64, 3)).save(src)
    data = src.read_bytes()
    bad = tmp_path / "trunc.png"
    bad.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptImage):
        load_image(bad)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.png")


def test_unknown_magic(tmp_path):
    p = tmp_path / "x.jpg"
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(p, format="JPEG")
    with pytest.raises(UnsupportedFormat):
        load_image(p)


def _png_16bit_rgb(w, h):
    raw = b"".join(b"\x00" + b"\x12\x34" * 3 * w for _ in range(h))

    def chunk(kind, body):
        return struct.pack(">I", len(body)) + kind + body + struct.pack(">I", zlib.crc32(kind + body))

    ihdr = struct.pack(">IIBBBBB", w, h, 16, 2, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b"")


def test_16bit_png_rejected(tmp_path):
    p = tmp_path / "deep.png"
    p.write_bytes(_png_16bit_rgb(3, 2))
    with pytest.raises(UnsupportedFormat):
        load_image(p)


def test_16bit_gray_tiff_rejected(tmp_path):
    p = tmp_path / "deep.tif"
    Image.fromarray(np.zeros((3, 3), dtype=np.uint16)).save(p)
    with pytest.raises(UnsupportedFormat):
        load_image(p)


def test_uncompressed_tiff(tmp_path):
    px = np.random.default_rng(1).integers(0, 256, (5, 7, 3), dtype=np.uint8)
    p = tmp_path / "a.tif"
    Image.fromarray(px).save(p, compression="raw")
    assert np.array_equal(load_image(p).pixels, px)


@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3, 4]))))
def test_png_round_trip(tmp_path_factory, px):
    p = tmp_path_factory.mktemp("rt") / "x.png"
    save_png(Raster(px), p)
    assert np.array_equal(load_image(p).pixels, px)


def test_gsd_sidecar(tmp_path):
    img = tmp_path / "a.png"
    assert read_gsd_sidecar(img) is None
    (tmp_path / "a.png.gsd").write_text("0.6\n")
    assert read_gsd_sidecar(img) == GeoMeta(0.6, 0.6)
    (tmp_path / "a.png.gsd").write_text("0.5 0.7")
    assert read_gsd_sidecar(img) == GeoMeta(0.5, 0.7)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_geometa_rejects_bad_gsd(bad):
    with pytest.raises(ValueError):
        GeoMeta(bad, 0.6)


def test_green_band_pixel():
    img = Raster(np.array([[[10, 200, 30]]], dtype=np.uint8))
    assert extract_green_band(img).values[0, 0] == 200


def test_green_band_zero_image():
    img = Raster(np.zeros((4, 5, 3), dtype=np.uint8))
    assert not extract_green_band(img).values.any()


def test_green_band_index_arithmetic():
    px = np.zeros((3, 3, 3), dtype=np.uint8)
    for y in range(3):
        for x in range(3):
            px[y, x, 1] = x + 3 * y
    assert extract_green_band(Raster(px)).values.ravel().tolist() == list(range(9))


def test_green_band_needs_colour():
    with pytest.raises(WrongChannelCount):
        extract_green_band(Raster(np.zeros((2, 2), dtype=np.uint8)))


def test_green_band_copies_geo(geo06):
    img = Raster(np.zeros((2, 2, 4), dtype=np.uint8), geo06)
    assert extract_green_band(img).geo == geo06


@given(arrays(np.uint8, (4, 4, 3)), arrays(np.uint8, (4, 4)), arrays(np.uint8, (4, 4)))
def test_green_band_ignores_red_and_blue(px, r, b):
    other = px.copy()
    other[:, :, 0] = r
    other[:, :, 2] = b
    assert np.array_equal(extract_green_band(Raster(px)).values, extract_green_band(Raster(other)).values)


@pytest.mark.parametrize(
    "rgb, expected",
    [((255, 255, 255), 255), ((255, 0, 0), 76), ((0, 0, 0), 0)],
)
def test_grayscale_values(rgb, expected):
    img = Raster(np.array([[rgb]], dtype=np.uint8))
    assert to_grayscale(img).values[0, 0] == expected


def test_grayscale_single_channel_identity():
    img = Raster(np.array([[42]], dtype=np.uint8))
    assert to_grayscale(img).values[0, 0] == 42


@given(arrays(np.uint8, (3, 3, 3)))
def test_grayscale_bounded_by_channels(px):
    g = to_grayscale(Raster(px)).values
    assert (px.min(axis=2) <= g).all() and (g <= px.max(axis=2)).all()


def test_pixels_to_area():
    geo = GeoMeta(0.6, 0.6)
    assert pixels_to_area_m2(1, geo) == pytest.approx(0.36, abs=1e-15)
    assert pixels_to_area_m2(100, geo) == 36.0
    assert pixels_to_area_m2(0, geo) == 0.0


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.floats(0.01, 10), st.floats(0.01, 10))
def test_pixels_to_area_linear(a, b, gx, gy):
    geo = GeoMeta(gx, gy)
    assert pixels_to_area_m2(a + b, geo) == pytest.approx(
        pixels_to_area_m2(a, geo) + pixels_to_area_m2(b, geo), rel=4e-16, abs=0
    )


def test_equivalent_diameter():
    assert equivalent_diameter_m(math.pi) == pytest.approx(2.0)
    assert equivalent_diameter_m(0.0) == 0.0
    assert equivalent_diameter_m(28.2743) == pytest.approx(6.0, abs=1e-5)
