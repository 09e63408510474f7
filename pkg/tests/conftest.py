import numpy as np
import pytest

from palmcount.raster import GeoMeta, Raster


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def geo06():
    return GeoMeta(0.6, 0.6)


@pytest.fixture
def black_rgb(geo06):
    return Raster(np.zeros((64, 64, 3), dtype=np.uint8), geo06)


# acceptance criteria outcomes, printed once at the end of the run
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
