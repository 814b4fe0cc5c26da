from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cue3d.core import RgbaImage  # noqa: E402


def disc_image(h=128, w=128, r=30, center=None, color=(200, 60, 40)) -> RgbaImage:
    cy, cx = center if center is not None else (h // 2, w // 2)
    yy, xx = np.mgrid[0:h, 0:w]
    m = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    px = np.zeros((h, w, 4), dtype=np.uint8)
    px[m, :3] = color
    px[m, 3] = 255
    return RgbaImage(px)


def random_blob(rng: np.random.Generator, h=96, w=96) -> RgbaImage:
    """Union of a few random ellipses with noisy colors."""
    yy, xx = np.mgrid[0:h, 0:w]
    m = np.zeros((h, w), dtype=bool)
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0.3 * h, 0.7 * h), rng.uniform(0.3 * w, 0.7 * w)
        ry, rx = rng.uniform(5, 0.25 * h), rng.uniform(5, 0.25 * w)
        m |= ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    px = np.zeros((h, w, 4), dtype=np.uint8)
    px[..., :3] = rng.integers(0, 256, size=(h, w, 3))
    px[m, 3] = 255
    return RgbaImage(px)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, shown after the test session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
