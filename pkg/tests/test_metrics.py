import numpy as np
import pytest

from cue3d.core import PointCloud, RgbaImage
from cue3d.errors import DimensionMismatch, EmptyCloud, TooSmall
from cue3d.meshops import icosphere, plane_grid
from cue3d.metrics import (
    PSNR_CAP,
    chamfer,
    cloud_metrics,
    composite_over_white,
    fscore,
    luma,
    normal_roughness,
    psnr,
    psnr_ssim,
    ssim,
)
from oracles import brute_chamfer, brute_fscore, direct_ssim


def _pair(rng):
    a = rng.normal(size=(rng.integers(1, 60), 3))
    b = rng.normal(size=(rng.integers(1, 60), 3))
    return a, b


def test_chamfer_matches_oracle(rng):
    for _ in range(20):
        a, b = _pair(rng)
        assert abs(chamfer(a, b) - brute_chamfer(a, b)) < 1e-12


def test_chamfer_accepts_point_clouds_and_rejects_empty(rng):
    a, b = _pair(rng)
    assert chamfer(PointCloud(a), PointCloud(b)) == chamfer(a, b)
    with pytest.raises(EmptyCloud):
        chamfer(np.zeros((0, 3)), a)


def test_fscore_matches_oracle(rng):
    for _ in range(20):
        a, b = _pair(rng)
        for tau in (0.1, 0.5, 1.0):
            assert fscore(a, b, tau) == brute_fscore(a, b, tau)


def test_cloud_metrics_keys(rng):
    a, b = _pair(rng)
    out = cloud_metrics(a, b, (0.01, 0.05), prefix="visible_")
    assert set(out) == {"visible_cd", "visible_fs@0.01", "visible_fs@0.05"}


def _img(rng, h=32, w=32, opaque=False):
    px = rng.integers(0, 256, size=(h, w, 4)).astype(np.uint8)
    if opaque:
        px[..., 3] = 255
    return RgbaImage(px)


def test_composite_over_white():
    px = np.zeros((1, 2, 4), np.uint8)
    px[0, 0] = (0, 0, 0, 0)
    px[0, 1] = (100, 100, 100, 255)
    out = composite_over_white(RgbaImage(px))
    assert np.allclose(out[0, 0], 255) and np.allclose(out[0, 1], 100)


def test_psnr_known_value(rng):
    a = RgbaImage(np.full((16, 16, 4), 255, np.uint8))
    px = a.pixels.copy()
    px[..., :3] = 245
    # mse = 100 in every channel
    assert psnr(a, RgbaImage(px)) == pytest.approx(10 * np.log10(255 ** 2 / 100))
    assert psnr(a, a) == PSNR_CAP


def test_ssim_matches_direct_windows(rng):
    a, b = _img(rng), _img(rng)
    ref = direct_ssim(luma(composite_over_white(a)), luma(composite_over_white(b)))
    assert abs(ssim(a, b) - ref) < 1e-6
    assert ssim(a, a) == pytest.approx(1.0)
    p, s = psnr_ssim(a, b)
    assert p == psnr(a, b) and s == ssim(a, b)


def test_image_metric_validation(rng):
    with pytest.raises(DimensionMismatch):
        psnr(_img(rng, 16, 16), _img(rng, 16, 17))
    with pytest.raises(TooSmall):
        ssim(_img(rng, 8, 8), _img(rng, 8, 8))


def test_normal_roughness():
    assert normal_roughness(plane_grid(10)) == pytest.approx(0.0, abs=1e-12)
    smooth = normal_roughness(icosphere(4))
    coarse = normal_roughness(icosphere(1))
    assert 0 < smooth < coarse
    with pytest.raises(ValueError):
        normal_roughness(icosphere(2), k_neighbors=2)
