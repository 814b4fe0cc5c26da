import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import disc_image, random_blob
from contracts import (
    dilate_uniform_violations,
    manhattan_violations,
    occlude_violations,
    shuffle_violations,
    soften_violations,
)
from cue3d.core import RgbaImage
from cue3d.errors import EmptyMask, PlacementFailed
from cue3d.perturb import (
    PRESETS,
    Checkerboard,
    Gray,
    Perlin,
    PerturbSpec,
    apply_perturbation,
    canny,
    default_min_loss,
    dilate_manhattan,
    dilate_uniform,
    edge_map,
    edges_only,
    gen_texture,
    manhattan_cells,
    occlude,
    pixel_shuffle,
    preset,
    soften_edges,
)
from oracles import boundary_runs, reference_canny

SETTINGS = settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@SETTINGS
@given(seed=st.integers(0, 10**6), radius=st.integers(1, 20))
def test_dilate_uniform_contract(seed, radius):
    img = random_blob(np.random.default_rng(seed), 96, 96)
    assert dilate_uniform_violations(img, dilate_uniform(img, radius), radius) == []


@SETTINGS
@given(seed=st.integers(0, 10**6), n=st.sampled_from([3, 5, 8, 20]))
def test_manhattan_contract(seed, n):
    img = random_blob(np.random.default_rng(seed), 96, 96)
    assert manhattan_violations(img, dilate_manhattan(img, n), n) == []


def test_manhattan_keeps_big_rectangle():
    mask = np.zeros((64, 64), bool)
    mask[10:40, 5:50] = True
    assert np.array_equal(manhattan_cells(mask, 10), mask)


def test_boundary_runs_oracle_on_square():
    mask = np.zeros((8, 8), bool)
    mask[2:5, 1:7] = True
    assert sorted(boundary_runs(mask)) == [3, 3, 6, 6]


@SETTINGS
@given(seed=st.integers(0, 10**6), n=st.sampled_from([2, 4, 10, 20]))
def test_shuffle_contract(seed, n):
    img = random_blob(np.random.default_rng(seed), 80, 72)
    out = pixel_shuffle(img, n, seed)
    assert shuffle_violations(img, out, n) == []
    assert out == pixel_shuffle(img, n, seed)


def test_shuffle_changes_pixels(rng):
    img = random_blob(rng, 64, 64)
    assert pixel_shuffle(img, 4, 0) != img
    assert pixel_shuffle(img, 4, 0) != pixel_shuffle(img, 4, 1)


@SETTINGS
@given(seed=st.integers(0, 10**6))
def test_soften_locality(seed):
    img = random_blob(np.random.default_rng(seed), 96, 96)
    out = soften_edges(img, 5)
    assert soften_violations(img, out, edge_map(img), 5) == []
    assert np.array_equal(out.alpha, img.alpha)


def test_occlude_loss_bounds(rng):
    occ = disc_image(128, 128, 40)
    for i in range(10):
        img = random_blob(rng, 160, 160)
        for scale in (0.4, 0.8):
            out = occlude(img, occ, scale, i)
            assert occlude_violations(img, out) == []
        out = occlude(img, occ, 0.1, i)
        assert occlude_violations(img, out, lo=default_min_loss(0.1)) == []


def test_occlude_failure_and_validation():
    img = disc_image(128, 128, 50)
    occ = disc_image(64, 64, 20)
    with pytest.raises(PlacementFailed):
        occlude(img, occ, 0.1, 0, min_loss=0.5)
    with pytest.raises(ValueError):
        occlude(img, occ, 1.5, 0)
    with pytest.raises(EmptyMask):
        occlude(RgbaImage(np.zeros((8, 8, 4))), occ, 0.5, 0)


def _synthetic(kind, rng):
    y, x = np.mgrid[0:64, 0:64].astype(float)
    if kind == "step":
        return np.where(x + rng.integers(-20, 20) * (y / 64) > 32, 220.0, 20.0)
    if kind == "ramp":
        return np.clip((x - 20) * rng.uniform(4, 20), 0, 255)
    cy, cx, r = rng.uniform(20, 44, 2).tolist() + [rng.uniform(8, 18)]
    return np.where((y - cy) ** 2 + (x - cx) ** 2 <= r * r, 200.0, 40.0)


@pytest.mark.parametrize("kind", ["step", "ramp", "circle"])
def test_canny_matches_reference(kind, rng):
    for _ in range(2):
        g = _synthetic(kind, rng)
        assert np.array_equal(canny(g, 60, 160), reference_canny(g, 60, 160))


def test_canny_step_is_thin():
    g = np.zeros((32, 32))
    g[:, 16:] = 200
    e = canny(g, 60, 160)
    assert e.any()
    assert np.all(e.sum(axis=1)[2:-2] == 1)
    with pytest.raises(ValueError):
        canny(g, 100, 50)


def test_edges_only_is_binary_inside_mask(rng):
    img = random_blob(rng, 64, 64)
    out = edges_only(img)
    vals = np.unique(out.rgb[img.mask])
    assert set(vals.tolist()) <= {0, 255}
    assert np.array_equal(out.pixels[~img.mask], img.pixels[~img.mask])


def test_textures():
    cb = gen_texture(Checkerboard(8), (32, 16)).pixels
    assert cb.shape == (16, 32, 4) and np.all(cb[..., 3] == 255)
    assert cb[0, 0, 0] != cb[0, 8, 0] and cb[0, 0, 0] == cb[8, 8, 0]
    assert np.all(gen_texture(Gray(100), (8, 8)).pixels[..., :3] == 100)
    p = gen_texture(Perlin(4, 0.5, 7), (128, 128)).pixels[..., 0].astype(int)
    assert np.array_equal(p, gen_texture(Perlin(4, 0.5, 7), (128, 128)).pixels[..., 0])
    assert 0 < p.min() and p.max() < 255
    # smooth: neighbouring pixels differ little
    assert np.abs(np.diff(p, axis=1)).max() < 20


def test_spec_and_presets():
    assert preset("dilate_strong").strength == 60
    assert preset("manhattan_weak").strength == 5
    assert preset("occlude_medium").strength == 0.4
    assert {f"shuffle_{n}" for n in (2, 4, 10, 20)} <= set(PRESETS)
    s = preset("shuffle_4", seed=9)
    assert PerturbSpec.from_dict(s.to_dict()) == s
    with pytest.raises(KeyError):
        preset("nope")
    with pytest.raises(ValueError):
        PerturbSpec("pixel-shuffle", 1)
    with pytest.raises(ValueError):
        PerturbSpec("blur", 1)


def test_apply_dispatch(rng):
    img = random_blob(rng, 64, 64)
    assert apply_perturbation(img, preset("dilate_weak")) == dilate_uniform(img, 10)
    assert apply_perturbation(img, preset("shuffle_2", 3)) == pixel_shuffle(img, 2, 3)
    with pytest.raises(ValueError):
        apply_perturbation(img, preset("occlude_weak"))
