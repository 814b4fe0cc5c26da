"""Silhouette perturbations: uniform dilation, Manhattan dilation, occlusion."""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage

from ..core import RgbaImage, seeded_rng
from ..errors import EmptyMask, PlacementFailed

DILATE_RADII = {"weak": 10, "medium": 30, "strong": 60}
MANHATTAN_SEGMENTS = {"weak": 5, "medium": 20, "strong": 40}
OCCLUDE_SCALES = {"weak": 0.1, "medium": 0.4, "strong": 0.8}

OCCLUDE_MIN_LOSS = 0.05
OCCLUDE_MAX_LOSS = 0.90
OCCLUDE_ATTEMPTS = 64


def default_min_loss(scale: float) -> float:
    """5% loss, relaxed for occluders too small to ever remove that much.

    An occluder whose diagonal is ``scale`` times the object's covers at most
    about scale**2 / 2 of the object's bounding box, roughly half of which
    lands on the object when centered on its outline.
    """
    return min(OCCLUDE_MIN_LOSS, scale * scale / 8.0)


def _require_mask(img: RgbaImage) -> np.ndarray:
    mask = img.mask
    if not mask.any():
        raise EmptyMask("image has no foreground")
    return mask


def _grow(img: RgbaImage, new_mask: np.ndarray) -> RgbaImage:
    """Add ``new_mask`` pixels, colored like the nearest original foreground."""
    mask = img.mask
    added = new_mask & ~mask
    if not added.any():
        return img
    _, (iy, ix) = ndimage.distance_transform_edt(~mask, return_indices=True)
    px = img.pixels.copy()
    px[added, :3] = img.pixels[iy[added], ix[added], :3]
    px[added, 3] = 255
    return RgbaImage(px)


def dilate_uniform(img: RgbaImage, radius: int) -> RgbaImage:
    """Dilate the silhouette with a Euclidean disc of ``radius`` pixels."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    mask = _require_mask(img)
    dist = ndimage.distance_transform_edt(~mask)
    return _grow(img, dist <= radius)


def _cell_edges(lo: int, hi: int, n: int, limit: int) -> np.ndarray:
    """Split pixel range [lo, hi] into cells no shorter than ``n``."""
    extent = hi - lo + 1
    if extent >= n:
        q = extent // n
        return lo + np.round(np.linspace(0, extent, q + 1)).astype(int)
    start = lo - (n - extent) // 2
    start = min(max(start, 0), max(limit - n, 0))
    return np.array([start, min(start + n, limit)])


def manhattan_cells(mask: np.ndarray, min_segment: int) -> np.ndarray:
    """Union of grid cells (each side >= ``min_segment``) touching ``mask``.

    The cell grid is laid over the mask's bounding box, so an axis-aligned
    rectangle with sides >= ``min_segment`` maps onto itself.
    """
    ys, xs = np.nonzero(mask)
    h, w = mask.shape
    ey = _cell_edges(ys.min(), ys.max(), min_segment, h)
    ex = _cell_edges(xs.min(), xs.max(), min_segment, w)
    # occupancy of every (row-cell, col-cell) pair
    rows = np.add.reduceat(mask[ey[0] : ey[-1]].astype(np.int64), ey[:-1] - ey[0], axis=0)
    occ = np.add.reduceat(rows[:, ex[0] : ex[-1]], ex[:-1] - ex[0], axis=1) > 0
    out = np.zeros_like(mask)
    for i in range(len(ey) - 1):
        for j in np.flatnonzero(occ[i]):
            out[ey[i] : ey[i + 1], ex[j] : ex[j + 1]] = True
    return out | mask


def dilate_manhattan(img: RgbaImage, min_segment: int) -> RgbaImage:
    """Grow the silhouette until its outline is made only of axis-aligned
    runs of at least ``min_segment`` pixels."""
    if min_segment < 2:
        raise ValueError("min_segment must be >= 2")
    mask = _require_mask(img)
    return _grow(img, manhattan_cells(mask, min_segment))


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with at least one 4-neighbor in the background."""
    inner = ndimage.binary_erosion(mask, structure=ndimage.generate_binary_structure(2, 1), border_value=0)
    return mask & ~inner


def _scaled_occluder(occ_mask: np.ndarray, target_diag: float) -> np.ndarray:
    ys, xs = np.nonzero(occ_mask)
    crop = occ_mask[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]
    h, w = crop.shape
    factor = target_diag / np.hypot(h, w)
    nh, nw = max(1, int(round(h * factor))), max(1, int(round(w * factor)))
    im = Image.fromarray(crop.astype(np.uint8) * 255, mode="L").resize((nw, nh), Image.NEAREST)
    out = np.asarray(im) >= 128
    if not out.any():
        out = np.ones((1, 1), dtype=bool)
    return out


def occluder_footprint(shape, stamp: np.ndarray, center) -> np.ndarray:
    """Place ``stamp`` centered at ``center`` (row, col) on an empty canvas."""
    h, w = shape
    sh, sw = stamp.shape
    top, left = center[0] - sh // 2, center[1] - sw // 2
    canvas = np.zeros((h, w), dtype=bool)
    y0, x0 = max(top, 0), max(left, 0)
    y1, x1 = min(top + sh, h), min(left + sw, w)
    if y0 < y1 and x0 < x1:
        canvas[y0:y1, x0:x1] = stamp[y0 - top : y1 - top, x0 - left : x1 - left]
    return canvas


def occlude(
    img: RgbaImage,
    occluder_mask: RgbaImage,
    scale: float,
    seed: int,
    *,
    min_loss: float | None = None,
    max_loss: float = OCCLUDE_MAX_LOSS,
    attempts: int = OCCLUDE_ATTEMPTS,
) -> RgbaImage:
    """Cut a scaled occluder silhouette out of the object, centered on its outline.

    The occluder's bounding-box diagonal becomes ``scale`` times the object's.
    Silhouette and color under the occluder are both removed. Placements
    whose removed fraction of the object falls outside [min_loss, max_loss]
    are redrawn. By default the lower bound is ``default_min_loss(scale)``.
    """
    if not 0.0 < scale <= 1.0:
        raise ValueError("scale must be in (0, 1]")
    if min_loss is None:
        min_loss = default_min_loss(scale)
    mask = _require_mask(img)
    occ = occluder_mask.mask
    if not occ.any():
        raise EmptyMask("occluder has no foreground")
    ys, xs = np.nonzero(mask)
    diag = np.hypot(ys.max() - ys.min() + 1, xs.max() - xs.min() + 1)
    stamp = _scaled_occluder(occ, scale * diag)
    border = np.argwhere(boundary_pixels(mask))
    area = mask.sum()
    rng = seeded_rng(seed, "perturb/occlude")
    for _ in range(attempts):
        center = border[rng.integers(len(border))]
        foot = occluder_footprint(mask.shape, stamp, center)
        loss = (foot & mask).sum() / area
        if min_loss <= loss <= max_loss:
            px = img.pixels.copy()
            px[foot] = 0
            return RgbaImage(px)
    raise PlacementFailed(f"no placement within [{min_loss}, {max_loss}] after {attempts} attempts")
