"""Canny edge maps and the two edge perturbations.

Conventions (all fixed so that edge maps are reproducible bit for bit):
Gaussian pre-smoothing with a kernel of radius ceil(3*sigma) and edge
replication; 3x3 Sobel gradients with edge replication; smoothed values and
gradient magnitudes rounded to 1e-6; non-maximum suppression over four
direction bins keeps a pixel when it is strictly above the neighbor behind it
and at least the neighbor ahead; the one-pixel image frame is never an edge;
hysteresis uses 8-connectivity.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..core import RgbaImage
from ..errors import EmptyMask
from ..metrics import luma

CANNY_SIGMA = 1.4
CANNY_LOW = 60.0
CANNY_HIGH = 160.0
SOFTEN_RADIUS = 5
SOFTEN_SIGMA = 3.0

_ROUND = 6
# (dy, dx) of the neighbor "ahead" along the gradient for each direction bin
_BIN_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def direction_bin(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """0: horizontal gradient, 1: down-right, 2: vertical, 3: down-left."""
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    b = np.zeros(ang.shape, dtype=np.int8)
    b[(ang >= 22.5) & (ang < 67.5)] = 1
    b[(ang >= 67.5) & (ang < 112.5)] = 2
    b[(ang >= 112.5) & (ang < 157.5)] = 3
    return b


def canny(gray: np.ndarray, low: float = CANNY_LOW, high: float = CANNY_HIGH,
          sigma: float = CANNY_SIGMA) -> np.ndarray:
    """Boolean edge map of a float grayscale image in [0, 255]."""
    if not 0 <= low < high:
        raise ValueError("need 0 <= low < high")
    g = np.asarray(gray, dtype=np.float64)
    k = gaussian_kernel1d(sigma)
    s = ndimage.correlate1d(g, k, axis=0, mode="nearest")
    s = ndimage.correlate1d(s, k, axis=1, mode="nearest")
    s = np.round(s, _ROUND)
    gx = ndimage.sobel(s, axis=1, mode="nearest")
    gy = ndimage.sobel(s, axis=0, mode="nearest")
    mag = np.round(np.hypot(gx, gy), _ROUND)
    mag[0, :] = mag[-1, :] = 0.0
    mag[:, 0] = mag[:, -1] = 0.0

    bins = direction_bin(gx, gy)
    padded = np.pad(mag, 1)
    h, w = mag.shape
    keep = np.zeros_like(mag, dtype=bool)
    for b, (dy, dx) in enumerate(_BIN_OFFSETS):
        ahead = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        behind = padded[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        keep |= (bins == b) & (mag > behind) & (mag >= ahead)
    nms = np.where(keep, mag, 0.0)

    weak = nms >= low
    strong = nms >= high
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros_like(weak)
    good = np.zeros(n + 1, dtype=bool)
    good[np.unique(labels[strong])] = True
    good[0] = False
    return good[labels]


def edge_map(img: RgbaImage, low: float = CANNY_LOW, high: float = CANNY_HIGH,
             sigma: float = CANNY_SIGMA) -> np.ndarray:
    return canny(luma(img.rgb.astype(np.float64)), low, high, sigma)


def edges_only(img: RgbaImage, low: float = CANNY_LOW, high: float = CANNY_HIGH) -> RgbaImage:
    """Replace the object interior by its edge map (white on black)."""
    mask = img.mask
    if not mask.any():
        raise EmptyMask("image has no foreground")
    edges = edge_map(img, low, high)
    px = img.pixels.copy()
    px[..., :3] = np.where(mask[..., None], np.where(edges, 255, 0)[..., None], px[..., :3])
    return RgbaImage(px)


def soften_edges(img: RgbaImage, edge_radius: int = SOFTEN_RADIUS, sigma: float = SOFTEN_SIGMA,
                 low: float = CANNY_LOW, high: float = CANNY_HIGH) -> RgbaImage:
    """Blur the foreground only within ``edge_radius`` of detected edges."""
    if edge_radius < 1:
        raise ValueError("edge_radius must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    mask = img.mask
    if not mask.any():
        raise EmptyMask("image has no foreground")
    edges = edge_map(img, low, high)
    if not edges.any():
        return img
    # disc dilation of the edge map
    band = ndimage.distance_transform_edt(~edges) <= edge_radius
    band &= mask
    m = mask.astype(np.float64)
    rgb = img.rgb.astype(np.float64)
    num = np.stack([ndimage.gaussian_filter(rgb[..., c] * m, sigma, mode="constant") for c in range(3)], axis=-1)
    den = ndimage.gaussian_filter(m, sigma, mode="constant")[..., None]
    blurred = np.clip(np.round(num / np.maximum(den, 1e-12)), 0, 255).astype(np.uint8)
    px = img.pixels.copy()
    px[..., :3] = np.where(band[..., None], blurred, px[..., :3])
    return RgbaImage(px)
