"""Point-cloud and image metrics.

Chamfer distance here is the mean (not squared) nearest-neighbor distance,
averaged over both directions with weight 1/2 each.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .core import PointCloud, RgbaImage, TriMesh
from .errors import DegenerateMesh, DimensionMismatch, EmptyCloud, TooSmall

PSNR_CAP = 99.0
DEFAULT_TAUS = (0.01, 0.02, 0.05)
DEFAULT_SAMPLES = 16384

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0


def _points(cloud) -> np.ndarray:
    p = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3 or len(p) == 0:
        raise EmptyCloud("point cloud is empty")
    return p


def nn_distances(src, dst, tree: cKDTree | None = None) -> np.ndarray:
    """Distance from every point of ``src`` to its nearest neighbor in ``dst``."""
    s, d = _points(src), _points(dst)
    if tree is None:
        tree = cKDTree(d)
    dist, _ = tree.query(s, k=1)
    return dist


def chamfer(p1, p2) -> float:
    d12 = nn_distances(p1, p2)
    d21 = nn_distances(p2, p1)
    return 0.5 * float(d12.mean()) + 0.5 * float(d21.mean())


def fscore(p1, p2, tau: float) -> float:
    """Harmonic mean of precision (p1 near p2) and recall (p2 near p1)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    precision = float(np.mean(nn_distances(p1, p2) <= tau))
    recall = float(np.mean(nn_distances(p2, p1) <= tau))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def cloud_metrics(pred, gt, taus=DEFAULT_TAUS, prefix: str = "") -> dict[str, float]:
    """CD plus one F-score per threshold, sharing the two NN queries."""
    d_pg = nn_distances(pred, gt)
    d_gp = nn_distances(gt, pred)
    out = {f"{prefix}cd": 0.5 * float(d_pg.mean()) + 0.5 * float(d_gp.mean())}
    for tau in taus:
        p = float(np.mean(d_pg <= tau))
        r = float(np.mean(d_gp <= tau))
        out[f"{prefix}fs@{tau:g}"] = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return out


def composite_over_white(img: RgbaImage) -> np.ndarray:
    """Float RGB in [0, 255] with the image alpha-blended onto white."""
    p = img.pixels
    a = p[..., 3:4] * (1.0 / 255.0)
    return p[..., :3] * a + 255.0 * (1.0 - a)


def luma(rgb: np.ndarray) -> np.ndarray:
    """ITU-R BT.601 luma."""
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _check_dims(a: RgbaImage, b: RgbaImage) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(f"{a.pixels.shape} vs {b.pixels.shape}")


def _psnr(x: np.ndarray, y: np.ndarray, cap: float) -> float:
    diff = x - y
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return cap
    return float(min(cap, 10.0 * np.log10(255.0**2 / mse)))


def psnr(a: RgbaImage, b: RgbaImage, cap: float = PSNR_CAP) -> float:
    _check_dims(a, b)
    return _psnr(composite_over_white(a), composite_over_white(b), cap)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _valid_filter(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    r = len(g) // 2
    y = ndimage.correlate1d(x, g, axis=0, mode="constant")
    y = ndimage.correlate1d(y, g, axis=1, mode="constant")
    return y[r:-r, r:-r] if r else y


def ssim(a: RgbaImage, b: RgbaImage) -> float:
    """Single-scale SSIM on luma, averaged over all full 11x11 windows."""
    _check_dims(a, b)
    if min(a.width, a.height) < SSIM_WINDOW:
        raise TooSmall("images must be at least 11 pixels on each side")
    return _ssim(luma(composite_over_white(a)), luma(composite_over_white(b)))


def _ssim(x: np.ndarray, y: np.ndarray) -> float:
    g = gaussian_window()
    mx, my = _valid_filter(x, g), _valid_filter(y, g)
    sxx = _valid_filter(x * x, g) - mx * mx
    syy = _valid_filter(y * y, g) - my * my
    sxy = _valid_filter(x * y, g) - mx * my
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def psnr_ssim(a: RgbaImage, b: RgbaImage, cap: float = PSNR_CAP) -> tuple[float, float]:
    """Both image metrics, compositing each image only once."""
    _check_dims(a, b)
    if min(a.width, a.height) < SSIM_WINDOW:
        raise TooSmall("images must be at least 11 pixels on each side")
    x, y = composite_over_white(a), composite_over_white(b)
    return _psnr(x, y, cap), _ssim(luma(x), luma(y))


def normal_roughness(mesh: TriMesh, k_neighbors: int = 8) -> float:
    """Mean angle (radians) between each face normal and the average normal
    of its ``k_neighbors`` nearest faces (by centroid)."""
    if k_neighbors < 3:
        raise ValueError("k_neighbors must be >= 3")
    if mesh.n_faces == 0:
        raise DegenerateMesh("mesh has no faces")
    ok = mesh.face_areas > 0
    if ok.sum() <= k_neighbors:
        raise DegenerateMesh("not enough non-degenerate faces")
    cent = mesh.face_centroids[ok]
    nrm = mesh.face_normals[ok]
    _, idx = cKDTree(cent).query(cent, k=k_neighbors + 1)
    # column 0 is the query face itself
    avg = nrm[idx[:, 1:]].mean(axis=1)
    cross = np.linalg.norm(np.cross(nrm, avg), axis=1)
    dot = np.einsum("ij,ij->i", nrm, avg)
    return float(np.mean(np.arctan2(cross, dot)))
