"""Rigid pose alignment: exhaustive rotation grid followed by ICP.

The grid has 24 azimuth x 24 elevation x 12 roll samples. Scoring every
grid rotation with exact nearest neighbors is too slow on a single core, so
each cloud's unsigned distance function is tabulated once on a voxel lattice
and all 6912 rotations are screened with trilinear lookups. The best
``rescore_top`` candidates are then re-ranked with exact Chamfer distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud, TriMesh, seeded_rng
from .errors import EmptyCloud
from .meshops import normalize, sample_surface
from .metrics import DEFAULT_SAMPLES

log = logging.getLogger(__name__)

N_AZIMUTH = 24
N_ELEVATION = 24
N_ROLL = 12
GRID_SUBSAMPLE = 2048
SCREEN_POINTS = 512
FIELD_RESOLUTION = 32
FIELD_BOUND = 1.05
RESCORE_TOP = 16
TIE_TOL = 1e-9

ICP_MAX_ITER = 50
ICP_REL_TOL = 1e-6
ICP_REJECT_FACTOR = 3.0


@dataclass
class AlignResult:
    rotation: np.ndarray
    translation: np.ndarray
    final_cd: float
    grid_cd: float
    icp_iterations: int = 0
    cd_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        check_rotation(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "final_cd": self.final_cd,
            "grid_cd": self.grid_cd,
            "icp_iterations": self.icp_iterations,
            "cd_history": list(self.cd_history),
        }


def check_rotation(r: np.ndarray, tol: float = 1e-6) -> None:
    if np.abs(r.T @ r - np.eye(3)).max() > tol or abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("matrix is not a proper rotation")


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle (radians) of a rotation matrix from the identity."""
    c = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.arccos(c))


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def grid_rotations(n_az: int = N_AZIMUTH, n_el: int = N_ELEVATION, n_roll: int = N_ROLL) -> np.ndarray:
    """All ``Ry(azimuth) @ Rx(elevation) @ Rz(roll)`` combinations.

    Azimuth and roll cover [0, 2pi), elevation covers [-pi/2, pi/2); the
    half-open elevation range keeps the identity on the grid.
    """
    az = 2 * np.pi * np.arange(n_az) / n_az
    el = -np.pi / 2 + np.pi * np.arange(n_el) / n_el
    roll = 2 * np.pi * np.arange(n_roll) / n_roll
    out = np.empty((n_az * n_el * n_roll, 3, 3))
    i = 0
    for a in az:
        ra = _ry(a)
        for e in el:
            rae = ra @ _rx(e)
            for r in roll:
                out[i] = rae @ _rz(r)
                i += 1
    return out


class DistanceField:
    """Unsigned distance to a point set, tabulated on a cubic lattice."""

    def __init__(self, points: np.ndarray, resolution: int = FIELD_RESOLUTION, bound: float = FIELD_BOUND):
        self.resolution = resolution
        self.bound = bound
        axis = np.linspace(-bound, bound, resolution)
        g = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        dist, _ = cKDTree(points).query(g)
        self.values = dist.reshape(resolution, resolution, resolution)


@nb.njit(cache=True)
def _screen(rotations, src_a, field_b, src_b, field_a, bound, res):
    n_rot = rotations.shape[0]
    out = np.empty(n_rot)
    scale = (res - 1) / (2.0 * bound)
    for r in range(n_rot):
        rot = rotations[r]
        acc_a = 0.0
        for i in range(src_a.shape[0]):
            x = rot[0, 0] * src_a[i, 0] + rot[0, 1] * src_a[i, 1] + rot[0, 2] * src_a[i, 2]
            y = rot[1, 0] * src_a[i, 0] + rot[1, 1] * src_a[i, 1] + rot[1, 2] * src_a[i, 2]
            z = rot[2, 0] * src_a[i, 0] + rot[2, 1] * src_a[i, 1] + rot[2, 2] * src_a[i, 2]
            acc_a += _trilinear(field_b, x, y, z, bound, scale, res)
        acc_b = 0.0
        for i in range(src_b.shape[0]):
            # inverse rotation = transpose
            x = rot[0, 0] * src_b[i, 0] + rot[1, 0] * src_b[i, 1] + rot[2, 0] * src_b[i, 2]
            y = rot[0, 1] * src_b[i, 0] + rot[1, 1] * src_b[i, 1] + rot[2, 1] * src_b[i, 2]
            z = rot[0, 2] * src_b[i, 0] + rot[1, 2] * src_b[i, 1] + rot[2, 2] * src_b[i, 2]
            acc_b += _trilinear(field_a, x, y, z, bound, scale, res)
        out[r] = 0.5 * acc_a / src_a.shape[0] + 0.5 * acc_b / src_b.shape[0]
    return out


@nb.njit(cache=True)
def _trilinear(f, x, y, z, bound, scale, res):
    gx = min(max((x + bound) * scale, 0.0), res - 1.000001)
    gy = min(max((y + bound) * scale, 0.0), res - 1.000001)
    gz = min(max((z + bound) * scale, 0.0), res - 1.000001)
    i, j, k = int(gx), int(gy), int(gz)
    u, v, w = gx - i, gy - j, gz - k
    c00 = f[i, j, k] * (1 - u) + f[i + 1, j, k] * u
    c10 = f[i, j + 1, k] * (1 - u) + f[i + 1, j + 1, k] * u
    c01 = f[i, j, k + 1] * (1 - u) + f[i + 1, j, k + 1] * u
    c11 = f[i, j + 1, k + 1] * (1 - u) + f[i + 1, j + 1, k + 1] * u
    return (c00 * (1 - v) + c10 * v) * (1 - w) + (c01 * (1 - v) + c11 * v) * w


def _chamfer_with_trees(a_pts, b_pts, a_tree, b_tree, rotation, translation=None):
    """Chamfer(R a + t, b) using trees built on the untransformed clouds."""
    t = np.zeros(3) if translation is None else translation
    moved = a_pts @ rotation.T + t
    d_ab, _ = b_tree.query(moved)
    back = (b_pts - t) @ rotation
    d_ba, _ = a_tree.query(back)
    return 0.5 * float(d_ab.mean()) + 0.5 * float(d_ba.mean())


def _nonempty(cloud: PointCloud) -> np.ndarray:
    if len(cloud) == 0:
        raise EmptyCloud("point cloud is empty")
    return cloud.points


def grid_search(
    pred: PointCloud,
    gt: PointCloud,
    *,
    subsample: int = GRID_SUBSAMPLE,
    rescore_top: int = RESCORE_TOP,
    seed: int = 0,
    rotations: np.ndarray | None = None,
) -> AlignResult:
    """Best grid rotation of ``pred`` onto ``gt`` (zero translation).

    ``grid_cd`` is the exact Chamfer distance of the full clouds at the
    chosen rotation.
    """
    p_full, g_full = _nonempty(pred), _nonempty(gt)
    rots = grid_rotations() if rotations is None else rotations
    p = pred.subsample(subsample, seeded_rng(seed, "align/grid/pred")).points
    g = gt.subsample(subsample, seeded_rng(seed, "align/grid/gt")).points
    bound = max(FIELD_BOUND, 1.01 * max(np.abs(p).max(), np.abs(g).max()))
    f_pred = DistanceField(p, bound=bound)
    f_gt = DistanceField(g, bound=bound)
    # the coarse screen only has to rank the true basin into the top few
    ps, gs = p[:SCREEN_POINTS], g[:SCREEN_POINTS]
    scores = _screen(np.ascontiguousarray(rots), ps, f_gt.values, gs, f_pred.values, bound, f_gt.resolution)

    top = np.argsort(scores, kind="stable")[: min(rescore_top, len(rots))]
    p_tree, g_tree = cKDTree(p), cKDTree(g)
    exact = np.array([_chamfer_with_trees(p, g, p_tree, g_tree, rots[i]) for i in top])
    best = exact.min()
    tied = top[exact <= best + TIE_TOL]
    choice = min(tied, key=lambda i: (rotation_angle(rots[i]), i))
    r = rots[choice]
    grid_cd = _chamfer_with_trees(p_full, g_full, cKDTree(p_full), cKDTree(g_full), r)
    return AlignResult(r, np.zeros(3), final_cd=grid_cd, grid_cd=grid_cd, cd_history=[grid_cd])


def kabsch(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation and translation taking ``src`` onto ``dst``."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return r, cd - r @ cs


def icp_refine(
    pred: PointCloud,
    gt: PointCloud,
    init: AlignResult,
    *,
    max_iter: int = ICP_MAX_ITER,
    rel_tol: float = ICP_REL_TOL,
    reject_factor: float = ICP_REJECT_FACTOR,
) -> AlignResult:
    """Point-to-point ICP from ``init``.

    A step is accepted only if it does not increase the Chamfer distance,
    so ``cd_history`` is non-increasing and ``final_cd <= grid_cd``.
    """
    p, g = _nonempty(pred), _nonempty(gt)
    p_tree, g_tree = cKDTree(p), cKDTree(g)
    rot, trans = init.rotation.copy(), init.translation.copy()

    cur = p @ rot.T + trans
    d_pg, idx = g_tree.query(cur)
    d_gp, _ = p_tree.query((g - trans) @ rot)
    cd = 0.5 * d_pg.mean() + 0.5 * d_gp.mean()
    history = [float(cd)]
    iterations = 0
    for _ in range(max_iter):
        keep = d_pg <= reject_factor * np.median(d_pg)
        if keep.sum() < 3:
            break
        dr, dt = kabsch(cur[keep], g[idx[keep]])
        new_rot = dr @ rot
        # re-orthonormalize to stop drift over many compositions
        u, _, vt = np.linalg.svd(new_rot)
        new_rot = u @ vt
        new_trans = dr @ trans + dt
        new_cur = p @ new_rot.T + new_trans
        new_d_pg, new_idx = g_tree.query(new_cur)
        new_d_gp, _ = p_tree.query((g - new_trans) @ new_rot)
        new_cd = 0.5 * new_d_pg.mean() + 0.5 * new_d_gp.mean()
        if new_cd > cd:
            break
        improvement = cd - new_cd
        rot, trans, cur = new_rot, new_trans, new_cur
        d_pg, idx = new_d_pg, new_idx
        prev, cd = cd, new_cd
        history.append(float(cd))
        iterations += 1
        if improvement <= rel_tol * prev:
            break
    return AlignResult(rot, trans, final_cd=float(cd), grid_cd=init.grid_cd,
                       icp_iterations=iterations, cd_history=history)


def align(
    pred_mesh: TriMesh,
    gt_mesh: TriMesh,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> tuple[AlignResult, TriMesh]:
    """Normalize both meshes, then grid search + ICP on surface samples.

    Returns the transform (acting on the normalized prediction) and the
    normalized prediction moved into the normalized ground-truth frame.
    """
    pred_n = normalize(pred_mesh)
    gt_n = normalize(gt_mesh)
    # same label on both sides: identical meshes give identical samples
    pred_pc = sample_surface(pred_n, samples, seed, label="align/surface")
    gt_pc = sample_surface(gt_n, samples, seed, label="align/surface")
    coarse = grid_search(pred_pc, gt_pc, seed=seed)
    result = icp_refine(pred_pc, gt_pc, coarse)
    log.debug("align: grid_cd=%.6g final_cd=%.6g iters=%d", result.grid_cd, result.final_cd, result.icp_iterations)
    return result, pred_n.transformed(result.rotation, result.translation)
