"""Reflection-symmetry detection and symmetric-or-not agreement scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .bvh import build_bvh, closest_points
from .core import TriMesh
from .errors import DegenerateMesh, LengthMismatch
from .meshops import normalize, sample_surface, sphere_directions

DEFAULT_THRESHOLD = 0.02
DEFAULT_SAMPLES = 4096
N_SPREAD = 26
RESCORE_TOP = 4


@dataclass
class SymmetryVerdict:
    symmetric: bool
    normal: np.ndarray
    residual: float
    threshold: float

    def to_dict(self) -> dict:
        return {
            "symmetric": bool(self.symmetric),
            "normal": [float(x) for x in self.normal],
            "offset": 0.0,
            "residual": float(self.residual),
            "threshold": float(self.threshold),
        }


def reflect(points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Mirror points across the plane through the origin with unit ``normal``."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    p = np.asarray(points, dtype=np.float64)
    return p - 2.0 * np.outer(p @ n, n)


def surface_second_moment(mesh: TriMesh) -> np.ndarray:
    """Exact area integral of ``x x^T`` over the surface, about the origin."""
    tri = mesh.triangles
    area = mesh.face_areas
    s = tri.sum(axis=1)
    outer = np.einsum("fij,fik->fjk", tri, tri) + np.einsum("fj,fk->fjk", s, s)
    return np.einsum("f,fjk->jk", area / 12.0, outer)


def candidate_normals(mesh: TriMesh) -> np.ndarray:
    """Principal axes, world axes and ``N_SPREAD`` spread directions."""
    _, vecs = np.linalg.eigh(surface_second_moment(mesh))
    spread = sphere_directions(2 * N_SPREAD)
    spread = spread[spread[:, 2] > 0][:N_SPREAD]
    return np.concatenate([vecs.T, np.eye(3), spread])


def _residual(bvh, samples: np.ndarray, normal: np.ndarray) -> float:
    dist, _, _ = closest_points(bvh, reflect(samples, normal))
    return float(dist.mean())


def detect_symmetry(
    mesh: TriMesh,
    threshold: float = DEFAULT_THRESHOLD,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    refine: bool = False,
) -> SymmetryVerdict:
    """Find the best mirror plane through the centroid of the normalized mesh.

    The residual of a plane is the mean distance from mirrored surface
    samples to the original surface, in unit-sphere units.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    m = normalize(mesh)
    if m.n_faces == 0:
        raise DegenerateMesh("mesh has no faces")
    pts = sample_surface(m, samples, seed, label="symmetry/surface").points
    bvh = build_bvh(m.triangles)
    cands = candidate_normals(m)
    # cheap screen against the samples themselves, exact point-to-surface
    # residual only for the most promising planes
    tree = cKDTree(pts)
    rough = np.array([tree.query(reflect(pts, n))[0].mean() for n in cands])
    top = np.argsort(rough, kind="stable")[:RESCORE_TOP]
    res = np.array([_residual(bvh, pts, cands[i]) for i in top])
    best = int(top[np.argmin(res)])
    normal, residual = cands[best], float(res.min())
    if refine:
        normal, residual = _refine(bvh, pts, normal, residual)
    normal = normal / np.linalg.norm(normal)
    return SymmetryVerdict(bool(residual <= threshold), normal, residual, threshold)


def _refine(bvh, pts, normal, residual, cone_deg: float = 5.0, rounds: int = 2):
    """Coordinate descent on the two tilt angles within a small cone."""
    n0 = normal / np.linalg.norm(normal)
    helper = np.array([1.0, 0.0, 0.0]) if abs(n0[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n0, helper)
    u /= np.linalg.norm(u)
    v = np.cross(n0, u)
    a = b = 0.0
    step = np.radians(cone_deg) / 2.0
    limit = np.radians(cone_deg)
    for _ in range(rounds):
        for axis in (0, 1):
            for sgn in (1.0, -1.0):
                ta, tb = (a + sgn * step, b) if axis == 0 else (a, b + sgn * step)
                if np.hypot(ta, tb) > limit:
                    continue
                cand = n0 + np.tan(ta) * u + np.tan(tb) * v
                cand /= np.linalg.norm(cand)
                r = _residual(bvh, pts, cand)
                if r < residual:
                    residual, normal, a, b = r, cand, ta, tb
        step /= 2.0
    return normal, residual


def confusion(pred, gt) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) with "symmetric" as the positive class."""
    p = np.asarray(pred, dtype=bool)
    g = np.asarray(gt, dtype=bool)
    if p.shape != g.shape or p.ndim != 1:
        raise LengthMismatch("verdict arrays must be 1-D and equally long")
    if len(p) == 0:
        raise LengthMismatch("verdict arrays are empty")
    return (int(np.sum(p & g)), int(np.sum(p & ~g)), int(np.sum(~p & g)), int(np.sum(~p & ~g)))


def symmetry_f1(pred_verdicts, gt_verdicts) -> float:
    """Binary F1; all-negative agreement on both sides counts as 1.0."""
    tp, fp, fn, _ = confusion(pred_verdicts, gt_verdicts)
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def hallucinated_symmetries(pred_verdicts, gt_verdicts) -> int:
    """Objects predicted symmetric whose ground truth is not."""
    return confusion(pred_verdicts, gt_verdicts)[1]
