from __future__ import annotations

import numpy as np

from ..bvh import build_bvh, ray_hits
from ..core import PointCloud, TriMesh, seeded_rng
from ..errors import DegenerateMesh

DEFAULT_AO_RAYS = 64
DEFAULT_AO_EPSILON = 1e-4


def normalization(mesh: TriMesh) -> tuple[np.ndarray, float]:
    """Center (vertex mean) and radius that :func:`normalize` would use."""
    if mesh.n_vertices == 0:
        raise DegenerateMesh("mesh has no vertices")
    center = mesh.vertices.mean(axis=0)
    radius = float(np.linalg.norm(mesh.vertices - center, axis=1).max())
    if radius <= 1e-12:
        raise DegenerateMesh("all vertices coincide")
    return center, radius


def normalize(mesh: TriMesh) -> TriMesh:
    """Move the vertex centroid to the origin and scale into the unit sphere."""
    center, radius = normalization(mesh)
    return TriMesh((mesh.vertices - center) / radius, mesh.faces, mesh.vertex_colors)


def sample_surface(mesh: TriMesh, n: int, seed: int, label: str = "sample_surface") -> PointCloud:
    """Area-uniform random points on the surface, with face normals."""
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = mesh.face_areas if mesh.n_faces else np.zeros(0)
    total = areas.sum()
    if mesh.n_faces == 0 or total <= 0.0:
        raise DegenerateMesh("mesh has zero surface area")
    rng = seeded_rng(seed, label)
    face = rng.choice(mesh.n_faces, size=n, p=areas / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    tri = mesh.triangles[face]
    pts = (
        (1.0 - r1)[:, None] * tri[:, 0]
        + (r1 * (1.0 - r2))[:, None] * tri[:, 1]
        + (r1 * r2)[:, None] * tri[:, 2]
    )
    return PointCloud(pts, mesh.face_normals[face])


def sphere_directions(n: int) -> np.ndarray:
    """``n`` near-uniform unit vectors on a Fibonacci spiral."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def exterior_faces(mesh: TriMesh, rays_per_face: int = DEFAULT_AO_RAYS,
                   epsilon: float = DEFAULT_AO_EPSILON) -> np.ndarray:
    """Boolean per face: can at least one ray from it reach infinity."""
    if rays_per_face < 16:
        raise ValueError("rays_per_face must be >= 16")
    if mesh.n_faces == 0:
        return np.zeros(0, dtype=bool)
    bvh = build_bvh(mesh.triangles)
    dirs = sphere_directions(rays_per_face)
    cent = mesh.face_centroids
    nrm = mesh.face_normals
    keep = np.zeros(mesh.n_faces, dtype=bool)
    for sign in (1.0, -1.0):
        todo = np.flatnonzero(~keep)
        if len(todo) == 0:
            break
        origins = cent[todo] + sign * epsilon * nrm[todo]
        o = np.repeat(origins, rays_per_face, axis=0)
        d = np.tile(dirs, (len(todo), 1))
        hit = ray_hits(bvh, o, d).reshape(len(todo), rays_per_face)
        keep[todo] |= ~hit.all(axis=1)
    return keep


def remove_internal_surface(mesh: TriMesh, rays_per_face: int = DEFAULT_AO_RAYS,
                            epsilon: float = DEFAULT_AO_EPSILON) -> TriMesh:
    """Drop faces that are fully enclosed (no ray escapes from either side)."""
    return mesh.submesh(exterior_faces(mesh, rays_per_face, epsilon))
