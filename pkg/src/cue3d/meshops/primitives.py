"""Procedural meshes: boxes, icospheres, cylinders, plane grids, and
random primitive assemblies used as desk-scale ground truth."""

from __future__ import annotations

import numpy as np

from ..core import TriMesh, concatenate_meshes, seeded_rng

_PHI = (1.0 + 5.0**0.5) / 2.0


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriMesh:
    verts = np.array(
        [
            [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
            [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
            [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return TriMesh(verts * radius, faces)


def _subdivide(verts, faces):
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    mids = 0.5 * (verts[uniq[:, 0]] + verts[uniq[:, 1]])
    new_idx = inverse + len(verts)
    f = len(faces)
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    ab, bc, ca = new_idx[:f], new_idx[f : 2 * f], new_idx[2 * f :]
    out = np.concatenate(
        [np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
         np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)]
    )
    return np.concatenate([verts, mids]), out


def plane_grid(n: int = 10, size: float = 2.0) -> TriMesh:
    """Square in the z=0 plane, ``n`` x ``n`` cells, normals along +z."""
    t = np.linspace(-size / 2, size / 2, n + 1)
    gx, gy = np.meshgrid(t, t, indexing="xy")
    verts = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    faces = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return TriMesh(verts, faces)


def box(subdivisions: int = 1, half_extent=(1.0, 1.0, 1.0)) -> TriMesh:
    """Axis-aligned closed box with each side tessellated into a grid."""
    parts = []
    side = plane_grid(subdivisions, 2.0)
    v0 = side.vertices + np.array([0.0, 0.0, 1.0])
    # rotations taking +z to each of the six outward axes
    frames = [
        np.eye(3),
        np.diag([1.0, -1.0, -1.0]),
        np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]], dtype=float),
        np.array([[0, 0, -1], [0, 1, 0], [1, 0, 0]], dtype=float),
        np.array([[1, 0, 0], [0, 0, 1], [0, -1, 0]], dtype=float),
        np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float),
    ]
    for r in frames:
        parts.append(TriMesh(v0 @ r.T, side.faces))
    cube = _weld(concatenate_meshes(parts))
    return TriMesh(cube.vertices * np.asarray(half_extent, dtype=np.float64), cube.faces)


def cylinder(segments: int = 24, radius: float = 1.0, half_height: float = 1.0) -> TriMesh:
    ang = 2 * np.pi * np.arange(segments) / segments
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    top = np.column_stack([ring, np.full(segments, half_height)])
    bot = np.column_stack([ring, np.full(segments, -half_height)])
    verts = np.concatenate([top, bot, [[0, 0, half_height]], [[0, 0, -half_height]]])
    i = np.arange(segments)
    j = (i + 1) % segments
    tc, bc = 2 * segments, 2 * segments + 1
    side = np.concatenate([np.stack([i, segments + i, segments + j], 1), np.stack([i, segments + j, j], 1)])
    caps = np.concatenate(
        [np.stack([np.full(segments, tc), i, j], 1), np.stack([np.full(segments, bc), segments + j, segments + i], 1)]
    )
    return TriMesh(verts, np.concatenate([side, caps]))


def _weld(mesh: TriMesh, decimals: int = 9) -> TriMesh:
    key = np.round(mesh.vertices, decimals)
    uniq, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    verts = mesh.vertices[first[order]]
    faces = rank[inverse.reshape(-1)][mesh.faces]
    return TriMesh(verts, faces)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (Haar measure via unit quaternion)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


PRIMITIVE_KINDS = ("box", "sphere", "cylinder")


def make_primitive(kind: str) -> TriMesh:
    if kind == "box":
        return box(2)
    if kind == "sphere":
        return icosphere(2)
    if kind == "cylinder":
        return cylinder(24)
    raise ValueError(f"unknown primitive {kind!r}")


def gen_primitive_assembly(n_parts: int, seed: int) -> TriMesh:
    """Concatenate ``n_parts`` random boxes, spheres and cylinders.

    Every part gets an anisotropic scale, a uniform random rotation, a random
    offset and a flat random color. The assembly is shrunk, if needed, so it
    fits inside the unit sphere.
    """
    if n_parts < 1:
        raise ValueError("n_parts must be >= 1")
    rng = seeded_rng(seed, "fixtures/assembly")
    parts = []
    for _ in range(n_parts):
        kind = PRIMITIVE_KINDS[rng.integers(len(PRIMITIVE_KINDS))]
        prim = make_primitive(kind)
        scale = rng.uniform(0.12, 0.4, size=3)
        rot = random_rotation(rng)
        offset = rng.normal(size=3)
        offset *= rng.uniform(0.0, 0.45) / max(np.linalg.norm(offset), 1e-12)
        color = rng.uniform(0.15, 0.95, size=3)
        v = (prim.vertices * scale) @ rot.T + offset
        parts.append(TriMesh(v, prim.faces, np.tile(color, (len(v), 1))))
    mesh = concatenate_meshes(parts)
    reach = np.linalg.norm(mesh.vertices, axis=1).max()
    if reach > 1.0:
        mesh = mesh.transformed(scale=1.0 / reach)
    return mesh
