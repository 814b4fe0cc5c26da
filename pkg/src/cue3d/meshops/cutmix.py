"""Shape CutMix: recombine whole faces of normalized meshes by region.

Faces are assigned by centroid and never split, so the seams may show
small cracks. Point-sampled metrics do not notice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import TriMesh, seeded_rng
from ..errors import EmptyResult

AXES = {"front-back": 2, "left-right": 0, "top-bottom": 1}
RATIO_RANGE = (0.4, 0.6)
_GRAY = 0.7


@dataclass(frozen=True)
class CutMixSpec:
    """``kind`` is one of ``half``, ``corner-cube`` or ``octant``.

    Unset ``ratio``/``corner_index``/``octant_sources`` are drawn from ``seed``.
    """

    kind: str
    axis: str = "left-right"
    ratio: float | None = None
    corner_index: int | None = None
    octant_sources: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("half", "corner-cube", "octant"):
            raise ValueError(f"unknown CutMix kind {self.kind!r}")
        if self.kind == "half" and self.axis not in AXES:
            raise ValueError(f"axis must be one of {sorted(AXES)}")
        if self.ratio is not None and not RATIO_RANGE[0] <= self.ratio <= RATIO_RANGE[1]:
            raise ValueError("corner-cube ratio must lie in [0.4, 0.6]")
        if self.corner_index is not None and not 0 <= self.corner_index < 8:
            raise ValueError("corner_index must be in 0..7")
        if self.octant_sources is not None and len(self.octant_sources) != 8:
            raise ValueError("octant_sources needs 8 entries")


def octant_index(points: np.ndarray) -> np.ndarray:
    """Bit k set iff coordinate k is strictly positive."""
    p = np.asarray(points)
    return (p[:, 0] > 0).astype(int) + 2 * (p[:, 1] > 0) + 4 * (p[:, 2] > 0)


def corner_cube_bounds(ratio: float, corner_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Box pinned at a corner of [-1, 1]^3 with edge length ``2 * ratio``."""
    edge = 2.0 * ratio
    lo = np.empty(3)
    hi = np.empty(3)
    for k in range(3):
        if (corner_index >> k) & 1:
            lo[k], hi[k] = 1.0 - edge, 1.0
        else:
            lo[k], hi[k] = -1.0, -1.0 + edge
    return lo, hi


def resolve_spec(spec: CutMixSpec, n_sources: int = 2) -> CutMixSpec:
    """Fill every randomized field of ``spec`` deterministically."""
    rng = seeded_rng(spec.seed, f"cutmix/{spec.kind}")
    ratio, corner, sources = spec.ratio, spec.corner_index, spec.octant_sources
    if spec.kind == "corner-cube":
        if ratio is None:
            ratio = float(rng.uniform(*RATIO_RANGE))
        if corner is None:
            corner = int(rng.integers(8))
    if spec.kind == "octant" and sources is None:
        if n_sources == 2:
            # both meshes must contribute; keep redrawing until they do
            while True:
                draw = rng.integers(2, size=8)
                if 0 < draw.sum() < 8:
                    break
            sources = tuple(int(x) for x in draw)
        else:
            sources = tuple(int(x) for x in rng.integers(n_sources, size=8))
    return CutMixSpec(spec.kind, spec.axis, ratio, corner, sources, spec.seed)


def _assemble(pieces: Sequence[tuple[TriMesh, np.ndarray]]) -> TriMesh:
    any_color = any(m.vertex_colors is not None for m, _ in pieces)
    verts, faces, colors = [], [], []
    offset = 0
    for mesh, sel in pieces:
        if not np.any(sel):
            continue
        sub = mesh.submesh(sel)
        verts.append(sub.vertices)
        faces.append(sub.faces + offset)
        if any_color:
            c = sub.vertex_colors
            colors.append(np.full((sub.n_vertices, 3), _GRAY) if c is None else c)
        offset += sub.n_vertices
    return TriMesh(np.concatenate(verts), np.concatenate(faces), np.concatenate(colors) if any_color else None)


def cutmix_sources(meshes: Sequence[TriMesh], spec: CutMixSpec) -> tuple[TriMesh, list[np.ndarray]]:
    """Mix ``meshes`` and also return, per source, the selected-face mask.

    For ``half`` and ``corner-cube`` only the first two meshes are used.
    ``octant_sources[o]`` names the mesh that fills octant ``o``.
    """
    spec = resolve_spec(spec, len(meshes))
    if spec.kind == "half":
        k = AXES[spec.axis]
        a, b = meshes[0], meshes[1]
        masks = [a.face_centroids[:, k] > 0.0, b.face_centroids[:, k] <= 0.0]
    elif spec.kind == "corner-cube":
        lo, hi = corner_cube_bounds(spec.ratio, spec.corner_index)
        a, b = meshes[0], meshes[1]
        inside_a = np.all((a.face_centroids >= lo) & (a.face_centroids <= hi), axis=1)
        inside_b = np.all((b.face_centroids >= lo) & (b.face_centroids <= hi), axis=1)
        masks = [~inside_a, inside_b]
    else:
        sources = np.asarray(spec.octant_sources)
        if sources.max() >= len(meshes):
            raise ValueError("octant source index out of range")
        masks = []
        for i, mesh in enumerate(meshes):
            octs = octant_index(mesh.face_centroids)
            masks.append(np.isin(octs, np.flatnonzero(sources == i)))
        used = set(sources.tolist())
        masks = [m if i in used else np.zeros_like(m) for i, m in enumerate(masks)]
        if any(not np.any(masks[i]) for i in used):
            raise EmptyResult("an octant donor contributes no faces")
        return _assemble(list(zip(meshes, masks))), masks
    if not np.any(masks[0]) or not np.any(masks[1]):
        raise EmptyResult("one side of the cut contributes no faces")
    return _assemble(list(zip(meshes[:2], masks))), masks


def cutmix(mesh_a: TriMesh, mesh_b: TriMesh, spec: CutMixSpec, donors: Sequence[TriMesh] = ()) -> TriMesh:
    """Combine normalized meshes ``mesh_a`` and ``mesh_b`` according to ``spec``.

    ``donors`` extends the source list for octant mixing (indices 2, 3, ...).
    """
    mixed, _ = cutmix_sources([mesh_a, mesh_b, *donors], spec)
    return mixed
