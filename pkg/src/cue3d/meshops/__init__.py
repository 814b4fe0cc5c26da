"""Mesh normalization, sampling, internal-surface removal, CutMix and fixtures."""

from .cutmix import CutMixSpec, corner_cube_bounds, cutmix, cutmix_sources, octant_index, resolve_spec
from .ops import (
    exterior_faces,
    normalization,
    normalize,
    remove_internal_surface,
    sample_surface,
    sphere_directions,
)
from .primitives import (
    box,
    cylinder,
    gen_primitive_assembly,
    icosphere,
    plane_grid,
    random_rotation,
)

__all__ = [
    "CutMixSpec",
    "box",
    "corner_cube_bounds",
    "cutmix",
    "cutmix_sources",
    "cylinder",
    "exterior_faces",
    "gen_primitive_assembly",
    "icosphere",
    "normalization",
    "normalize",
    "octant_index",
    "plane_grid",
    "random_rotation",
    "remove_internal_surface",
    "resolve_spec",
    "sample_surface",
    "sphere_directions",
]
