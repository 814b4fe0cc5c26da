"""Deterministic 2-D image-cue perturbations."""

from .edges import canny, edge_map, edges_only, soften_edges
from .shuffle import SHUFFLE_SIZES, pixel_shuffle
from .silhouette import (
    DILATE_RADII,
    MANHATTAN_SEGMENTS,
    OCCLUDE_SCALES,
    boundary_pixels,
    default_min_loss,
    dilate_manhattan,
    dilate_uniform,
    manhattan_cells,
    occlude,
)
from .spec import KINDS, PRESETS, PerturbSpec, apply_perturbation, preset
from .texture import Checkerboard, Gray, Perlin, gen_texture

__all__ = [
    "canny", "edge_map", "edges_only", "soften_edges", "SHUFFLE_SIZES", "pixel_shuffle",
    "DILATE_RADII", "MANHATTAN_SEGMENTS", "OCCLUDE_SCALES", "boundary_pixels", "default_min_loss",
    "dilate_manhattan", "dilate_uniform", "manhattan_cells", "occlude",
    "KINDS", "PRESETS", "PerturbSpec", "apply_perturbation", "preset",
    "Checkerboard", "Gray", "Perlin", "gen_texture",
]
