"""Local-continuity perturbation: shuffle foreground pixels inside grid cells."""

from __future__ import annotations

import numpy as np

from ..core import RgbaImage, seeded_rng

SHUFFLE_SIZES = (2, 4, 10, 20)


def pixel_shuffle(img: RgbaImage, n: int, seed: int) -> RgbaImage:
    """Permute foreground RGB within each n x n cell anchored at (0, 0).

    Background pixels and alpha are left untouched.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    mask = img.mask
    if not mask.any():
        return img
    ys, xs = np.nonzero(mask)
    w_cells = -(-img.width // n)
    cell = (ys // n) * w_cells + xs // n
    rng = seeded_rng(seed, "perturb/shuffle")
    key = rng.random(len(ys))
    # positions sorted by cell, and the same cells' pixels in random order
    by_pos = np.argsort(cell, kind="stable")
    by_key = np.lexsort((key, cell))
    px = img.pixels.copy()
    src = img.pixels[ys[by_key], xs[by_key], :3]
    px[ys[by_pos], xs[by_pos], :3] = src
    return RgbaImage(px)
