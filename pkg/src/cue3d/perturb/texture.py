"""Procedural replacement textures handed to an external renderer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import RgbaImage, seeded_rng

PERLIN_BASE_CELLS = 4


@dataclass(frozen=True)
class Checkerboard:
    cell: int = 8


@dataclass(frozen=True)
class Perlin:
    octaves: int = 4
    persistence: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class Gray:
    level: int = 128


def _fade(t):
    return t * t * t * (t * (t * 6 - 15) + 10)


def perlin_octave(h: int, w: int, cells: int, rng: np.random.Generator) -> np.ndarray:
    """One octave of 2-D gradient noise with ``cells`` lattice cells across the
    longer side. Values lie in [-sqrt(0.5), sqrt(0.5)]."""
    span = max(h, w)
    ang = rng.uniform(0.0, 2.0 * np.pi, size=(cells + 1, cells + 1))
    gx, gy = np.cos(ang), np.sin(ang)
    u = (np.arange(w) + 0.5) * cells / span
    v = (np.arange(h) + 0.5) * cells / span
    x, y = np.meshgrid(u, v)
    x0, y0 = np.floor(x).astype(int), np.floor(y).astype(int)
    fx, fy = x - x0, y - y0

    def dot(ix, iy, dx, dy):
        return gx[iy, ix] * dx + gy[iy, ix] * dy

    n00 = dot(x0, y0, fx, fy)
    n10 = dot(x0 + 1, y0, fx - 1, fy)
    n01 = dot(x0, y0 + 1, fx, fy - 1)
    n11 = dot(x0 + 1, y0 + 1, fx - 1, fy - 1)
    sx, sy = _fade(fx), _fade(fy)
    top = n00 + sx * (n10 - n00)
    bot = n01 + sx * (n11 - n01)
    return top + sy * (bot - top)


def perlin(h: int, w: int, octaves: int, persistence: float, seed: int) -> np.ndarray:
    """Fractal noise mapped to [0, 255] around 128."""
    if octaves < 1:
        raise ValueError("octaves must be >= 1")
    if not 0.0 < persistence <= 1.0:
        raise ValueError("persistence must be in (0, 1]")
    rng = seeded_rng(seed, "texture/perlin")
    total = np.zeros((h, w))
    amp, norm = 1.0, 0.0
    for k in range(octaves):
        total += amp * perlin_octave(h, w, PERLIN_BASE_CELLS * 2**k, rng)
        norm += amp
        amp *= persistence
    return 128.0 + 127.0 * (total / norm) / np.sqrt(0.5)


def gen_texture(kind, size) -> RgbaImage:
    """Opaque RGBA texture of ``size`` = (w, h)."""
    w, h = size
    if w <= 0 or h <= 0:
        raise ValueError("size must be positive")
    if isinstance(kind, Gray):
        if not 0 <= kind.level <= 255:
            raise ValueError("level must be in [0, 255]")
        val = np.full((h, w), kind.level, dtype=np.float64)
    elif isinstance(kind, Checkerboard):
        if kind.cell < 1:
            raise ValueError("cell must be >= 1")
        yy, xx = np.mgrid[0:h, 0:w]
        val = np.where(((yy // kind.cell) + (xx // kind.cell)) % 2 == 0, 255.0, 0.0)
    elif isinstance(kind, Perlin):
        val = perlin(h, w, kind.octaves, kind.persistence, kind.seed)
    else:
        raise TypeError(f"unknown texture kind {kind!r}")
    g = np.clip(np.round(val), 0, 255).astype(np.uint8)
    px = np.empty((h, w, 4), dtype=np.uint8)
    px[..., :3] = g[..., None]
    px[..., 3] = 255
    return RgbaImage(px)
