"""Named perturbation variants and a single dispatch entry point."""

from __future__ import annotations

from dataclasses import dataclass

from ..core import RgbaImage
from .edges import SOFTEN_RADIUS, edges_only, soften_edges
from .shuffle import SHUFFLE_SIZES, pixel_shuffle
from .silhouette import (
    DILATE_RADII,
    MANHATTAN_SEGMENTS,
    OCCLUDE_SCALES,
    dilate_manhattan,
    dilate_uniform,
    occlude,
)

KINDS = ("dilate-uniform", "dilate-manhattan", "occlude", "edges-only", "soften-edges", "pixel-shuffle")


@dataclass(frozen=True)
class PerturbSpec:
    kind: str
    strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        s = self.strength
        if self.kind == "dilate-uniform" and s < 1:
            raise ValueError("dilation radius must be >= 1")
        if self.kind == "dilate-manhattan" and s < 2:
            raise ValueError("manhattan segment must be >= 2")
        if self.kind == "occlude" and not 0 < s <= 1:
            raise ValueError("occluder scale must be in (0, 1]")
        if self.kind == "soften-edges" and s < 1:
            raise ValueError("soften radius must be >= 1")
        if self.kind == "pixel-shuffle" and s < 2:
            raise ValueError("shuffle cell must be >= 2")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "strength": self.strength, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbSpec":
        return cls(d["kind"], float(d.get("strength", 0.0)), int(d.get("seed", 0)))


def _presets() -> dict[str, PerturbSpec]:
    out = {}
    for level, r in DILATE_RADII.items():
        out[f"dilate_{level}"] = PerturbSpec("dilate-uniform", r)
    for level, n in MANHATTAN_SEGMENTS.items():
        out[f"manhattan_{level}"] = PerturbSpec("dilate-manhattan", n)
    for level, s in OCCLUDE_SCALES.items():
        out[f"occlude_{level}"] = PerturbSpec("occlude", s)
    out["edges_only"] = PerturbSpec("edges-only")
    out["soften_edges"] = PerturbSpec("soften-edges", SOFTEN_RADIUS)
    for n in SHUFFLE_SIZES:
        out[f"shuffle_{n}"] = PerturbSpec("pixel-shuffle", n)
    return out


PRESETS = _presets()


def preset(name: str, seed: int = 0) -> PerturbSpec:
    try:
        base = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown variant {name!r}; known: {sorted(PRESETS)}") from None
    return PerturbSpec(base.kind, base.strength, seed)


def apply_perturbation(img: RgbaImage, spec: PerturbSpec, occluder: RgbaImage | None = None,
                       **kw) -> RgbaImage:
    """Run ``spec`` on ``img``. Occlusion needs an ``occluder`` image."""
    k, s = spec.kind, spec.strength
    if k == "dilate-uniform":
        return dilate_uniform(img, int(s))
    if k == "dilate-manhattan":
        return dilate_manhattan(img, int(s))
    if k == "occlude":
        if occluder is None:
            raise ValueError("occlusion needs an occluder image")
        return occlude(img, occluder, s, spec.seed, **kw)
    if k == "edges-only":
        return edges_only(img, **kw)
    if k == "soften-edges":
        return soften_edges(img, int(s), **kw)
    return pixel_shuffle(img, int(s), spec.seed)
