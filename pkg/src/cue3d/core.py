"""Shared domain types, seeded randomness and manifest/record serialization."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from PIL import Image

from .errors import DegenerateMesh, ManifestInvalid, ParseError

# Pixels with alpha >= this value belong to the silhouette.
ALPHA_THRESHOLD = 128

DEFAULT_RESOLUTION = (512, 512)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def seeded_rng(seed: int, stream_label: str) -> np.random.Generator:
    """Return a generator that depends only on ``(seed, stream_label)``.

    The label is hashed into the seed sequence entropy, so streams for
    different labels are statistically independent.
    """
    digest = hashlib.sha256(stream_label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *words])
    return np.random.Generator(np.random.PCG64(seq))


# --------------------------------------------------------------------------
# Images
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RgbaImage:
    """8-bit RGBA raster. ``pixels`` has shape (height, width, 4)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.uint8, copy=True)
        if px.ndim != 3 or px.shape[2] != 4 or px.shape[0] == 0 or px.shape[1] == 0:
            raise ValueError(f"expected non-empty (H, W, 4) array, got {px.shape}")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def rgb(self) -> np.ndarray:
        return self.pixels[..., :3]

    @property
    def alpha(self) -> np.ndarray:
        return self.pixels[..., 3]

    @property
    def mask(self) -> np.ndarray:
        return self.pixels[..., 3] >= ALPHA_THRESHOLD

    @classmethod
    def from_rgb_mask(cls, rgb: np.ndarray, mask: np.ndarray) -> "RgbaImage":
        h, w = mask.shape
        px = np.zeros((h, w, 4), dtype=np.uint8)
        px[..., :3] = rgb
        px[..., 3] = np.where(mask, 255, 0)
        return cls(px)

    def with_pixels(self, pixels: np.ndarray) -> "RgbaImage":
        return RgbaImage(pixels)

    def __eq__(self, other):
        if not isinstance(other, RgbaImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


def load_image(path) -> RgbaImage:
    with Image.open(path) as im:
        return RgbaImage(np.asarray(im.convert("RGBA")))


def save_image(img: RgbaImage, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(img.pixels), mode="RGBA").save(path)


# --------------------------------------------------------------------------
# Geometry
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    vertex_colors: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64, copy=True).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64, copy=True).reshape(-1, 3)
        if len(f):
            if f.min() < 0 or f.max() >= len(v):
                raise DegenerateMesh("face index out of range")
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise DegenerateMesh("face with repeated vertex index")
        c = self.vertex_colors
        if c is not None:
            c = np.clip(np.array(c, dtype=np.float64, copy=True).reshape(-1, 3), 0.0, 1.0)
            if len(c) != len(v):
                raise ValueError("vertex_colors length must match vertices")
            c = _frozen(c)
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "faces", _frozen(f))
        object.__setattr__(self, "vertex_colors", c)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner positions."""
        return self.vertices[self.faces]

    @property
    def face_centroids(self) -> np.ndarray:
        return self.triangles.mean(axis=1)

    def _cross(self) -> np.ndarray:
        tri = self.triangles
        return np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])

    @property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross(), axis=1)

    @property
    def face_normals(self) -> np.ndarray:
        cr = self._cross()
        norm = np.linalg.norm(cr, axis=1, keepdims=True)
        return np.divide(cr, norm, out=np.zeros_like(cr), where=norm > 0)

    def transformed(self, rotation=None, translation=None, scale: float = 1.0) -> "TriMesh":
        """Return ``scale * R @ v + t`` applied to every vertex."""
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        v = v * scale
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return TriMesh(v, self.faces, self.vertex_colors)

    def submesh(self, face_mask: np.ndarray) -> "TriMesh":
        """Keep the selected faces and drop vertices nobody references."""
        faces = self.faces[np.asarray(face_mask)]
        used = np.unique(faces)
        remap = np.full(self.n_vertices, -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        colors = None if self.vertex_colors is None else self.vertex_colors[used]
        return TriMesh(self.vertices[used], remap[faces], colors)

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        same_colors = (self.vertex_colors is None and other.vertex_colors is None) or (
            self.vertex_colors is not None
            and other.vertex_colors is not None
            and np.array_equal(self.vertex_colors, other.vertex_colors)
        )
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.faces, other.faces)
            and same_colors
        )

    __hash__ = None


def concatenate_meshes(meshes: Sequence[TriMesh]) -> TriMesh:
    """Stack meshes into one; colors survive only if every part has them."""
    if not meshes:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    offsets = np.cumsum([0] + [m.n_vertices for m in meshes[:-1]])
    verts = np.concatenate([m.vertices for m in meshes])
    faces = np.concatenate([m.faces + o for m, o in zip(meshes, offsets)])
    colors = None
    if all(m.vertex_colors is not None for m in meshes):
        colors = np.concatenate([m.vertex_colors for m in meshes])
    return TriMesh(verts, faces, colors)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        p = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 3)
        n = self.normals
        if n is not None:
            n = np.array(n, dtype=np.float64, copy=True).reshape(-1, 3)
            if len(n) != len(p):
                raise ValueError("normals length must match points")
            if len(n) and np.max(np.abs(np.linalg.norm(n, axis=1) - 1.0)) > 1e-6:
                raise ValueError("normals must be unit length")
            n = _frozen(n)
        object.__setattr__(self, "points", _frozen(p))
        object.__setattr__(self, "normals", n)

    def __len__(self) -> int:
        return len(self.points)

    def transformed(self, rotation=None, translation=None) -> "PointCloud":
        p, n = self.points, self.normals
        if rotation is not None:
            r = np.asarray(rotation, dtype=np.float64)
            p = p @ r.T
            if n is not None:
                n = n @ r.T
        if translation is not None:
            p = p + np.asarray(translation, dtype=np.float64)
        return PointCloud(p, n)

    def subsample(self, n: int, rng: np.random.Generator) -> "PointCloud":
        if n >= len(self):
            return self
        idx = np.sort(rng.choice(len(self), size=n, replace=False))
        return PointCloud(self.points[idx], None if self.normals is None else self.normals[idx])


# --------------------------------------------------------------------------
# Cameras
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole or orthographic camera.

    Camera frame: +x right, +y down, +z forward. ``rotation``/``translation``
    map world points into that frame (``p_cam = R @ p + t``). Pixel centers sit
    at half-integer coordinates.
    """

    projection: str
    rotation: np.ndarray
    translation: np.ndarray
    resolution: tuple[int, int] = DEFAULT_RESOLUTION
    fov_y: float | None = None
    half_height: float | None = None
    near: float = 0.01
    far: float = 100.0

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", _frozen(r))
        object.__setattr__(self, "translation", _frozen(t))
        object.__setattr__(self, "resolution", (int(self.resolution[0]), int(self.resolution[1])))
        if self.projection == "perspective":
            if self.fov_y is None or not (0.0 < self.fov_y < math.pi):
                raise ValueError("perspective camera needs fov_y in (0, pi)")
            if self.near <= 0:
                raise ValueError("perspective camera needs near > 0")
        elif self.projection == "orthographic":
            if self.half_height is None or self.half_height <= 0:
                raise ValueError("orthographic camera needs half_height > 0")
        else:
            raise ValueError(f"unknown projection {self.projection!r}")
        if not self.near < self.far:
            raise ValueError("near must be < far")
        if self.resolution[0] <= 0 or self.resolution[1] <= 0:
            raise ValueError("resolution must be positive")

    @property
    def width(self) -> int:
        return self.resolution[0]

    @property
    def height(self) -> int:
        return self.resolution[1]

    @property
    def is_perspective(self) -> bool:
        return self.projection == "perspective"

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def forward(self) -> np.ndarray:
        return self.rotation[2].copy()

    @property
    def pixel_scale(self) -> float:
        """Pixels per unit of normalized image-plane coordinate."""
        if self.is_perspective:
            return 0.5 * self.height / math.tan(0.5 * self.fov_y)
        return 0.5 * self.height / self.half_height

    @classmethod
    def look_at(
        cls,
        eye,
        target=(0.0, 0.0, 0.0),
        up=(0.0, 1.0, 0.0),
        *,
        projection: str = "perspective",
        fov_y: float | None = math.radians(40.0),
        half_height: float | None = None,
        resolution=DEFAULT_RESOLUTION,
        near: float = 0.01,
        far: float = 100.0,
    ) -> "CameraModel":
        eye = np.asarray(eye, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - eye
        fwd /= np.linalg.norm(fwd)
        up = np.asarray(up, dtype=np.float64)
        right = np.cross(fwd, up)
        if np.linalg.norm(right) < 1e-9:
            right = np.cross(fwd, np.array([0.0, 0.0, 1.0]))
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        rot = np.stack([right, down, fwd])
        if projection == "orthographic":
            fov_y = None
            if half_height is None:
                half_height = 1.0
        return cls(
            projection=projection,
            rotation=rot,
            translation=-rot @ eye,
            resolution=tuple(resolution),
            fov_y=fov_y,
            half_height=half_height,
            near=near,
            far=far,
        )

    def pixel_rays(self) -> tuple[np.ndarray, np.ndarray]:
        """World-space ray origins and unit directions, shape (H, W, 3).

        For perspective cameras the ray parameter equals the distance from
        the camera center; for orthographic cameras it is the camera-frame
        depth measured from the image plane.
        """
        w, h = self.resolution
        xs = (np.arange(w) + 0.5 - 0.5 * w) / self.pixel_scale
        ys = (np.arange(h) + 0.5 - 0.5 * h) / self.pixel_scale
        gx, gy = np.meshgrid(xs, ys)
        rt = self.rotation.T
        if self.is_perspective:
            d = np.stack([gx, gy, np.ones_like(gx)], axis=-1)
            d /= np.linalg.norm(d, axis=-1, keepdims=True)
            dirs = d @ self.rotation
            origins = np.broadcast_to(self.center, dirs.shape).copy()
        else:
            local = np.stack([gx, gy, np.zeros_like(gx)], axis=-1)
            origins = (local - self.translation) @ self.rotation
            dirs = np.broadcast_to(rt[:, 2], origins.shape).copy()
        return origins, dirs

    def to_dict(self) -> dict:
        d = {
            "projection": self.projection,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "resolution": list(self.resolution),
            "near": self.near,
            "far": self.far,
        }
        if self.is_perspective:
            d["fov_y"] = self.fov_y
        else:
            d["half_height"] = self.half_height
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(
            projection=d["projection"],
            rotation=d["rotation"],
            translation=d["translation"],
            resolution=tuple(d.get("resolution", DEFAULT_RESOLUTION)),
            fov_y=d.get("fov_y"),
            half_height=d.get("half_height"),
            near=d.get("near", 0.01),
            far=d.get("far", 100.0),
        )

    def __eq__(self, other):
        if not isinstance(other, CameraModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


# --------------------------------------------------------------------------
# Records and manifests
# --------------------------------------------------------------------------


@dataclass
class MetricRecord:
    """One object x variant x model evaluation.

    ``error`` is set (and ``metrics`` usually empty) when the item failed.
    """

    object_id: str
    variant_id: str
    model_id: str
    metrics: dict[str, float] = field(default_factory=dict)
    error: str | None = None
    seed: int | None = None

    def validate(self) -> None:
        m = self.metrics
        if "cd" in m and m["cd"] < 0:
            raise ValueError("cd must be non-negative")
        for k, v in m.items():
            if k.startswith(("fs@", "visible_fs@")) and not 0.0 <= v <= 1.0:
                raise ValueError(f"{k} must be in [0, 1]")
            if k in ("ssim", "visible_ssim") and not -1.0 <= v <= 1.0:
                raise ValueError(f"{k} must be in [-1, 1]")
            if k in ("symmetric", "gt_symmetric") and v not in (0, 1):
                raise ValueError(f"{k} must be 0 or 1")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.model_id, self.variant_id, self.object_id)

    def to_dict(self) -> dict:
        d = {
            "object_id": self.object_id,
            "variant_id": self.variant_id,
            "model_id": self.model_id,
            "metrics": {k: float(v) for k, v in sorted(self.metrics.items())},
        }
        if self.error is not None:
            d["error"] = self.error
        if self.seed is not None:
            d["seed"] = int(self.seed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricRecord":
        try:
            return cls(
                object_id=str(d["object_id"]),
                variant_id=str(d["variant_id"]),
                model_id=str(d["model_id"]),
                metrics={str(k): float(v) for k, v in d.get("metrics", {}).items()},
                error=d.get("error"),
                seed=d.get("seed"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed metric record: {exc}") from exc


def write_records_jsonl(records: Iterable[MetricRecord], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def iter_records_jsonl(path) -> Iterator[MetricRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            yield MetricRecord.from_dict(payload)


def records_to_csv(records: Iterable[MetricRecord]) -> str:
    records = sorted(records, key=lambda r: r.key)
    names = sorted({k for r in records for k in r.metrics})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model_id", "variant_id", "object_id", *names, "error"])
    for r in records:
        row = [r.model_id, r.variant_id, r.object_id]
        row += [repr(float(r.metrics[n])) if n in r.metrics else "" for n in names]
        row.append(r.error or "")
        writer.writerow(row)
    return buf.getvalue()


@dataclass
class ManifestEntry:
    object_id: str
    gt_mesh_path: str
    input_image_path: str
    camera: CameraModel
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "gt_mesh_path": self.gt_mesh_path,
            "input_image_path": self.input_image_path,
            "camera": self.camera.to_dict(),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(
            object_id=str(d["object_id"]),
            gt_mesh_path=str(d["gt_mesh_path"]),
            input_image_path=str(d["input_image_path"]),
            camera=CameraModel.from_dict(d["camera"]),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class RunManifest:
    entries: list[ManifestEntry]

    def __post_init__(self):
        ids = [e.object_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ManifestInvalid("object_ids must be unique")

    def resolve(self, base: Path) -> "RunManifest":
        """Return a copy with relative paths made absolute against ``base``."""
        out = []
        for e in self.entries:
            out.append(
                ManifestEntry(
                    e.object_id,
                    str((base / e.gt_mesh_path).resolve()),
                    str((base / e.input_image_path).resolve()),
                    e.camera,
                    e.seed,
                )
            )
        return RunManifest(out)

    def check_paths(self) -> None:
        for e in self.entries:
            for p in (e.gt_mesh_path, e.input_image_path):
                if not Path(p).exists():
                    raise ManifestInvalid(f"{e.object_id}: missing file {p}")

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        try:
            return cls([ManifestEntry.from_dict(e) for e in d["entries"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestInvalid(f"malformed manifest: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestInvalid(str(exc)) from exc
        return cls.from_dict(payload)
