"""Software z-buffer rasterizer, the 16-view camera ring, and depth
back-projection.

Depth is the world-space distance along each pixel ray (for orthographic
cameras, the distance from the image plane), so back-projection is exact
up to floating point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np

from .core import CameraModel, PointCloud, RgbaImage, TriMesh
from .errors import DimensionMismatch

DEFAULT_GRAY = 0.7
DEFAULT_DISTANCE = 2.7
DEFAULT_FOV_Y = math.radians(40.0)
DEFAULT_ELEVATIONS = (0.0, math.radians(30.0))
N_AZIMUTHS = 8


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel hit distance, ``inf`` where the ray hit nothing."""

    depth: np.ndarray

    def __post_init__(self):
        d = np.array(self.depth, dtype=np.float64, copy=True)
        if d.ndim != 2:
            raise ValueError("depth must be 2-D")
        d.setflags(write=False)
        object.__setattr__(self, "depth", d)

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def hit(self) -> np.ndarray:
        return np.isfinite(self.depth)

    def save(self, path, camera: CameraModel | None = None) -> None:
        """Write ``<path>.bin`` (float32, row-major) and ``<path>.json``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.depth.astype("<f4").tofile(path.with_suffix(".bin"))
        header = {"width": self.width, "height": self.height, "dtype": "float32", "no_hit": "inf"}
        if camera is not None:
            header["camera"] = camera.to_dict()
        path.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> tuple["DepthMap", CameraModel | None]:
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text())
        raw = np.fromfile(path.with_suffix(".bin"), dtype="<f4")
        depth = raw.reshape(header["height"], header["width"]).astype(np.float64)
        cam = CameraModel.from_dict(header["camera"]) if "camera" in header else None
        return cls(depth), cam


def view_ring(
    center_dist: float = DEFAULT_DISTANCE,
    elevations=DEFAULT_ELEVATIONS,
    *,
    resolution=(512, 512),
    fov_y: float = DEFAULT_FOV_Y,
) -> list[CameraModel]:
    """Eight azimuths 45 degrees apart at each of two elevations, aimed at the origin."""
    if len(elevations) != 2:
        raise ValueError("exactly two elevations are expected")
    cams = []
    for el in elevations:
        for k in range(N_AZIMUTHS):
            az = 2.0 * math.pi * k / N_AZIMUTHS
            eye = center_dist * np.array(
                [math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)]
            )
            cams.append(CameraModel.look_at(eye, fov_y=fov_y, resolution=resolution))
    return cams


def orbit_camera(azimuth: float, elevation: float, center_dist: float = DEFAULT_DISTANCE, **kw) -> CameraModel:
    eye = center_dist * np.array(
        [math.cos(elevation) * math.sin(azimuth), math.sin(elevation), math.cos(elevation) * math.cos(azimuth)]
    )
    return CameraModel.look_at(eye, **kw)


def _clip_near(tri_c: np.ndarray, col: np.ndarray, near: float):
    """Clip camera-space triangles against z = near (Sutherland-Hodgman).

    Returns new triangle corners, colors and the index of the source face.
    """
    z = tri_c[:, :, 2]
    front = z > near
    all_in = front.all(axis=1)
    some = front.any(axis=1) & ~all_in
    keep_t = [tri_c[all_in]]
    keep_c = [col[all_in]]
    keep_src = [np.flatnonzero(all_in)]
    for f in np.flatnonzero(some):
        poly, pcol = [], []
        for i in range(3):
            a, b = tri_c[f, i], tri_c[f, (i + 1) % 3]
            ca, cb = col[f, i], col[f, (i + 1) % 3]
            ina, inb = a[2] > near, b[2] > near
            if ina:
                poly.append(a)
                pcol.append(ca)
            if ina != inb:
                s = (near - a[2]) / (b[2] - a[2])
                p = a + s * (b - a)
                p[2] = near * (1.0 + 1e-12)
                poly.append(p)
                pcol.append(ca + s * (cb - ca))
        for k in range(1, len(poly) - 1):
            keep_t.append(np.array([[poly[0], poly[k], poly[k + 1]]]))
            keep_c.append(np.array([[pcol[0], pcol[k], pcol[k + 1]]]))
            keep_src.append(np.array([f]))
    return np.concatenate(keep_t), np.concatenate(keep_c), np.concatenate(keep_src)


@nb.njit(cache=True, error_model="numpy")
def _raster(tris, cols, nrms, width, height, focal, perspective, near, far):
    depth = np.full((height, width), np.inf)
    rgb = np.zeros((height, width, 3))
    fid = np.full((height, width), -1, dtype=np.int64)
    cx = 0.5 * width
    cy = 0.5 * height
    su = np.empty(3)
    sv = np.empty(3)
    for t in range(tris.shape[0]):
        for i in range(3):
            x, y, z = tris[t, i, 0], tris[t, i, 1], tris[t, i, 2]
            if perspective:
                su[i] = focal * x / z + cx
                sv[i] = focal * y / z + cy
            else:
                su[i] = focal * x + cx
                sv[i] = focal * y + cy
        area = (su[1] - su[0]) * (sv[2] - sv[0]) - (su[2] - su[0]) * (sv[1] - sv[0])
        if area == 0.0:
            continue
        x0 = max(int(np.floor(min(su[0], su[1], su[2]) - 0.5)), 0)
        x1 = min(int(np.ceil(max(su[0], su[1], su[2]) - 0.5)), width - 1)
        y0 = max(int(np.floor(min(sv[0], sv[1], sv[2]) - 0.5)), 0)
        y1 = min(int(np.ceil(max(sv[0], sv[1], sv[2]) - 0.5)), height - 1)
        nx, ny, nz = nrms[t, 0], nrms[t, 1], nrms[t, 2]
        plane = nx * tris[t, 0, 0] + ny * tris[t, 0, 1] + nz * tris[t, 0, 2]
        for py in range(y0, y1 + 1):
            pyc = py + 0.5
            for px in range(x0, x1 + 1):
                pxc = px + 0.5
                w0 = ((su[1] - pxc) * (sv[2] - pyc) - (su[2] - pxc) * (sv[1] - pyc)) / area
                w1 = ((su[2] - pxc) * (sv[0] - pyc) - (su[0] - pxc) * (sv[2] - pyc)) / area
                w2 = 1.0 - w0 - w1
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                rx = (pxc - cx) / focal
                ry = (pyc - cy) / focal
                if perspective:
                    den = nx * rx + ny * ry + nz
                    if den == 0.0:
                        continue
                    zz = plane / den
                    dist = zz * np.sqrt(rx * rx + ry * ry + 1.0)
                    cosv = abs(den) / np.sqrt(rx * rx + ry * ry + 1.0)
                else:
                    if nz == 0.0:
                        continue
                    zz = (plane - nx * rx - ny * ry) / nz
                    dist = zz
                    cosv = abs(nz)
                if zz <= near or zz >= far:
                    continue
                if dist >= depth[py, px]:
                    continue
                depth[py, px] = dist
                fid[py, px] = t
                if perspective:
                    a0 = w0 / tris[t, 0, 2]
                    a1 = w1 / tris[t, 1, 2]
                    a2 = w2 / tris[t, 2, 2]
                    s = a0 + a1 + a2
                    a0 /= s
                    a1 /= s
                    a2 /= s
                else:
                    a0, a1, a2 = w0, w1, w2
                for c in range(3):
                    rgb[py, px, c] = cosv * (a0 * cols[t, 0, c] + a1 * cols[t, 1, c] + a2 * cols[t, 2, c])
    return depth, rgb, fid


def rasterize_raw(mesh: TriMesh, cam: CameraModel):
    """Depth, linear RGB in [0, 1] and source face id per pixel."""
    w, h = cam.resolution
    if mesh.n_faces == 0:
        return np.full((h, w), np.inf), np.zeros((h, w, 3)), np.full((h, w), -1, dtype=np.int64)
    vc = mesh.vertices @ cam.rotation.T + cam.translation
    tri_c = vc[mesh.faces]
    if mesh.vertex_colors is None:
        col = np.full(tri_c.shape, DEFAULT_GRAY)
    else:
        col = mesh.vertex_colors[mesh.faces]
    tri_c, col, src = _clip_near(tri_c, col, cam.near)
    if len(tri_c) == 0:
        return np.full((h, w), np.inf), np.zeros((h, w, 3)), np.full((h, w), -1, dtype=np.int64)
    nrm = mesh.face_normals @ cam.rotation.T
    nrm = nrm[src]
    depth, rgb, fid = _raster(
        np.ascontiguousarray(tri_c), np.ascontiguousarray(col), np.ascontiguousarray(nrm),
        w, h, cam.pixel_scale, cam.is_perspective, cam.near, cam.far,
    )
    fid = np.where(fid >= 0, src[np.maximum(fid, 0)], -1)
    return depth, rgb, fid


def rasterize(mesh: TriMesh, cam: CameraModel) -> tuple[RgbaImage, DepthMap]:
    """Headlight-Lambertian render of ``mesh``; background alpha is 0."""
    depth, rgb, _ = rasterize_raw(mesh, cam)
    hit = np.isfinite(depth)
    px = np.zeros((cam.height, cam.width, 4), dtype=np.uint8)
    px[..., :3] = np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)
    px[..., 3] = np.where(hit, 255, 0)
    return RgbaImage(px), DepthMap(depth)


def backproject(depth: DepthMap, cam: CameraModel) -> PointCloud:
    """One world-space point per hit pixel."""
    if (depth.width, depth.height) != cam.resolution:
        raise DimensionMismatch("depth map and camera resolution differ")
    hit = depth.hit
    if not hit.any():
        return PointCloud(np.zeros((0, 3)))
    origins, dirs = cam.pixel_rays()
    pts = origins[hit] + depth.depth[hit][:, None] * dirs[hit]
    return PointCloud(pts)
