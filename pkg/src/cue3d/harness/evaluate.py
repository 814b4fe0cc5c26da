"""Metric computation for one predicted mesh against its ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..align import align
from ..core import CameraModel, PointCloud, RgbaImage, TriMesh
from ..meshops import normalization, normalize, remove_internal_surface, sample_surface
from ..metrics import cloud_metrics, normal_roughness, psnr_ssim
from ..render import backproject, rasterize, view_ring
from ..symmetry import detect_symmetry
from .plan import EvalConfig

SURFACE_LABEL = "eval/surface"


@dataclass
class GroundTruth:
    """Everything about one object that does not depend on the prediction."""

    clean: TriMesh            # internal surface removed, original frame
    center: np.ndarray
    radius: float
    normalized: TriMesh
    surface: PointCloud
    views: list[RgbaImage]
    visible_image: RgbaImage
    visible: PointCloud
    symmetric: bool
    roughness: float


def visible_view(mesh_world: TriMesh, camera: CameraModel, center, radius) -> tuple[RgbaImage, PointCloud]:
    """Render at ``camera`` and back-project the depth into the normalized GT frame."""
    img, depth = rasterize(mesh_world, camera)
    pc = backproject(depth, camera)
    return img, PointCloud((pc.points - center) / radius)


def prepare_ground_truth(gt_mesh: TriMesh, camera: CameraModel, cfg: EvalConfig, seed: int = 0) -> GroundTruth:
    clean = remove_internal_surface(gt_mesh, cfg.ao_rays)
    center, radius = normalization(clean)
    norm = normalize(clean)
    views = [rasterize(norm, cam)[0] for cam in view_ring(resolution=cfg.render_resolution)]
    verdict = detect_symmetry(clean, cfg.symmetry_threshold, cfg.symmetry_samples, seed)
    vis_img, vis_pc = visible_view(clean, camera, center, radius)
    return GroundTruth(
        clean=clean,
        center=center,
        radius=radius,
        normalized=norm,
        surface=sample_surface(norm, cfg.samples, seed, label=SURFACE_LABEL),
        views=views,
        visible_image=vis_img,
        visible=vis_pc,
        symmetric=verdict.symmetric,
        roughness=normal_roughness(clean, cfg.roughness_k),
    )


def evaluate_prediction(pred_mesh: TriMesh, gt: GroundTruth, camera: CameraModel, cfg: EvalConfig,
                        seed: int = 0) -> tuple[dict[str, float], TriMesh, dict]:
    """Returns (metrics, aligned prediction in the normalized GT frame, alignment info)."""
    pred = remove_internal_surface(pred_mesh, cfg.ao_rays)
    result, aligned = align(pred, gt.clean, samples=cfg.samples, seed=seed)
    metrics: dict[str, float] = {}

    pred_pc = sample_surface(aligned, cfg.samples, seed, label=SURFACE_LABEL)
    metrics.update(cloud_metrics(pred_pc, gt.surface, cfg.taus))

    cams = view_ring(resolution=cfg.render_resolution)
    ps, ss = [], []
    for cam, ref in zip(cams, gt.views):
        p, s = psnr_ssim(rasterize(aligned, cam)[0], ref)
        ps.append(p)
        ss.append(s)
    metrics["psnr"] = float(np.mean(ps))
    metrics["ssim"] = float(np.mean(ss))

    # visible surface: render the aligned prediction in the GT's original frame
    world = aligned.transformed(scale=gt.radius).transformed(translation=gt.center)
    img_pred, vis_pred = visible_view(world, camera, gt.center, gt.radius)
    metrics["visible_psnr"], metrics["visible_ssim"] = psnr_ssim(img_pred, gt.visible_image)
    if len(vis_pred) and len(gt.visible):
        metrics.update(cloud_metrics(vis_pred, gt.visible, cfg.taus, prefix="visible_"))

    verdict = detect_symmetry(pred, cfg.symmetry_threshold, cfg.symmetry_samples, seed)
    metrics["symmetric"] = float(verdict.symmetric)
    metrics["gt_symmetric"] = float(gt.symmetric)
    metrics["normal_roughness"] = normal_roughness(pred, cfg.roughness_k)
    metrics["gt_normal_roughness"] = gt.roughness
    return metrics, aligned, result.to_dict()
