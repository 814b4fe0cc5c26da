"""Procedural stand-in dataset: primitive assemblies, input renders and a manifest."""

from __future__ import annotations

import json
import math
from pathlib import Path

from ..core import ManifestEntry, RunManifest, save_image, seeded_rng
from ..meshio import save_mesh
from ..meshops import gen_primitive_assembly
from ..render import orbit_camera, rasterize


def make_fixture_set(out_dir, n_objects: int, seed: int = 0, parts: int = 5,
                     resolution=(512, 512)) -> RunManifest:
    """Write ``gt/<id>.ply``, ``inputs/<id>.png`` and ``manifest.json``.

    Each object is rendered from a seeded random azimuth and an elevation in
    [0, 30] degrees. Paths in the manifest are relative to ``out_dir``.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    out = Path(out_dir)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    (out / "inputs").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n_objects):
        oid = f"obj{i:03d}"
        obj_seed = seed * 1000 + i
        mesh = gen_primitive_assembly(parts, obj_seed)
        rng = seeded_rng(obj_seed, "fixtures/camera")
        cam = orbit_camera(rng.uniform(0, 2 * math.pi), rng.uniform(0, math.radians(30)), resolution=resolution)
        img, _ = rasterize(mesh, cam)
        save_mesh(mesh, out / "gt" / f"{oid}.ply")
        save_image(img, out / "inputs" / f"{oid}.png")
        entries.append(ManifestEntry(oid, f"gt/{oid}.ply", f"inputs/{oid}.png", cam, obj_seed))
    manifest = RunManifest(entries)
    manifest.save(out / "manifest.json")
    return manifest


def reference_plan(manifest_name: str = "manifest.json", variants=("original",), mode: str = "identity",
                   seed: int = 0, eval_cfg: dict | None = None) -> dict:
    """A plan payload that runs one of the reference runners."""
    cmd = "{python} -m cue3d.reference_runners " + mode + " --gt {gt_mesh} --output {output} --input {input}"
    if mode == "degrade":
        cmd += " --seed {seed}"
    plan = {
        "manifest": manifest_name,
        "seed": seed,
        "variants": list(variants),
        "runners": [{"model_id": mode, "exec": cmd}],
    }
    if eval_cfg:
        plan["eval"] = eval_cfg
    return plan


def write_plan(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
