"""Invoking model runners: subprocess command templates or precomputed meshes."""

from __future__ import annotations

import shlex
import subprocess
import sys
from pathlib import Path

from ..core import TriMesh
from ..errors import ParseError, RunnerFailed, RunnerTimeout
from ..meshio import load_mesh
from .plan import RunnerSpec

MESH_SUFFIXES = (".ply", ".obj")


def format_command(template: str, **values) -> list[str]:
    """Split ``template`` like a shell line, then fill placeholders per token."""
    values.setdefault("python", sys.executable)
    try:
        return [tok.format(**{k: str(v) for k, v in values.items()}) for tok in shlex.split(template)]
    except (KeyError, IndexError) as exc:
        raise RunnerFailed(f"unknown placeholder in runner template: {exc}") from exc


def precomputed_path(directory: Path, variant_id: str, object_id: str) -> Path:
    for base in (directory / variant_id, directory):
        for suf in MESH_SUFFIXES:
            p = base / f"{object_id}{suf}"
            if p.exists():
                return p
    raise RunnerFailed(f"no precomputed mesh for {variant_id}/{object_id} under {directory}")


def run_exec(spec: RunnerSpec, input_png: Path, output_mesh: Path, *, object_id: str, variant_id: str,
             seed: int, gt_mesh: str, log_path: Path | None = None) -> None:
    args = format_command(spec.exec, input=input_png, output=output_mesh, object_id=object_id,
                          variant=variant_id, seed=seed, gt_mesh=gt_mesh)
    output_mesh.parent.mkdir(parents=True, exist_ok=True)
    try:
        proc = subprocess.run(args, capture_output=True, text=True, timeout=spec.timeout)
    except subprocess.TimeoutExpired as exc:
        raise RunnerTimeout(f"{spec.model_id} timed out after {spec.timeout:g} s") from exc
    except OSError as exc:
        raise RunnerFailed(f"{spec.model_id}: cannot start runner: {exc}") from exc
    if log_path is not None:
        log_path.write_text(proc.stdout + proc.stderr, encoding="utf-8")
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout).strip().splitlines()[-1:] or [""]
        raise RunnerFailed(f"{spec.model_id} exited with {proc.returncode}: {tail[0]}")
    if not output_mesh.exists():
        raise RunnerFailed(f"{spec.model_id} exited cleanly but wrote no mesh")


def obtain_prediction(spec: RunnerSpec, plan_base: Path, input_png: Path, output_mesh: Path, *,
                      object_id: str, variant_id: str, seed: int, gt_mesh: str) -> TriMesh:
    """Produce the predicted mesh for one item and return it loaded."""
    if spec.exec is not None:
        run_exec(spec, input_png, output_mesh, object_id=object_id, variant_id=variant_id,
                 seed=seed, gt_mesh=gt_mesh, log_path=output_mesh.with_name("runner.log"))
        src = output_mesh
    else:
        directory = Path(spec.precomputed)
        if not directory.is_absolute():
            directory = plan_base / directory
        src = precomputed_path(directory, variant_id, object_id)
    try:
        return load_mesh(src)
    except ParseError:
        raise
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read predicted mesh {src}: {exc}") from exc
