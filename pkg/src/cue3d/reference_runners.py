"""Reference runners used to validate the harness.

``identity`` copies the ground-truth mesh to the output; ``degrade`` adds
Gaussian vertex noise to it. Both ignore the input image, so they exercise
every stage of the pipeline without a neural model::

    python -m cue3d.reference_runners identity --gt {gt_mesh} --output {output}
    python -m cue3d.reference_runners degrade --gt {gt_mesh} --output {output} --sigma 0.02 --seed {seed}
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .core import TriMesh, seeded_rng
from .meshio import load_mesh, save_mesh

DEGRADE_SIGMA = 0.02


def degrade(mesh: TriMesh, sigma: float, seed: int) -> TriMesh:
    rng = seeded_rng(seed, "runner/degrade")
    return TriMesh(mesh.vertices + rng.normal(scale=sigma, size=mesh.vertices.shape),
                   mesh.faces, mesh.vertex_colors)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="reference_runners", description=__doc__.split("\n\n")[0])
    ap.add_argument("mode", choices=("identity", "degrade"))
    ap.add_argument("--gt", required=True, help="ground-truth mesh")
    ap.add_argument("--output", required=True, help="where to write the predicted mesh")
    ap.add_argument("--input", help="input image (ignored)")
    ap.add_argument("--sigma", type=float, default=DEGRADE_SIGMA)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    mesh = load_mesh(args.gt)
    if args.mode == "degrade":
        mesh = degrade(mesh, args.sigma, args.seed)
    save_mesh(mesh, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
