"""Command-line entry point: ``cue3d <command> ...``."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from pathlib import Path

from .errors import Cue3DError

log = logging.getLogger("cue3d")


def _perturb(args) -> int:
    from .core import load_image, save_image
    from .perturb import PerturbSpec, apply_perturbation
    from .perturb.edges import CANNY_HIGH, CANNY_LOW, SOFTEN_SIGMA

    img = load_image(args.input)
    strength = {
        "dilate-uniform": args.radius,
        "dilate-manhattan": args.segment,
        "occlude": args.scale,
        "edges-only": 0.0,
        "soften-edges": args.radius,
        "pixel-shuffle": args.cell,
    }[args.kind]
    if strength is None:
        flag = {"dilate-uniform": "--radius", "dilate-manhattan": "--segment", "occlude": "--scale",
                "soften-edges": "--radius", "pixel-shuffle": "--cell"}[args.kind]
        raise SystemExit(f"{args.kind} needs {flag}")
    spec = PerturbSpec(args.kind, strength, args.seed)
    kw = {}
    occluder = None
    if args.kind == "occlude":
        if not args.occluder:
            raise SystemExit("occlude needs --occluder")
        occluder = load_image(args.occluder)
    if args.kind in ("edges-only", "soften-edges"):
        kw = dict(low=args.low if args.low is not None else CANNY_LOW,
                  high=args.high if args.high is not None else CANNY_HIGH)
    if args.kind == "soften-edges":
        kw["sigma"] = args.sigma if args.sigma is not None else SOFTEN_SIGMA
    save_image(apply_perturbation(img, spec, occluder, **kw), args.out)
    return 0


def _texture(args) -> int:
    from .core import save_image
    from .perturb import Checkerboard, Gray, Perlin, gen_texture

    kind = {
        "checkerboard": lambda: Checkerboard(args.cell),
        "perlin": lambda: Perlin(args.octaves, args.persistence, args.seed),
        "gray": lambda: Gray(args.level),
    }[args.kind]()
    save_image(gen_texture(kind, (args.width, args.height)), args.out)
    return 0


def _cutmix(args) -> int:
    from .meshio import load_mesh, save_mesh
    from .meshops import CutMixSpec, cutmix, normalize

    a = normalize(load_mesh(args.a))
    b = normalize(load_mesh(args.b))
    donors = [normalize(load_mesh(p)) for p in args.donor]
    spec = CutMixSpec(args.kind, axis=args.axis, ratio=args.ratio, corner_index=args.corner, seed=args.seed)
    save_mesh(cutmix(a, b, spec, donors), args.out)
    return 0


def _fixtures(args) -> int:
    from .meshio import save_mesh
    from .meshops import gen_primitive_assembly

    if args.count is None:
        save_mesh(gen_primitive_assembly(args.parts, args.seed), args.out)
        return 0
    from .harness import make_fixture_set, reference_plan, write_plan

    res = (args.resolution, args.resolution)
    make_fixture_set(args.out, args.count, args.seed, args.parts, res)
    write_plan(Path(args.out) / "plan.json", reference_plan())
    print(f"wrote {args.count} fixtures, manifest.json and plan.json to {args.out}")
    return 0


def _metrics(args) -> int:
    from .align import align
    from .meshio import load_mesh
    from .meshops import normalize, remove_internal_surface, sample_surface
    from .metrics import cloud_metrics

    pred = load_mesh(args.pred)
    gt = load_mesh(args.gt)
    if not args.keep_internal:
        pred, gt = remove_internal_surface(pred), remove_internal_surface(gt)
    if args.no_align:
        aligned, gt_n, info = normalize(pred), normalize(gt), None
    else:
        res, aligned = align(pred, gt, samples=args.samples, seed=args.seed)
        gt_n, info = normalize(gt), res.to_dict()
    pc_p = sample_surface(aligned, args.samples, args.seed, label="eval/surface")
    pc_g = sample_surface(gt_n, args.samples, args.seed, label="eval/surface")
    out = cloud_metrics(pc_p, pc_g, args.tau)
    out["cd_x1000"] = out["cd"] * 1000.0
    if info is not None:
        out["alignment"] = info
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _align(args) -> int:
    from .align import align
    from .meshio import load_mesh, save_mesh

    res, aligned = align(load_mesh(args.pred), load_mesh(args.gt), samples=args.samples, seed=args.seed)
    if args.out:
        save_mesh(aligned, args.out)
    print(json.dumps(res.to_dict(), indent=2))
    return 0


def _symmetry(args) -> int:
    from .meshio import load_mesh
    from .symmetry import detect_symmetry

    v = detect_symmetry(load_mesh(args.mesh), args.threshold, args.samples, args.seed, refine=args.refine)
    print(json.dumps(v.to_dict(), indent=2, sort_keys=True))
    return 0


def _aggregate(args) -> int:
    from .analysis import aggregate
    from .core import iter_records_jsonl

    paths = []
    for pattern in args.records:
        hits = sorted(glob.glob(pattern))
        paths.extend(hits if hits else [pattern])
    records = [r for p in paths for r in iter_records_jsonl(p)]
    written = aggregate(records, args.out)
    for name, p in sorted(written.items()):
        print(f"{name}: {p}")
    return 0


def _run(args) -> int:
    from .harness import PipelinePlan, run_pipeline

    plan = PipelinePlan.load(args.plan)
    _, summary = run_pipeline(plan, args.out, workers=args.workers, retry_errors=args.retry_errors)
    print(json.dumps(summary.to_dict(), indent=2))
    return 0 if summary.failed == 0 else 3


def _ingest(args) -> int:
    from .harness import ingest_variant

    ingest_variant(args.plan, args.cue, args.dir, args.id)
    print(f"added variant {args.id or args.cue} to {args.plan}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cue3d", description="Cue-perturbation evaluation toolkit for image-to-3D models.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perturb", help="perturb one RGBA image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", required=True, choices=["dilate-uniform", "dilate-manhattan", "occlude",
                                                     "edges-only", "soften-edges", "pixel-shuffle"])
    p.add_argument("--radius", type=int, help="dilation radius or soften band radius (px)")
    p.add_argument("--segment", type=int, help="minimum Manhattan segment length (px)")
    p.add_argument("--scale", type=float, help="occluder size relative to the object")
    p.add_argument("--occluder", help="image whose silhouette is the occluder")
    p.add_argument("--cell", type=int, help="pixel-shuffle cell size")
    p.add_argument("--low", type=float, help="Canny low threshold")
    p.add_argument("--high", type=float, help="Canny high threshold")
    p.add_argument("--sigma", type=float, help="soften-edges blur sigma")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_perturb)

    p = sub.add_parser("texture", help="generate a replacement texture")
    p.add_argument("--kind", required=True, choices=["checkerboard", "perlin", "gray"])
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--cell", type=int, default=32)
    p.add_argument("--octaves", type=int, default=4)
    p.add_argument("--persistence", type=float, default=0.5)
    p.add_argument("--level", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_texture)

    p = sub.add_parser("cutmix", help="mix two meshes (both get normalized first)")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--donor", action="append", default=[], help="extra octant donors")
    p.add_argument("--kind", required=True, choices=["half", "corner-cube", "octant"])
    p.add_argument("--axis", default="left-right", choices=["front-back", "left-right", "top-bottom"])
    p.add_argument("--ratio", type=float)
    p.add_argument("--corner", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cutmix)

    p = sub.add_parser("fixtures", help="primitive-assembly mesh, or a whole fixture set with --count")
    p.add_argument("--parts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, help="write COUNT objects plus manifest and plan into --out")
    p.add_argument("--resolution", type=int, default=512)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_fixtures)

    p = sub.add_parser("metrics", help="CD and F-scores between two meshes")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--samples", type=int, default=16384)
    p.add_argument("--tau", type=float, nargs="+", default=[0.01, 0.02, 0.05])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-align", action="store_true")
    p.add_argument("--keep-internal", action="store_true", help="skip internal-surface removal")
    p.set_defaults(func=_metrics)

    p = sub.add_parser("align", help="rigidly align a prediction to ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--samples", type=int, default=16384)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the aligned, normalized prediction")
    p.set_defaults(func=_align)

    p = sub.add_parser("symmetry", help="mirror-symmetry verdict for a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--threshold", type=float, default=0.02)
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--refine", action="store_true")
    p.set_defaults(func=_symmetry)

    p = sub.add_parser("aggregate", help="tables, Spearman, radar and variance from records")
    p.add_argument("--records", nargs="+", required=True, help="JSONL files or glob patterns")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_aggregate)

    p = sub.add_parser("run", help="run a pipeline plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--retry-errors", action="store_true", help="recompute items whose record is an error")
    p.set_defaults(func=_run)

    p = sub.add_parser("ingest-variant", help="register external input images as a variant")
    p.add_argument("--plan", required=True)
    p.add_argument("--cue", required=True)
    p.add_argument("--dir", required=True)
    p.add_argument("--id", help="variant id (defaults to the cue name)")
    p.set_defaults(func=_ingest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (Cue3DError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
