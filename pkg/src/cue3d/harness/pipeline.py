"""End-to-end run: perturb inputs, call runners, evaluate, persist records.

Layout under the output directory::

    <out>/<model>/<variant>/<object>/input.png
                                    pred.ply
                                    aligned.ply
                                    record.json
    <out>/records.jsonl   all records, sorted by (model, variant, object)
    <out>/summary.json

An item whose ``record.json`` already exists is not recomputed, which makes
an interrupted run resumable.
"""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..core import ManifestEntry, MetricRecord, load_image, save_image, seeded_rng, write_records_jsonl
from ..errors import Cue3DError, ManifestInvalid
from ..meshio import load_mesh, save_mesh
from ..perturb import apply_perturbation
from ..render import DEFAULT_DISTANCE, DEFAULT_ELEVATIONS, DEFAULT_FOV_Y, N_AZIMUTHS
from .evaluate import GroundTruth, evaluate_prediction, prepare_ground_truth
from .plan import PipelinePlan, RunnerSpec, VariantSpec
from .runners import obtain_prediction

log = logging.getLogger(__name__)


@dataclass
class RunSummary:
    total: int = 0
    computed: int = 0
    skipped: int = 0
    failed: int = 0
    seconds: float = 0.0
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "computed": self.computed,
            "skipped": self.skipped,
            "failed": self.failed,
            "seconds": round(self.seconds, 3),
            "failures": sorted(self.failures),
        }


class _GroundTruthCache:
    """Per-object ground-truth preparation, computed once and shared by threads."""

    def __init__(self, plan: PipelinePlan):
        self.plan = plan
        self._data: dict[str, GroundTruth] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def get(self, entry: ManifestEntry) -> GroundTruth:
        with self._guard:
            lock = self._locks.setdefault(entry.object_id, threading.Lock())
        with lock:
            if entry.object_id not in self._data:
                mesh = load_mesh(entry.gt_mesh_path)
                self._data[entry.object_id] = prepare_ground_truth(mesh, entry.camera, self.plan.eval, self.plan.seed)
            return self._data[entry.object_id]


def protocol_header(plan: PipelinePlan) -> dict:
    """Evaluation settings, including the assumed view-ring geometry."""
    return {
        "seed": plan.seed,
        "eval": plan.eval.to_dict(),
        "view_ring": {
            "azimuths": N_AZIMUTHS,
            "elevations_deg": [round(math.degrees(e), 6) for e in DEFAULT_ELEVATIONS],
            "distance": DEFAULT_DISTANCE,
            "fov_y_deg": round(math.degrees(DEFAULT_FOV_Y), 6),
            "note": "elevations, distance and field of view are assumed defaults",
        },
    }


def item_dir(out: Path, model_id: str, variant_id: str, object_id: str) -> Path:
    return out / model_id / variant_id / object_id


def pick_occluder(plan: PipelinePlan, entry: ManifestEntry, seed: int) -> ManifestEntry:
    """A different object's input image serves as the occluder silhouette."""
    others = [e for e in plan.manifest.entries if e.object_id != entry.object_id] or [entry]
    return others[int(seeded_rng(seed, "perturb/occluder").integers(len(others)))]


def make_input(plan: PipelinePlan, variant: VariantSpec, entry: ManifestEntry, seed: int):
    img = load_image(entry.input_image_path)
    if variant.is_baseline:
        return img
    if variant.external is not None:
        path = plan.resolve_path(variant.external) / f"{entry.object_id}.png"
        if not path.exists():
            raise Cue3DError(f"external variant {variant.variant_id}: missing {path.name}")
        return load_image(path)
    spec = variant.perturb
    spec = type(spec)(spec.kind, spec.strength, seed)
    occluder = None
    if spec.kind == "occlude":
        occluder = load_image(pick_occluder(plan, entry, seed).input_image_path)
    return apply_perturbation(img, spec, occluder)


def process_item(plan: PipelinePlan, runner: RunnerSpec, variant: VariantSpec, entry: ManifestEntry,
                 out: Path, gts: _GroundTruthCache, runner_lock: threading.Lock | None) -> MetricRecord:
    d = item_dir(out, runner.model_id, variant.variant_id, entry.object_id)
    d.mkdir(parents=True, exist_ok=True)
    seed = plan.item_seed(variant.variant_id, entry.object_id)
    rec = MetricRecord(entry.object_id, variant.variant_id, runner.model_id, seed=plan.seed)
    try:
        img = make_input(plan, variant, entry, seed)
        input_png = d / "input.png"
        save_image(img, input_png)
        kw = dict(object_id=entry.object_id, variant_id=variant.variant_id, seed=seed, gt_mesh=entry.gt_mesh_path)
        if runner_lock is not None:
            with runner_lock:
                pred = obtain_prediction(runner, plan.base_dir, input_png, d / "pred.ply", **kw)
        else:
            pred = obtain_prediction(runner, plan.base_dir, input_png, d / "pred.ply", **kw)
        if runner.exec is None:
            save_mesh(pred, d / "pred.ply")
        gt = gts.get(entry)
        metrics, aligned, info = evaluate_prediction(pred, gt, entry.camera, plan.eval, plan.seed)
        save_mesh(aligned, d / "aligned.ply")
        (d / "alignment.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
        rec.metrics = metrics
        rec.validate()
    except Cue3DError as exc:
        rec.metrics = {}
        rec.error = f"{type(exc).__name__}: {exc}"
    except (OSError, ValueError) as exc:
        rec.metrics = {}
        rec.error = f"{type(exc).__name__}: {exc}"
    (d / "record.json").write_text(json.dumps(rec.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return rec


def _load_record(path: Path) -> MetricRecord | None:
    try:
        return MetricRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, ValueError, Cue3DError):
        return None  # unreadable record: recompute the item


def run_pipeline(plan: PipelinePlan, out_dir, workers: int = 1, retry_errors: bool = False):
    """Evaluate every runner x variant x object; returns (records, summary)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not plan.manifest.entries:
        raise ManifestInvalid("manifest has no entries")
    plan.manifest.check_paths()
    t0 = time.perf_counter()
    gts = _GroundTruthCache(plan)
    locks = {r.model_id: threading.Lock() for r in plan.runners if not r.reentrant}
    summary = RunSummary()
    records: list[MetricRecord] = []
    todo = []
    for runner in plan.runners:
        for variant in plan.variants:
            for entry in plan.manifest.entries:
                summary.total += 1
                path = item_dir(out, runner.model_id, variant.variant_id, entry.object_id) / "record.json"
                rec = _load_record(path) if path.exists() else None
                if rec is not None and (rec.error is None or not retry_errors):
                    summary.skipped += 1
                    records.append(rec)
                else:
                    todo.append((runner, variant, entry))

    def work(item):
        runner, variant, entry = item
        rec = process_item(plan, runner, variant, entry, out, gts, locks.get(runner.model_id))
        log.info("%s/%s/%s %s", runner.model_id, variant.variant_id, entry.object_id, rec.error or "ok")
        return rec

    if workers <= 1:
        fresh = [work(it) for it in todo]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(work, todo))
    summary.computed = len(fresh)
    records.extend(fresh)
    records.sort(key=lambda r: r.key)
    for r in records:
        if r.error is not None:
            summary.failed += 1
            summary.failures.append("/".join(r.key) + f": {r.error}")
    summary.seconds = time.perf_counter() - t0
    write_records_jsonl(records, out / "records.jsonl")
    header = {"protocol": protocol_header(plan), **summary.to_dict()}
    (out / "summary.json").write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    return records, summary
