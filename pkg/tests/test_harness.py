import json
import shutil
import sys

import numpy as np
import pytest

from cue3d.core import MetricRecord, load_image
from cue3d.errors import ManifestInvalid, RunnerFailed, RunnerTimeout
from cue3d.harness import (
    EvalConfig,
    PipelinePlan,
    RunnerSpec,
    VariantSpec,
    format_command,
    ingest_variant,
    make_fixture_set,
    precomputed_path,
    reference_plan,
    run_pipeline,
    write_plan,
)
from cue3d.harness.runners import run_exec
from cue3d.reference_runners import degrade

SMALL_EVAL = {"samples": 2048, "render_resolution": [64, 64], "symmetry_samples": 1024, "ao_rays": 16}


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fx")
    make_fixture_set(d, 3, seed=5, parts=3, resolution=(96, 96))
    return d


def _plan(d, name="plan.json", **kw):
    payload = reference_plan(eval_cfg=SMALL_EVAL, **kw)
    write_plan(d / name, payload)
    return PipelinePlan.load(d / name, env={})


def test_fixture_set_layout(fixture_dir):
    man = json.loads((fixture_dir / "manifest.json").read_text())
    assert [e["object_id"] for e in man["entries"]] == ["obj000", "obj001", "obj002"]
    img = load_image(fixture_dir / "inputs" / "obj000.png")
    assert img.width == 96 and img.mask.any()


def test_plan_parsing_and_seed_override(fixture_dir):
    plan = _plan(fixture_dir, variants=["dilate_weak", {"id": "mine", "perturb": {"kind": "pixel-shuffle",
                                                                                  "strength": 4}}])
    assert [v.variant_id for v in plan.variants] == ["original", "dilate_weak", "mine"]
    assert plan.eval.samples == 2048 and plan.eval.render_resolution == (64, 64)
    again = PipelinePlan.load(fixture_dir / "plan.json", env={"CUE3D_SEED": "17"})
    assert again.seed == 17
    assert again.item_seed("mine", "obj000") != plan.item_seed("mine", "obj000")
    assert plan.item_seed("mine", "obj000") == _plan(fixture_dir).item_seed("mine", "obj000")
    with pytest.raises(ManifestInvalid):
        PipelinePlan.load(fixture_dir / "plan.json", env={"CUE3D_SEED": "x"})


def test_plan_validation():
    with pytest.raises(ManifestInvalid):
        RunnerSpec("m", exec="run {input}")
    with pytest.raises(ManifestInvalid):
        RunnerSpec("m", exec="run {input} {output}", precomputed="dir")
    with pytest.raises(ManifestInvalid):
        VariantSpec.from_obj("no_such_preset")
    assert EvalConfig.from_dict(EvalConfig().to_dict()) == EvalConfig()


def test_format_command_keeps_paths_with_spaces(tmp_path):
    args = format_command("{python} run.py --in {input} --out {output}", input=tmp_path / "a b.png",
                          output="o.ply")
    assert args[0] == sys.executable and args[3] == str(tmp_path / "a b.png")
    with pytest.raises(RunnerFailed):
        format_command("x {missing}", input="a", output="b")


def test_runner_failures(tmp_path):
    kw = dict(object_id="o", variant_id="v", seed=0, gt_mesh="g")
    fail = RunnerSpec("f", exec="{python} -c 'import sys; sys.exit(3)' {input} {output}")
    with pytest.raises(RunnerFailed):
        run_exec(fail, tmp_path / "in.png", tmp_path / "out.ply", **kw)
    silent = RunnerSpec("s", exec="{python} -c 'pass' {input} {output}")
    with pytest.raises(RunnerFailed, match="no mesh"):
        run_exec(silent, tmp_path / "in.png", tmp_path / "out.ply", **kw)
    slow = RunnerSpec("t", exec="{python} -c 'import time; time.sleep(5)' {input} {output}", timeout=0.5)
    with pytest.raises(RunnerTimeout):
        run_exec(slow, tmp_path / "in.png", tmp_path / "out.ply", **kw)


def test_precomputed_lookup(tmp_path, fixture_dir):
    (tmp_path / "dilate_weak").mkdir()
    shutil.copy(fixture_dir / "gt" / "obj000.ply", tmp_path / "dilate_weak" / "obj000.ply")
    shutil.copy(fixture_dir / "gt" / "obj000.ply", tmp_path / "obj000.ply")
    assert precomputed_path(tmp_path, "dilate_weak", "obj000").parent.name == "dilate_weak"
    assert precomputed_path(tmp_path, "original", "obj000") == tmp_path / "obj000.ply"
    with pytest.raises(RunnerFailed):
        precomputed_path(tmp_path, "original", "obj999")


def test_identity_pipeline_and_resumability(fixture_dir, tmp_path):
    plan = _plan(fixture_dir, variants=["shuffle_4"])
    out = tmp_path / "run"
    recs, summary = run_pipeline(plan, out)
    assert summary.total == 6 and summary.failed == 0
    for r in recs:
        assert r.metrics["cd"] < 1e-6 and r.metrics["fs@0.01"] == 1.0
        assert r.metrics["visible_cd"] < 1e-6
    item = out / "identity" / "shuffle_4" / "obj001"
    assert {p.name for p in item.iterdir()} >= {"input.png", "pred.ply", "aligned.ply", "alignment.json",
                                                 "record.json"}
    final = (out / "records.jsonl").read_text()
    (out / "identity" / "original" / "obj000" / "record.json").unlink()
    (out / "identity" / "shuffle_4" / "obj002" / "record.json").unlink()
    _, s2 = run_pipeline(plan, out)
    assert s2.skipped == 4 and s2.computed == 2
    assert (out / "records.jsonl").read_text() == final


def test_failure_isolation(fixture_dir, tmp_path):
    payload = reference_plan(eval_cfg=SMALL_EVAL)
    payload["runners"].append({"model_id": "broken",
                               "exec": "{python} -c 'import sys; sys.exit(1)' {input} {output}"})
    write_plan(fixture_dir / "plan_broken.json", payload)
    plan = PipelinePlan.load(fixture_dir / "plan_broken.json", env={})
    recs, summary = run_pipeline(plan, tmp_path / "run")
    assert summary.failed == 3
    assert all(r.error is None for r in recs if r.model_id == "identity")
    assert all(r.error.startswith("RunnerFailed") for r in recs if r.model_id == "broken")


def test_precomputed_runner_and_ingest(fixture_dir, tmp_path):
    preds = tmp_path / "preds"
    preds.mkdir()
    for p in (fixture_dir / "gt").glob("*.ply"):
        shutil.copy(p, preds / p.name)
    ext = tmp_path / "ext"
    ext.mkdir()
    for p in (fixture_dir / "inputs").glob("*.png"):
        shutil.copy(p, ext / p.name)
    payload = {"manifest": str(fixture_dir / "manifest.json"), "seed": 0, "variants": [],
               "runners": [{"model_id": "pre", "precomputed": str(preds)}], "eval": SMALL_EVAL}
    write_plan(tmp_path / "plan.json", payload)
    ingest_variant(tmp_path / "plan.json", "texture_gray", ext)
    with pytest.raises(ManifestInvalid):
        ingest_variant(tmp_path / "plan.json", "texture_gray", ext)
    plan = PipelinePlan.load(tmp_path / "plan.json", env={})
    assert plan.variants[-1].external == "ext" and plan.variants[-1].cue == "texture_gray"
    recs, summary = run_pipeline(plan, tmp_path / "run")
    assert summary.failed == 0 and len(recs) == 6


def test_degrade_runner_is_worse(fixture_dir, tmp_path):
    from cue3d.core import TriMesh
    from cue3d.meshio import load_mesh
    m = load_mesh(fixture_dir / "gt" / "obj000.ply")
    d = degrade(m, 0.02, 1)
    assert isinstance(d, TriMesh) and not np.array_equal(d.vertices, m.vertices)
    assert np.array_equal(d.vertices, degrade(m, 0.02, 1).vertices)
    plan = _plan(fixture_dir, name="plan_deg.json", mode="degrade")
    recs, summary = run_pipeline(plan, tmp_path / "run")
    assert summary.failed == 0
    assert all(r.metrics["cd"] > 1e-4 for r in recs)


def test_records_are_valid_jsonl(fixture_dir, tmp_path):
    plan = _plan(fixture_dir, name="plan_one.json")
    run_pipeline(plan, tmp_path / "run")
    lines = (tmp_path / "run" / "records.jsonl").read_text().splitlines()
    recs = [MetricRecord.from_dict(json.loads(line)) for line in lines]
    assert [r.object_id for r in recs] == ["obj000", "obj001", "obj002"]
    for r in recs:
        r.validate()
        assert {"psnr", "ssim", "visible_psnr", "symmetric", "normal_roughness"} <= set(r.metrics)


def test_summary_flags_view_protocol(fixture_dir, tmp_path):
    plan = _plan(fixture_dir, name="plan_sum.json")
    run_pipeline(plan, tmp_path / "run")
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    ring = summary["protocol"]["view_ring"]
    assert ring["azimuths"] == 8 and ring["elevations_deg"] == [0.0, 30.0]
    assert summary["protocol"]["eval"]["samples"] == 2048
    assert summary["total"] == 3 and summary["failed"] == 0
