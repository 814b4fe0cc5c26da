import json

import numpy as np
import pytest

from cue3d.analysis import (
    CueDeltaMatrix,
    aggregate,
    build_tables,
    cue_delta_matrix,
    format_value,
    radar_export,
    roughness_ratio,
    seed_stats,
    seed_variance,
    spearman,
    spearman_matrix,
)
from cue3d.core import MetricRecord
from cue3d.errors import (
    DivisionByZeroGuard,
    InsufficientData,
    InsufficientSeeds,
    MissingBaseline,
    MissingVariant,
)
from oracles import spearman_oracle, textbook_sd


def rec(model, variant, obj, seed=None, **metrics):
    return MetricRecord(obj, variant, model, metrics, seed=seed)


def test_seed_stats_reproduce_reference_values():
    s = seed_stats([61.58, 58.00, 58.20])
    assert f"{s.mean:.2f}" == "59.26" and f"{s.sd:.2f}" == "1.64"
    assert seed_stats([3.0, 3.0, 3.0]).sd == 0.0
    with pytest.raises(InsufficientSeeds):
        seed_stats([1.0])


def test_seed_stats_match_textbook(rng):
    vals = rng.normal(size=5).tolist()
    for ddof in (0, 1):
        assert abs(seed_stats(vals, ddof).sd - textbook_sd(vals, ddof)) < 1e-12


def test_seed_variance_groups_by_seed():
    recs = [rec("sf3d", "original", f"o{i}", seed=s, cd=v / 1000)
            for s, v in enumerate([61.58, 58.00, 58.20]) for i in range(2)]
    stats = seed_variance(recs)["sf3d"]
    assert stats.n_seeds == 3
    assert f"{stats.mean:.2f}" == "59.26" and f"{stats.sd:.2f}" == "1.64"


def test_spearman_matches_oracle(rng):
    for _ in range(20):
        x = rng.normal(size=20)
        y = np.round(rng.normal(size=20), 1)  # ties
        assert abs(spearman(x, y) - spearman_oracle(x, y)) < 1e-12
    x = rng.normal(size=10)
    assert spearman(x, np.exp(x)) == pytest.approx(1.0)
    with pytest.raises(InsufficientData):
        spearman([1.0, 2.0], [2.0, 3.0])
    with pytest.raises(InsufficientData):
        spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_spearman_matrix_symmetric_with_missing(rng):
    vals = rng.normal(size=(12, 4))
    vals[:10, 3] = np.nan
    m = CueDeltaMatrix([f"o{i}" for i in range(12)], list("abcd"), vals)
    rho, n = spearman_matrix(m)
    assert np.array_equal(np.diag(rho), np.ones(4))
    assert np.array_equal(rho[:3, :3], rho[:3, :3].T)
    assert np.isnan(rho[0, 3]) and n[0, 3] == 2
    assert rho[0, 1] == pytest.approx(spearman_oracle(vals[:, 0], vals[:, 1]), abs=1e-12)


def _table_records():
    out = []
    for model, base, worse in (("trellis", 0.03964, 0.05), ("sf3d", 0.06158, 0.07)):
        out.append(rec(model, "original", "a", cd=base, **{"fs@0.01": 0.5}))
        out.append(rec(model, "dilate_strong", "a", cd=worse, **{"fs@0.01": 0.4}))
    return out


def test_build_tables_render_and_stability():
    recs = _table_records()
    t = build_tables(recs)
    csv1 = t.to_csv()
    assert "trellis,original,cd,1,39.64," in csv1
    assert csv1 == build_tables(list(reversed(recs))).to_csv()
    assert t.deltas[("trellis", "dilate_strong")]["cd"] == pytest.approx(0.05 - 0.03964)
    assert "worse" in csv1
    assert format_value("cd", 0.03964) == "39.64"
    assert format_value("fs@0.01", 0.5) == "0.5000"


def test_build_tables_derived_rows_and_errors():
    recs = [
        rec("m", "original", "a", symmetric=1.0, gt_symmetric=1.0, normal_roughness=0.2, gt_normal_roughness=0.4),
        rec("m", "original", "b", symmetric=0.0, gt_symmetric=1.0, normal_roughness=0.2, gt_normal_roughness=0.4),
        MetricRecord("c", "original", "m", error="RunnerFailed: x"),
    ]
    t = build_tables(recs)
    row = t.means[("m", "original")]
    assert row["symmetry_f1"] == pytest.approx(2 / 3)
    assert row["roughness_ratio"] == pytest.approx(0.5)
    assert t.counts[("m", "original")] == 2 and t.errors[("m", "original")] == 1
    with pytest.raises(MissingBaseline):
        build_tables([rec("m", "dilate_strong", "a", cd=0.1)])


def test_radar_hand_computed():
    recs = []
    deltas = {"m1": (4.0, 2.0), "m2": (1.0, 3.0)}
    for model, (d1, d2) in deltas.items():
        recs += [rec(model, "original", "a", cd=1.0), rec(model, "v1", "a", cd=1.0 + d1),
                 rec(model, "v2", "a", cd=1.0 + d2), rec(model, "v3", "a", cd=0.5)]
    t = build_tables(recs)
    out = radar_export(t, {"c1": ["v1"], "c2": ["v2"], "c3": ["v3"]})
    assert out["m1"] == {"c1": 1.0, "c2": 0.5, "c3": 0.0}
    assert out["m2"] == {"c1": 0.25, "c2": 0.75, "c3": 0.0}
    with pytest.raises(MissingVariant):
        radar_export(t, {"c": ["missing"]})
    with pytest.raises(MissingVariant):
        radar_export(t, {"c": []})


def test_cue_delta_matrix_marks_missing():
    recs = [rec("m", "original", "a", cd=0.01), rec("m", "v", "a", cd=0.03),
            rec("m", "v", "b", cd=0.02)]
    m = cue_delta_matrix(recs, model_id="m")
    assert m.objects == ["a", "b"] and m.cues == ["v"]
    assert m.values[0, 0] == pytest.approx(20.0)
    assert np.isnan(m.values[1, 0])


def test_roughness_ratio():
    assert roughness_ratio(0.3, 0.3) == 1.0
    with pytest.raises(DivisionByZeroGuard):
        roughness_ratio(0.3, 0.0)


def test_aggregate_writes_outputs(tmp_path, rng):
    recs = []
    for seed in (0, 1):
        for i in range(5):
            base = rng.uniform(0.01, 0.05)
            recs.append(rec("m", "original", f"o{i}", seed=seed, cd=base))
            recs.append(rec("m", "dilate_strong", f"o{i}", seed=seed, cd=base + rng.uniform(0, 0.02)))
            recs.append(rec("m", "shuffle_10", f"o{i}", seed=seed, cd=base + rng.uniform(0, 0.02)))
    paths = aggregate(recs, tmp_path)
    assert set(paths) == {"tables", "deltas", "spearman", "radar", "variance"}
    radar = json.loads(paths["radar"].read_text())
    assert set(radar["values"]["m"]) == {"silhouette", "local_continuity"}
    assert "occlusion" in radar["skipped_cues"]
    first = {k: p.read_text() for k, p in paths.items()}
    aggregate(list(reversed(recs)), tmp_path)
    assert first == {k: p.read_text() for k, p in paths.items()}
