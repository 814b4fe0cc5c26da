"""Aggregation of metric records into tables, cue correlations, radar data
and seed statistics.

All sums go through ``math.fsum`` so results do not depend on record order,
and every CSV is written with sorted keys and fixed formatting.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import MetricRecord
from .errors import (
    DivisionByZeroGuard,
    InsufficientData,
    InsufficientSeeds,
    MissingBaseline,
    MissingVariant,
)
from .symmetry import symmetry_f1

BASELINE = "original"
CD_SCALE = 1000.0
SCALED_METRICS = ("cd", "visible_cd")
LOWER_IS_BETTER = ("cd", "visible_cd", "normal_roughness", "roughness_ratio")
MIN_SPEARMAN_OBJECTS = 3

# cue -> variants averaged for the radar chart
DEFAULT_RADAR_SELECTION = {
    "silhouette": ("dilate_strong",),
    "manhattan": ("manhattan_strong",),
    "occlusion": ("occlude_strong",),
    "edges": ("soften_edges",),
    "local_continuity": ("shuffle_10",),
}


def lower_is_better(metric: str) -> bool:
    return metric in LOWER_IS_BETTER


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def format_value(metric: str, value: float) -> str:
    """CD-style metrics x1000 at 2 dp; everything else at 4 dp."""
    if value is None or not math.isfinite(value):
        return ""
    if metric in SCALED_METRICS:
        return f"{value * CD_SCALE:.2f}"
    return f"{value:.4f}"


def _clean_zero(s: str) -> str:
    # avoid "-0.00" from tiny negative deltas
    return s[1:] if s.startswith("-") and float(s) == 0.0 else s


@dataclass
class Tables:
    """Per-(model, variant) means and deltas against the baseline variant."""

    means: dict[tuple[str, str], dict[str, float]]
    counts: dict[tuple[str, str], int]
    deltas: dict[tuple[str, str], dict[str, float]]
    errors: dict[tuple[str, str], int] = field(default_factory=dict)

    def models(self) -> list[str]:
        return sorted({m for m, _ in self.means})

    def variants(self, model: str) -> list[str]:
        return sorted(v for m, v in self.means if m == model)

    def value(self, model: str, variant: str, metric: str) -> float:
        try:
            return self.means[(model, variant)][metric]
        except KeyError:
            raise MissingVariant(f"{model}/{variant}/{metric} not in tables") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model_id", "variant_id", "metric", "n", "value", "delta", "change"])
        for key in sorted(self.means):
            model, variant = key
            for metric in sorted(self.means[key]):
                val = self.means[key][metric]
                delta = self.deltas.get(key, {}).get(metric)
                dtxt = _clean_zero(format_value(metric, delta)) if delta is not None else ""
                w.writerow([model, variant, metric, self.counts[key], format_value(metric, val),
                            dtxt, _change(metric, dtxt)])
        return buf.getvalue()


def _change(metric: str, delta_txt: str) -> str:
    if delta_txt == "":
        return ""
    d = float(delta_txt)
    if d == 0.0:
        return "same"
    worse = d > 0 if lower_is_better(metric) else d < 0
    return "worse" if worse else "better"


def build_tables(records: Iterable[MetricRecord], baseline: str = BASELINE) -> Tables:
    """Group successful records by (model, variant) and average each metric.

    Derived rows: ``symmetry_f1`` when both ``symmetric`` and
    ``gt_symmetric`` are recorded, and ``roughness_ratio`` (ratio of mean
    roughness to mean ground-truth roughness) when both roughness indices are.
    """
    values: dict[tuple[str, str], dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    sym: dict[tuple[str, str], list[tuple[float, float]]] = defaultdict(list)
    counts: dict[tuple[str, str], int] = defaultdict(int)
    errors: dict[tuple[str, str], int] = defaultdict(int)
    for r in records:
        key = (r.model_id, r.variant_id)
        if r.error is not None:
            errors[key] += 1
            continue
        counts[key] += 1
        for k, v in r.metrics.items():
            values[key][k].append(float(v))
        if "symmetric" in r.metrics and "gt_symmetric" in r.metrics:
            sym[key].append((r.metrics["symmetric"], r.metrics["gt_symmetric"]))

    means: dict[tuple[str, str], dict[str, float]] = {}
    for key, per_metric in values.items():
        row = {k: _mean(v) for k, v in per_metric.items()}
        if sym.get(key):
            # sort so the verdict order never depends on record order
            pairs = sorted(sym[key])
            row["symmetry_f1"] = symmetry_f1([p for p, _ in pairs], [g for _, g in pairs])
        if "normal_roughness" in row and "gt_normal_roughness" in row:
            row["roughness_ratio"] = roughness_ratio(row["normal_roughness"], row["gt_normal_roughness"])
        means[key] = row

    deltas: dict[tuple[str, str], dict[str, float]] = {}
    for model in sorted({m for m, _ in means}):
        base = means.get((model, baseline))
        if base is None:
            raise MissingBaseline(f"model {model!r} has no {baseline!r} records")
        for (m, variant), row in means.items():
            if m != model:
                continue
            deltas[(m, variant)] = {k: v - base[k] for k, v in row.items() if k in base}
    return Tables(means, dict(counts), deltas, dict(errors))


# --------------------------------------------------------------------------
# Per-object cue deltas and Spearman correlation
# --------------------------------------------------------------------------


@dataclass
class CueDeltaMatrix:
    """Per-object metric change (x1000 for CD) for each cue; NaN = missing."""

    objects: list[str]
    cues: list[str]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.objects), len(self.cues)):
            raise ValueError("values must be objects x cues")
        self.values = v

    @property
    def present(self) -> np.ndarray:
        return np.isfinite(self.values)

    def column(self, cue: str) -> np.ndarray:
        return self.values[:, self.cues.index(cue)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["object_id", *self.cues])
        for i, obj in enumerate(self.objects):
            w.writerow([obj, *(repr(float(x)) if np.isfinite(x) else "" for x in self.values[i])])
        return buf.getvalue()


def cue_delta_matrix(records: Iterable[MetricRecord], model_id: str | None = None, metric: str = "cd",
                     cues: Sequence[str] | None = None, baseline: str = BASELINE) -> CueDeltaMatrix:
    """Rows are objects (``model/object`` when pooling models), columns cues.

    A cell is missing when either the variant or the baseline record is
    missing, failed, or lacks ``metric``.
    """
    scale = CD_SCALE if metric in SCALED_METRICS else 1.0
    raw: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        if model_id is not None and r.model_id != model_id:
            continue
        if r.error is not None or metric not in r.metrics:
            continue
        row = r.object_id if model_id is not None else f"{r.model_id}/{r.object_id}"
        raw[row][r.variant_id].append(float(r.metrics[metric]))
    # several seeds of the same item are averaged
    table = {row: {v: _mean(vals) for v, vals in per.items()} for row, per in raw.items()}
    objects = sorted(table)
    if cues is None:
        cues = sorted({v for row in table.values() for v in row} - {baseline})
    cues = list(cues)
    vals = np.full((len(objects), len(cues)), np.nan)
    for i, obj in enumerate(objects):
        base = table[obj].get(baseline)
        if base is None:
            continue
        for j, cue in enumerate(cues):
            if cue in table[obj]:
                vals[i, j] = (table[obj][cue] - base) * scale
    return CueDeltaMatrix(objects, cues, vals)


def spearman(x, y, min_objects: int = MIN_SPEARMAN_OBJECTS) -> float:
    """Spearman rho with average ranks for ties, on pairs where both are finite."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < min_objects:
        raise InsufficientData(f"need at least {min_objects} paired objects, have {int(ok.sum())}")
    rx = rankdata(x[ok])
    ry = rankdata(y[ok])
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    den = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if den == 0.0:
        raise InsufficientData("a cue has constant deltas over the paired objects")
    return float(dx @ dy) / den


def spearman_matrix(deltas: CueDeltaMatrix, min_objects: int = MIN_SPEARMAN_OBJECTS):
    """Pairwise Spearman matrix and the number of paired objects per cell.

    Cells without enough data are NaN. The diagonal is 1 by definition.
    """
    k = len(deltas.cues)
    rho = np.full((k, k), np.nan)
    n = np.zeros((k, k), dtype=int)
    present = deltas.present
    for i in range(k):
        rho[i, i] = 1.0
        n[i, i] = int(present[:, i].sum())
        for j in range(i + 1, k):
            n[i, j] = n[j, i] = int((present[:, i] & present[:, j]).sum())
            try:
                rho[i, j] = rho[j, i] = spearman(deltas.values[:, i], deltas.values[:, j], min_objects)
            except InsufficientData:
                pass
    return rho, n


def spearman_csv(cues: Sequence[str], rho: np.ndarray, n: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cue_a", "cue_b", "rho", "n"])
    for i, a in enumerate(cues):
        for j, b in enumerate(cues):
            w.writerow([a, b, f"{rho[i, j]:.4f}" if np.isfinite(rho[i, j]) else "", int(n[i, j])])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Radar export, seed variance, roughness
# --------------------------------------------------------------------------


def radar_export(tables: Tables, selection: Mapping[str, Sequence[str]] = DEFAULT_RADAR_SELECTION,
                 metric: str = "cd", models: Sequence[str] | None = None) -> dict[str, dict[str, float]]:
    """Per model and cue, the mean metric increase over the selected variants,
    clamped at 0 and divided by the largest increase across models and cues."""
    models = list(models) if models is not None else tables.models()
    raw: dict[str, dict[str, float]] = {}
    for model in models:
        base = tables.value(model, BASELINE, metric) if (model, BASELINE) in tables.means else None
        if base is None:
            raise MissingBaseline(f"model {model!r} has no {BASELINE!r} records")
        raw[model] = {}
        for cue, variants in selection.items():
            if not variants:
                raise MissingVariant(f"cue {cue!r} selects no variants")
            ds = [tables.value(model, v, metric) - base for v in variants]
            raw[model][cue] = max(_mean(ds), 0.0)
    top = max((v for row in raw.values() for v in row.values()), default=0.0)
    if top <= 0.0:
        return {m: {c: 0.0 for c in row} for m, row in raw.items()}
    return {m: {c: v / top for c, v in row.items()} for m, row in raw.items()}


@dataclass(frozen=True)
class SeedStats:
    mean: float
    sd: float
    per_seed: tuple[float, ...]

    @property
    def n_seeds(self) -> int:
        return len(self.per_seed)


def seed_stats(per_seed_values: Sequence[float], ddof: int = 0) -> SeedStats:
    """Mean and standard deviation across seeds (population SD by default)."""
    vals = [float(v) for v in per_seed_values]
    if len(vals) < 2:
        raise InsufficientSeeds(f"need at least 2 seeds, have {len(vals)}")
    if len(vals) - ddof <= 0:
        raise InsufficientSeeds("too few seeds for the requested ddof")
    mu = _mean(vals)
    var = math.fsum((v - mu) ** 2 for v in vals) / (len(vals) - ddof)
    return SeedStats(mu, math.sqrt(var), tuple(vals))


def seed_variance(records: Iterable[MetricRecord], metric: str = "cd", variant: str = BASELINE,
                  ddof: int = 0) -> dict[str, SeedStats]:
    """Per model: average the metric over objects for each seed, then take
    the mean and SD of those per-seed averages. CD-style metrics are x1000."""
    scale = CD_SCALE if metric in SCALED_METRICS else 1.0
    groups: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        if r.variant_id != variant or r.error is not None or metric not in r.metrics:
            continue
        if r.seed is None:
            continue
        groups[r.model_id][int(r.seed)].append(r.metrics[metric] * scale)
    out = {}
    for model in sorted(groups):
        seeds = sorted(groups[model])
        out[model] = seed_stats([_mean(groups[model][s]) for s in seeds], ddof=ddof)
    return out


def variance_csv(stats: Mapping[str, SeedStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model_id", "n_seeds", "mean", "sd", "per_seed"])
    for model in sorted(stats):
        s = stats[model]
        w.writerow([model, s.n_seeds, f"{s.mean:.2f}", f"{s.sd:.2f}", " ".join(f"{v:.2f}" for v in s.per_seed)])
    return buf.getvalue()


def roughness_ratio(pred_index: float, gt_index: float) -> float:
    if gt_index <= 1e-12:
        raise DivisionByZeroGuard("ground-truth roughness is zero")
    return float(pred_index) / float(gt_index)


def aggregate(records: Iterable[MetricRecord], out_dir, selection=DEFAULT_RADAR_SELECTION) -> dict[str, Path]:
    """Write tables.csv, deltas.csv, spearman.csv, radar.json and variance.csv.

    Radar and variance outputs are skipped (with a note in radar.json) when
    their inputs are absent.
    """
    records = list(records)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    tables = build_tables(records)
    paths["tables"] = out / "tables.csv"
    paths["tables"].write_text(tables.to_csv(), encoding="utf-8")

    deltas = cue_delta_matrix(records)
    paths["deltas"] = out / "deltas.csv"
    paths["deltas"].write_text(deltas.to_csv(), encoding="utf-8")
    rho, n = spearman_matrix(deltas)
    paths["spearman"] = out / "spearman.csv"
    paths["spearman"].write_text(spearman_csv(deltas.cues, rho, n), encoding="utf-8")

    present = {v for _, v in tables.means}
    usable = {c: tuple(vs) for c, vs in selection.items() if vs and all(v in present for v in vs)}
    skipped = sorted(set(selection) - set(usable))
    radar = {"values": radar_export(tables, usable) if usable else {}, "skipped_cues": skipped}
    paths["radar"] = out / "radar.json"
    paths["radar"].write_text(json.dumps(radar, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    stats = {}
    for model in tables.models():
        try:
            stats.update(seed_variance(r for r in records if r.model_id == model))
        except InsufficientSeeds:
            pass  # single-seed runs have no spread to report
    paths["variance"] = out / "variance.csv"
    paths["variance"].write_text(variance_csv(stats), encoding="utf-8")
    return paths
