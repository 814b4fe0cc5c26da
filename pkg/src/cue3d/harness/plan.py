"""Pipeline plans: manifest, variants, runners and evaluation settings."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..core import RunManifest, seeded_rng
from ..errors import ManifestInvalid
from ..metrics import DEFAULT_SAMPLES, DEFAULT_TAUS
from ..perturb import PRESETS, PerturbSpec
from ..symmetry import DEFAULT_SAMPLES as SYM_SAMPLES
from ..symmetry import DEFAULT_THRESHOLD

BASELINE = "original"
DEFAULT_TIMEOUT = 600.0
SEED_ENV = "CUE3D_SEED"
PLACEHOLDERS = ("input", "output", "object_id", "variant", "seed", "gt_mesh", "python")


@dataclass(frozen=True)
class RunnerSpec:
    """A model under test: either a command template or a directory of meshes.

    Command templates are split like a shell line and then formatted with
    {input}, {output}, {object_id}, {variant}, {seed}, {gt_mesh} and
    {python}. Precomputed directories hold ``<variant>/<object_id>.ply``
    (or ``.obj``), falling back to ``<object_id>.ply`` at the top level.
    """

    model_id: str
    exec: str | None = None
    precomputed: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    reentrant: bool = True

    def __post_init__(self):
        if not self.model_id or "/" in self.model_id:
            raise ManifestInvalid(f"bad model_id {self.model_id!r}")
        if (self.exec is None) == (self.precomputed is None):
            raise ManifestInvalid(f"runner {self.model_id}: give exactly one of exec / precomputed")
        if self.exec is not None and ("{input}" not in self.exec or "{output}" not in self.exec):
            raise ManifestInvalid(f"runner {self.model_id}: exec template needs {{input}} and {{output}}")
        if self.timeout <= 0:
            raise ManifestInvalid("timeout must be positive")

    def to_dict(self) -> dict:
        d = {"model_id": self.model_id, "timeout": self.timeout, "reentrant": self.reentrant}
        if self.exec is not None:
            d["exec"] = self.exec
        else:
            d["precomputed"] = self.precomputed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunnerSpec":
        return cls(
            model_id=str(d["model_id"]),
            exec=d.get("exec"),
            precomputed=d.get("precomputed"),
            timeout=float(d.get("timeout", DEFAULT_TIMEOUT)),
            reentrant=bool(d.get("reentrant", True)),
        )


@dataclass(frozen=True)
class VariantSpec:
    """``original``, a generated perturbation, or an external image directory."""

    variant_id: str
    perturb: PerturbSpec | None = None
    external: str | None = None
    cue: str | None = None

    def __post_init__(self):
        if not self.variant_id or "/" in self.variant_id:
            raise ManifestInvalid(f"bad variant id {self.variant_id!r}")
        if self.perturb is not None and self.external is not None:
            raise ManifestInvalid(f"variant {self.variant_id}: perturb and external are exclusive")
        if self.variant_id == BASELINE and (self.perturb or self.external):
            raise ManifestInvalid("the original variant cannot be perturbed")

    @property
    def is_baseline(self) -> bool:
        return self.perturb is None and self.external is None

    def to_dict(self) -> dict:
        d: dict = {"id": self.variant_id}
        if self.perturb is not None:
            d["perturb"] = {"kind": self.perturb.kind, "strength": self.perturb.strength}
        if self.external is not None:
            d["external"] = self.external
        if self.cue is not None:
            d["cue"] = self.cue
        return d

    @classmethod
    def from_obj(cls, obj) -> "VariantSpec":
        if isinstance(obj, str):
            if obj == BASELINE:
                return cls(BASELINE)
            if obj not in PRESETS:
                raise ManifestInvalid(f"unknown variant preset {obj!r}")
            return cls(obj, PRESETS[obj])
        try:
            vid = str(obj["id"])
            if "perturb" in obj:
                p = obj["perturb"]
                return cls(vid, PerturbSpec(p["kind"], float(p.get("strength", 0.0))), cue=obj.get("cue"))
            if "external" in obj:
                return cls(vid, external=str(obj["external"]), cue=obj.get("cue", vid))
            if vid in PRESETS:
                return cls(vid, PRESETS[vid], cue=obj.get("cue"))
            if vid == BASELINE:
                return cls(BASELINE)
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestInvalid(f"malformed variant {obj!r}: {exc}") from exc
        raise ManifestInvalid(f"variant {obj!r} is neither a preset, a perturbation nor external")


@dataclass(frozen=True)
class EvalConfig:
    samples: int = DEFAULT_SAMPLES
    taus: tuple[float, ...] = DEFAULT_TAUS
    symmetry_threshold: float = DEFAULT_THRESHOLD
    symmetry_samples: int = SYM_SAMPLES
    render_resolution: tuple[int, int] = (512, 512)
    ao_rays: int = 64
    roughness_k: int = 8

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "taus": list(self.taus),
            "symmetry_threshold": self.symmetry_threshold,
            "symmetry_samples": self.symmetry_samples,
            "render_resolution": list(self.render_resolution),
            "ao_rays": self.ao_rays,
            "roughness_k": self.roughness_k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalConfig":
        base = cls()
        return cls(
            samples=int(d.get("samples", base.samples)),
            taus=tuple(float(t) for t in d.get("taus", base.taus)),
            symmetry_threshold=float(d.get("symmetry_threshold", base.symmetry_threshold)),
            symmetry_samples=int(d.get("symmetry_samples", base.symmetry_samples)),
            render_resolution=tuple(int(x) for x in d.get("render_resolution", base.render_resolution)),
            ao_rays=int(d.get("ao_rays", base.ao_rays)),
            roughness_k=int(d.get("roughness_k", base.roughness_k)),
        )


@dataclass
class PipelinePlan:
    manifest: RunManifest
    variants: list[VariantSpec]
    runners: list[RunnerSpec]
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        ids = [v.variant_id for v in self.variants]
        if BASELINE not in ids:
            self.variants.insert(0, VariantSpec(BASELINE))
            ids.insert(0, BASELINE)
        if len(set(ids)) != len(ids):
            raise ManifestInvalid("variant ids must be unique")
        models = [r.model_id for r in self.runners]
        if not models:
            raise ManifestInvalid("plan has no runners")
        if len(set(models)) != len(models):
            raise ManifestInvalid("runner model ids must be unique")

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else (self.base_dir / path)

    def item_seed(self, variant_id: str, object_id: str) -> int:
        """Perturbation / runner seed for one item, derived from the plan seed."""
        return int(seeded_rng(self.seed, f"item/{variant_id}/{object_id}").integers(2**31))

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path, env=None) -> "PipelinePlan":
        env = os.environ if env is None else env
        try:
            man = d["manifest"]
            if isinstance(man, str):
                manifest = RunManifest.load(base_dir / man).resolve((base_dir / man).parent)
            else:
                manifest = RunManifest.from_dict(man).resolve(base_dir)
            variants = [VariantSpec.from_obj(v) for v in d.get("variants", [BASELINE])]
            runners = [RunnerSpec.from_dict(r) for r in d["runners"]]
            cfg = EvalConfig.from_dict(d.get("eval", {}))
            seed = int(d.get("seed", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestInvalid(f"malformed plan: {exc}") from exc
        if env.get(SEED_ENV):
            try:
                seed = int(env[SEED_ENV])
            except ValueError as exc:
                raise ManifestInvalid(f"{SEED_ENV} must be an integer") from exc
        return cls(manifest, variants, runners, cfg, seed, base_dir)

    @classmethod
    def load(cls, path, env=None) -> "PipelinePlan":
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestInvalid(f"cannot read plan {path}: {exc}") from exc
        return cls.from_dict(payload, path.parent.resolve(), env)


def ingest_variant(plan_path, cue: str, image_dir, variant_id: str | None = None) -> dict:
    """Register a directory of externally produced input images as a variant.

    Images are looked up as ``<dir>/<object_id>.png``. The plan file is
    rewritten in place; the updated JSON payload is returned.
    """
    plan_path = Path(plan_path)
    payload = json.loads(plan_path.read_text(encoding="utf-8"))
    vid = variant_id or cue
    variants = payload.setdefault("variants", [BASELINE])
    for v in variants:
        existing = v if isinstance(v, str) else v.get("id")
        if existing == vid:
            raise ManifestInvalid(f"variant {vid!r} already in plan")
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise ManifestInvalid(f"{image_dir} is not a directory")
    try:
        rel = os.path.relpath(image_dir.resolve(), plan_path.parent.resolve())
    except ValueError:  # different drives
        rel = str(image_dir.resolve())
    variants.append({"id": vid, "external": rel, "cue": cue})
    plan_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return payload
