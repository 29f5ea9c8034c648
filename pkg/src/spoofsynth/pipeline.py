"""
End-to-end spoof synthesis and batch orchestration.

Every print photo yields ten synthetic samples (slots 0-4 bent and rotated,
5-9 rotated only) and every replay sample five rotated-only ones. Each slot
draws its angles from its own RNG stream seeded by ``(seed, record, slot)``,
so outputs do not depend on worker count or scheduling.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image

from . import camera, composite, deform, mesher, raster
from .config import SynthConfig, load_config
from .errors import SampleError, SlotOutOfRange

logger = logging.getLogger(__name__)

YAW_RANGE = (0.0, 40.0)
PITCH_RANGE = (-10.0, 10.0)
BEND_RANGE = (30.0, 60.0)
SLOTS = {"print": 10, "replay": 5}
BENT_SLOTS = {"print": 5, "replay": 0}
SPOOF_LABELS = tuple(SLOTS)

ROTATE_ONLY = "rotate_only"
ROTATE_AND_BEND = "rotate_and_bend"


@dataclass(frozen=True)
class SynthesisParams:
    yaw_deg: float
    pitch_deg: float
    bend_deg: Optional[float] = None
    bend_axis: str = "vertical"
    mode: str = ROTATE_ONLY

    def __post_init__(self):
        if self.mode not in (ROTATE_ONLY, ROTATE_AND_BEND):
            raise ValueError(f"unknown mode {self.mode!r}")
        if (self.bend_deg is not None) != (self.mode == ROTATE_AND_BEND):
            raise ValueError("bend_deg must be given exactly when mode is rotate_and_bend")
        if self.bend_axis not in ("vertical", "horizontal", "both"):
            raise ValueError(f"unknown bend axis {self.bend_axis!r}")
        if not np.all(np.isfinite([self.yaw_deg, self.pitch_deg])):
            raise ValueError("angles must be finite")

    def in_sampling_ranges(self, mirrored_yaw: bool = False) -> bool:
        lo = -YAW_RANGE[1] if mirrored_yaw else YAW_RANGE[0]
        ok = lo <= self.yaw_deg <= YAW_RANGE[1] and PITCH_RANGE[0] <= self.pitch_deg <= PITCH_RANGE[1]
        if self.bend_deg is not None:
            ok = ok and BEND_RANGE[0] <= self.bend_deg <= BEND_RANGE[1]
        return ok

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisParams":
        return cls(**d)


@dataclass(frozen=True)
class ManifestRecord:
    source_path: str
    output_path: Optional[str]
    label: str
    params: Optional[SynthesisParams] = None
    seed: Optional[int] = None
    parent_id: Optional[str] = None
    origin: Optional[str] = None  # only set on merged external records

    def to_dict(self) -> dict:
        d = {
            "source_path": self.source_path,
            "output_path": self.output_path,
            "label": self.label,
            "params": None if self.params is None else self.params.to_dict(),
            "seed": self.seed,
            "parent_id": self.parent_id,
        }
        if self.origin is not None:
            d["origin"] = self.origin
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestRecord":
        params = d.get("params")
        return cls(
            source_path=d["source_path"],
            output_path=d.get("output_path"),
            label=d["label"],
            params=None if params is None else SynthesisParams.from_dict(params),
            seed=d.get("seed"),
            parent_id=d.get("parent_id"),
            origin=d.get("origin"),
        )

    @property
    def synthetic(self) -> bool:
        return self.label == "synthetic_spoof"


def write_manifest(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


def read_manifest(path) -> List[ManifestRecord]:
    with open(path, encoding="utf-8") as fh:
        return [ManifestRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def derive_seed(seed: int, record_index: int, slot: int) -> int:
    """64-bit seed of one sample's RNG stream."""
    ss = np.random.SeedSequence([int(seed), int(record_index), int(slot)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_params(rng: np.random.Generator, label: str, slot: int,
                  bend_axis: str = "vertical", mirror_yaw: bool = False) -> SynthesisParams:
    """
    Draw one sample's parameters.

    Five uniforms are always consumed, in this order: yaw, pitch, bend,
    axis, yaw sign. Unused draws are discarded so every slot consumes its
    stream identically.
    """
    if label not in SLOTS:
        raise ValueError(f"only spoof labels are synthesized, got {label!r}")
    if not 0 <= slot < SLOTS[label]:
        raise SlotOutOfRange(f"{label} has slots 0..{SLOTS[label] - 1}, got {slot}")
    yaw = rng.uniform(*YAW_RANGE)
    pitch = rng.uniform(*PITCH_RANGE)
    bend = rng.uniform(*BEND_RANGE)
    axis_draw = rng.random()
    sign_draw = rng.random()

    if mirror_yaw and sign_draw < 0.5:
        yaw = -yaw
    axis = bend_axis
    if bend_axis == "random":
        axis = "horizontal" if axis_draw < 0.5 else "vertical"
    if slot < BENT_SLOTS[label]:
        return SynthesisParams(yaw, pitch, bend, axis, ROTATE_AND_BEND)
    return SynthesisParams(yaw, pitch, None, axis, ROTATE_ONLY)


def deform_mesh(mesh: mesher.Mesh3D, params: SynthesisParams) -> mesher.Mesh3D:
    """Bend (when requested) then rotate."""
    if params.bend_deg is not None:
        theta = np.radians(params.bend_deg)
        if params.bend_axis == "both":
            mesh = deform.bend_vertical(mesh, theta)
            mesh = deform.bend_horizontal(mesh, theta, allow_nonplanar=True)
        elif params.bend_axis == "horizontal":
            mesh = deform.bend_horizontal(mesh, theta)
        else:
            mesh = deform.bend_vertical(mesh, theta)
    return deform.rotate(mesh, deform.RotationSpec.from_degrees(params.yaw_deg, params.pitch_deg))


@dataclass
class Rendered:
    image: np.ndarray
    layer: raster.RenderLayer
    projected: raster.ProjectedMesh


def render_sample(image: np.ndarray, ann: mesher.RegionAnnotation, params: SynthesisParams,
                  cfg: SynthConfig = SynthConfig()) -> Rendered:
    """Run the full chain on one photo and return the fused frame with intermediates."""
    quad = ann.corners
    tex = mesher.rectify_region(image, quad, cfg.texture_size)
    flat = mesher.build_planar_mesh(quad.mean_edge_lengths(), cfg.grid)
    cam = camera.CameraModel.calibrate(ann.eye_px_dist, cfg.d_r_mm, cfg.d_z_mm, cfg.f_px)

    def view(mesh):
        world = camera.to_world(mesh, cam.s, cam.d_z)
        return camera.project(world, cam.f, cfg.projection).translated(quad.center())

    pm = view(deform_mesh(flat, params))
    layer = raster.rasterize(pm, tex, raster.viewport_for(pm.points),
                             perspective_correct=cfg.perspective_correct)
    if cfg.composite.realign == "cover":
        # the unposed render pinned onto the quad carries the print's own perspective
        base = composite.corner_homography(view(flat).corner_points(), quad)
        layer = composite.realign_cover(layer, pm.boundary_points(), quad, quad.center(), base)
    elif cfg.composite.realign == "corners":
        layer = composite.realign_corners(layer, pm.corner_points(), quad)
    fused = composite.feather_blend(np.asarray(image)[:, :, :3], layer, cfg.composite)
    return Rendered(fused, layer, pm)


def synthesize_one(image: np.ndarray, annotation, params: SynthesisParams,
                   cfg: SynthConfig = SynthConfig(), *, sample_id: Optional[str] = None,
                   seed: Optional[int] = None,
                   output_path: Optional[str] = None) -> Tuple[np.ndarray, ManifestRecord]:
    """
    Synthesize one spoof sample.

    Any failure is re-raised as :class:`SampleError` naming the sample.
    """
    sid = sample_id
    try:
        ann = annotation
        if isinstance(annotation, dict):
            sid = sid or annotation.get("id")
            ann = mesher.RegionAnnotation.from_dict(annotation)
        sid = sid or ann.id or ann.image
        if ann.label not in SPOOF_LABELS:
            raise ValueError(f"cannot synthesize from a {ann.label!r} sample")
        fused = render_sample(image, ann, params, cfg).image
    except SampleError:
        raise
    except Exception as exc:
        raise SampleError(sid, exc) from exc
    record = ManifestRecord(ann.image, output_path, "synthetic_spoof", params, seed, sid)
    return fused, record


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def write_image(array: np.ndarray, path, image_format: str = "png") -> None:
    im = Image.fromarray(np.ascontiguousarray(array))
    if image_format == "png":
        im.save(path, format="PNG")
    else:
        im.save(path, format="JPEG", quality=95)


@dataclass
class BatchReport:
    manifest_path: Path
    records: List[ManifestRecord]
    failures: List[str] = field(default_factory=list)

    @property
    def n_synthetic(self) -> int:
        return sum(r.synthetic for r in self.records)

    @property
    def ok(self) -> bool:
        return not self.failures


def _process_record(index: int, raw: dict, base_dir: str, out_dir: str, seed: int, cfg: SynthConfig):
    """Worker task: every synthetic sample of one input record."""
    label = raw.get("label")
    parent = str(raw["id"]) if raw.get("id") is not None else f"{index:06d}"
    records, failures = [], []
    if label not in SPOOF_LABELS:
        return records, failures
    try:
        ann = mesher.RegionAnnotation.from_dict(raw)
        img_path = Path(ann.image)
        image = read_image(img_path if img_path.is_absolute() else Path(base_dir) / img_path)
    except Exception as exc:
        return records, [f"record {index} ({parent}): {type(exc).__name__}: {exc}"]

    for slot in range(SLOTS[label]):
        sample_seed = derive_seed(seed, index, slot)
        params = sample_params(np.random.default_rng(sample_seed), label, slot,
                               cfg.bend_axis, cfg.mirror_yaw)
        if cfg.both_axes and params.bend_deg is not None:
            params = SynthesisParams(params.yaw_deg, params.pitch_deg, params.bend_deg, "both", params.mode)
        rel = f"images/{index:06d}_{slot:02d}.{cfg.image_ext}"
        try:
            rendered = render_sample(image, ann, params, cfg)
        except Exception as exc:
            failures.append(str(SampleError(f"{parent}/{slot}", exc)))
            continue
        write_image(rendered.image, Path(out_dir) / rel, cfg.image_format)
        if cfg.dump_layers:
            stem = Path(out_dir) / "layers" / f"{index:06d}_{slot:02d}"
            write_image(rendered.layer.color, f"{stem}_color.png")
            write_image(rendered.layer.coverage.astype(np.uint8) * 255, f"{stem}_coverage.png")
        records.append(ManifestRecord(raw["image"], rel, "synthetic_spoof", params, sample_seed, parent))
    return records, failures


def _run_task(args):
    return _process_record(*args)


def load_dataset_manifest(path) -> List[dict]:
    """Read the input JSONL; any unreadable line is a hard failure."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{n}: invalid JSON ({exc})") from exc
    return rows


def run_batch(dataset_manifest, config=None, seed: int = 0, jobs: int = 1,
              out_dir="synth_out") -> BatchReport:
    """
    Synthesize a whole dataset manifest into ``out_dir``.

    Writes ``out_dir/manifest.jsonl``: every input record passes through as
    an original, followed by its synthetic samples ordered by slot. Failed
    samples are logged and left out.
    """
    cfg = config if isinstance(config, SynthConfig) else load_config(config)
    if not 0 <= int(seed) < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    rows = load_dataset_manifest(dataset_manifest)
    base_dir = str(Path(dataset_manifest).resolve().parent)
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    if cfg.dump_layers:
        (out / "layers").mkdir(exist_ok=True)

    tasks = [(i, row, base_dir, str(out), int(seed), cfg) for i, row in enumerate(rows)]
    jobs = max(1, int(jobs))
    if jobs == 1 or len(tasks) <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1, len(tasks))) as pool:
            results = list(pool.map(_run_task, tasks))

    records: List[ManifestRecord] = []
    failures: List[str] = []
    for row, (synth, fails) in zip(rows, results):
        records.append(ManifestRecord(row.get("image"), row.get("image"), row.get("label")))
        records.extend(synth)
        failures.extend(fails)
    for msg in failures:
        logger.warning("skipped %s", msg)

    manifest_path = out / "manifest.jsonl"
    write_manifest(records, manifest_path)
    logger.info("wrote %d records (%d synthetic, %d failures) to %s",
                len(records), sum(r.synthetic for r in records), len(failures), manifest_path)
    return BatchReport(manifest_path, records, failures)
