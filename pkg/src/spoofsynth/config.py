"""
Synthesis configuration.

Config files are YAML (JSON works too). Keys can be nested by section or
written flat with dots::

    camera:
      d_z_mm: 400
    composite.feather_sigma: 2
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

import yaml

from .camera import DEFAULT_D_R_MM, DEFAULT_D_Z_MM
from .composite import CompositeConfig
from .mesher import DEFAULT_GRID

BEND_AXES = ("vertical", "horizontal", "random")
PROJECTIONS = ("perspective", "weak")
IMAGE_FORMATS = ("png", "jpeg")


@dataclass(frozen=True)
class SynthConfig:
    f_px: Optional[float] = None  # None: s * d_z, per photo
    d_z_mm: float = DEFAULT_D_Z_MM
    d_r_mm: float = DEFAULT_D_R_MM
    composite: CompositeConfig = field(default_factory=CompositeConfig)
    grid: Tuple[int, int] = DEFAULT_GRID
    bend_axis: str = "vertical"
    both_axes: bool = False
    mirror_yaw: bool = False
    projection: str = "perspective"
    perspective_correct: bool = False
    image_format: str = "png"
    texture_size: Optional[Tuple[int, int]] = None
    dump_layers: bool = False

    def __post_init__(self):
        if self.bend_axis not in BEND_AXES:
            raise ValueError(f"pipeline.bend_axis must be one of {BEND_AXES}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"pipeline.projection must be one of {PROJECTIONS}")
        if self.image_format not in IMAGE_FORMATS:
            raise ValueError(f"pipeline.image_format must be one of {IMAGE_FORMATS}")

    @property
    def image_ext(self) -> str:
        return "png" if self.image_format == "png" else "jpg"


def _pair(value) -> Tuple[int, int]:
    if isinstance(value, (int, float)):
        return int(value), int(value)
    a, b = value
    return int(a), int(b)


def _bool(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return bool(value)


# dotted key -> (field name, converter); composite keys are handled apart
_KEYS = {
    "camera.f_px": ("f_px", lambda v: None if v is None else float(v)),
    "camera.d_z_mm": ("d_z_mm", float),
    "camera.d_r_mm": ("d_r_mm", float),
    "pipeline.grid": ("grid", _pair),
    "pipeline.bend_axis": ("bend_axis", str),
    "pipeline.both_axes": ("both_axes", _bool),
    "pipeline.mirror_yaw": ("mirror_yaw", _bool),
    "pipeline.projection": ("projection", str),
    "pipeline.perspective_correct": ("perspective_correct", _bool),
    "pipeline.image_format": ("image_format", str),
    "pipeline.texture_size": ("texture_size", lambda v: None if v is None else _pair(v)),
    "pipeline.dump_layers": ("dump_layers", _bool),
}
_COMPOSITE_KEYS = {
    "composite.feather_sigma": ("feather_sigma", float),
    "composite.band": ("feather_band", lambda v: None if v is None else float(v)),
    "composite.realign": ("realign", lambda v: v if isinstance(v, bool) else str(v)),
}


def flatten(mapping: Mapping[str, Any], prefix: str = "") -> dict:
    flat = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def config_from_mapping(mapping: Mapping[str, Any], base: Optional[SynthConfig] = None) -> SynthConfig:
    flat = flatten(mapping or {})
    unknown = sorted(set(flat) - set(_KEYS) - set(_COMPOSITE_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    cfg = base or SynthConfig()
    updates = {_KEYS[k][0]: _KEYS[k][1](v) for k, v in flat.items() if k in _KEYS}
    comp = {_COMPOSITE_KEYS[k][0]: _COMPOSITE_KEYS[k][1](v) for k, v in flat.items() if k in _COMPOSITE_KEYS}
    if comp:
        updates["composite"] = replace(cfg.composite, **comp)
    return replace(cfg, **updates)


def load_config(path=None) -> SynthConfig:
    if path is None:
        return SynthConfig()
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    return config_from_mapping(data or {})
