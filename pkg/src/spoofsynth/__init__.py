"""Synthetic print and replay face spoofs from annotated photos, plus PAD evaluation tools."""
from .camera import CameraModel, pixel_scale, project_perspective, project_weak, to_world
from .composite import CompositeConfig, feather_blend, realign_corners
from .config import SynthConfig, load_config
from .deform import BendSpec, RotationSpec, bend_horizontal, bend_vertical, rotate
from .mesher import Mesh3D, Quad, RegionAnnotation, Texture, build_planar_mesh, rectify_region
from .raster import ProjectedMesh, RenderLayer, Viewport, rasterize
from .pipeline import ManifestRecord, SynthesisParams, run_batch, sample_params, synthesize_one

__version__ = "0.1.0"
