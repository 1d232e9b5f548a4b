"""Real-time relighting engine for articulated 2D-Gaussian-splat avatars.

Split-sum image-based shading, part-wise spherical-harmonics occlusion
probes queried once per part, a software tile rasterizer, a Monte Carlo
reference oracle for validation, and a distillation loss suite against an
analytic teacher.
"""

from .cloud import SplatCloud
from .core import (
    Camera,
    Cubemap,
    EnvironmentLight,
    Image,
    Pose,
    Skeleton,
    SplatPrimitive,
    calibrate_albedo,
    linear_to_srgb,
    srgb_to_linear,
)

__version__ = "0.1.0"

__all__ = [
    "Camera",
    "Cubemap",
    "EnvironmentLight",
    "Image",
    "Pose",
    "Skeleton",
    "SplatCloud",
    "SplatPrimitive",
    "calibrate_albedo",
    "linear_to_srgb",
    "srgb_to_linear",
    "__version__",
]
