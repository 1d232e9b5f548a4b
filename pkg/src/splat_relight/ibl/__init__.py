from .brdf import BrdfLut, integrate_brdf_cell, precompute_brdf_lut
from .env import build_environment, diffuse_irradiance, prefilter_environment
from .shade import ShadingSample, shade, shade_batch, shade_components

__all__ = [
    "BrdfLut",
    "ShadingSample",
    "build_environment",
    "diffuse_irradiance",
    "integrate_brdf_cell",
    "precompute_brdf_lut",
    "prefilter_environment",
    "shade",
    "shade_batch",
    "shade_components",
]
