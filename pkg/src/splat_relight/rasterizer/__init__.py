from .dense import composite_rays, ray_splat_alphas, render_rays
from .geometry import GAUSSIAN_CUTOFF, SplatFragment, composite, ray_splat_intersect
from .kernel import rasterize_values
from .render import ATTRIBUTES, GBuffer, render_attribute, render_deferred, render_forward

__all__ = [
    "ATTRIBUTES",
    "GAUSSIAN_CUTOFF",
    "GBuffer",
    "SplatFragment",
    "composite",
    "composite_rays",
    "rasterize_values",
    "ray_splat_alphas",
    "ray_splat_intersect",
    "render_attribute",
    "render_deferred",
    "render_forward",
    "render_rays",
]
