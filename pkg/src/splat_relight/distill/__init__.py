from .demo import (
    DEMO_WEIGHTS,
    DistillContext,
    DivergenceError,
    build_context,
    distill_demo,
    teacher_ray_attributes,
    total_loss,
)
from .losses import (
    ANISO_CAP,
    DEFAULT_WEIGHTS,
    AdaptLayer,
    LossReport,
    anisotropy_loss,
    depth_distortion,
    depth_regularizers,
    env_distill_loss,
    image_distill_loss,
    material_smoothness_loss,
    normal_consistency,
    normal_orientation_loss,
    point_distill_loss,
    rendering_loss,
    rendering_loss_components,
    sdf_distill_loss,
    ssim,
)

__all__ = [
    "ANISO_CAP",
    "DEFAULT_WEIGHTS",
    "DEMO_WEIGHTS",
    "AdaptLayer",
    "DistillContext",
    "DivergenceError",
    "LossReport",
    "anisotropy_loss",
    "build_context",
    "depth_distortion",
    "depth_regularizers",
    "distill_demo",
    "env_distill_loss",
    "image_distill_loss",
    "material_smoothness_loss",
    "normal_consistency",
    "normal_orientation_loss",
    "point_distill_loss",
    "rendering_loss",
    "rendering_loss_components",
    "sdf_distill_loss",
    "ssim",
    "teacher_ray_attributes",
    "total_loss",
]
