from .color import calibrate_albedo, linear_to_srgb, srgb_to_linear
from .cubemap import FACE_NAMES, Cubemap
from .types import (
    ALBEDO_MAX,
    ALBEDO_MIN,
    DEFAULT_NUM_PARTS,
    Bone,
    Camera,
    EnvironmentLight,
    Image,
    Pose,
    Skeleton,
    SplatPrimitive,
    is_rigid,
    matrix_to_quat,
    quat_to_matrix,
    quats_to_matrices,
)

__all__ = [
    "ALBEDO_MAX",
    "ALBEDO_MIN",
    "DEFAULT_NUM_PARTS",
    "FACE_NAMES",
    "Bone",
    "Camera",
    "Cubemap",
    "EnvironmentLight",
    "Image",
    "Pose",
    "Skeleton",
    "SplatPrimitive",
    "calibrate_albedo",
    "is_rigid",
    "linear_to_srgb",
    "matrix_to_quat",
    "quat_to_matrix",
    "quats_to_matrices",
    "srgb_to_linear",
]
