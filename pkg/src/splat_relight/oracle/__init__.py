from .analytic import (
    AnalyticScene,
    Capsule,
    Plane,
    PosedAnalyticScene,
    ProceduralMaterial,
    Sphere,
    teacher_query,
)
from .mc import brute_force_ao, eval_brdf, mc_shade

__all__ = [
    "AnalyticScene",
    "Capsule",
    "Plane",
    "PosedAnalyticScene",
    "ProceduralMaterial",
    "Sphere",
    "brute_force_ao",
    "eval_brdf",
    "mc_shade",
    "teacher_query",
]
