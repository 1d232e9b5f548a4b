"""Structure-of-arrays container for a canonical splat cloud."""

from __future__ import annotations

import numpy as np

from .core.types import ALBEDO_MAX, ALBEDO_MIN, SplatPrimitive
from .skinning import pose_splats_batch


class SplatCloud:
    """All canonical splats of one avatar, as flat arrays.

    mu_c [N,3], quat [N,4] (w,x,y,z, unit), s [N,2] (>0), opacity [N],
    color [N,3], albedo [N,3] (calibrated), roughness [N], metallic [N],
    weights [N,n_bones] (rows sum to 1).
    """

    def __init__(self, mu_c, quat, s, opacity, color, albedo, roughness, metallic, weights):
        self.mu_c = np.asarray(mu_c, dtype=np.float64).reshape(-1, 3)
        n = self.mu_c.shape[0]
        self.quat = np.asarray(quat, dtype=np.float64).reshape(n, 4)
        norms = np.linalg.norm(self.quat, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(f"splat {bad}: quaternion not unit length (|q| = {norms[bad]:.8f})")
        self.s = np.asarray(s, dtype=np.float64).reshape(n, 2)
        if np.any(self.s <= 0):
            raise ValueError(f"splat {int(np.argmax(np.any(self.s <= 0, axis=1)))}: non-positive scale")
        self.opacity = np.clip(np.asarray(opacity, dtype=np.float64).reshape(n), 0.0, 1.0)
        self.color = np.maximum(np.asarray(color, dtype=np.float64).reshape(n, 3), 0.0)
        self.albedo = np.clip(np.asarray(albedo, dtype=np.float64).reshape(n, 3), ALBEDO_MIN, ALBEDO_MAX)
        self.roughness = np.clip(np.asarray(roughness, dtype=np.float64).reshape(n), 0.0, 1.0)
        self.metallic = np.clip(np.asarray(metallic, dtype=np.float64).reshape(n), 0.0, 1.0)
        self.weights = np.asarray(weights, dtype=np.float64).reshape(n, -1)
        sums = self.weights.sum(axis=1)
        if np.any(self.weights < 0) or np.any(np.abs(sums - 1.0) > 1e-5):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"splat {bad}: skinning weights must be >= 0 and sum to 1")

    def __len__(self):
        return self.mu_c.shape[0]

    @property
    def num_bones(self):
        return self.weights.shape[1]

    def primitive(self, i) -> SplatPrimitive:
        return SplatPrimitive(
            self.mu_c[i], self.quat[i], self.s[i], self.opacity[i],
            self.color[i], self.albedo[i], self.roughness[i], self.metallic[i], self.weights[i],
        )

    @classmethod
    def from_primitives(cls, prims):
        return cls(
            np.stack([p.mu_c for p in prims]),
            np.stack([p.q_c for p in prims]),
            np.stack([p.s for p in prims]),
            np.array([p.o for p in prims]),
            np.stack([p.c for p in prims]),
            np.stack([p.a for p in prims]),
            np.array([p.r for p in prims]),
            np.array([p.m for p in prims]),
            np.stack([p.w for p in prims]),
        )

    def posed(self, pose):
        """(mu_o [N,3], R_o [N,3,3]) under the pose."""
        return pose_splats_batch(self.mu_c, self.quat, self.weights, pose)

    def replace(self, **kw):
        fields = dict(
            mu_c=self.mu_c, quat=self.quat, s=self.s, opacity=self.opacity,
            color=self.color, albedo=self.albedo, roughness=self.roughness,
            metallic=self.metallic, weights=self.weights,
        )
        fields.update(kw)
        return SplatCloud(**fields)
