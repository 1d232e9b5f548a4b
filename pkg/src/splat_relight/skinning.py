"""Linear blend skinning of points, normals, and whole splats.

Canonical-space primitives are carried into the observation space by a
weight-blended sum of rigid bone transforms; the blended rotation block is
re-orthonormalized (Gram-Schmidt) so downstream shading always sees a valid
normal. Per-part canonicalization inverts a single rigid part transform and
is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.types import Pose, SplatPrimitive, quat_to_matrix, quats_to_matrices

WEIGHT_SUM_TOL = 1e-5


@dataclass(frozen=True)
class PosedSplat:
    """A splat carried into observation space: position, rotation, and the
    source primitive's scale/material attributes."""

    mu_o: np.ndarray
    R_o: np.ndarray
    s: np.ndarray
    o: float
    a: np.ndarray
    r: float
    m: float

    @property
    def n_o(self):
        return self.R_o[:, 2]


def blend_bone_transforms(w, pose: Pose):
    """Weight-blended affine transform sum_i w_i B_i(theta), as a 4x4."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] != pose.num_bones:
        raise ValueError(f"weight vector length {w.shape[0]} != bone count {pose.num_bones}")
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"skinning weights must be >= 0 and sum to 1 (got sum {w.sum():.8f})")
    return np.tensordot(w, pose.bone_transforms, axes=(0, 0))


def forward_lbs(x_c, w, pose: Pose):
    """sum_i w_i B_i(theta) x_c in homogeneous coordinates."""
    m = blend_bone_transforms(w, pose)
    x = np.asarray(x_c, dtype=np.float64)
    return m[:3, :3] @ x + m[:3, 3]


def orthonormalize(a):
    """Gram-Schmidt on columns; third column rebuilt as the cross product so
    the result is a proper rotation. Raises if the input is degenerate."""
    a = np.asarray(a, dtype=np.float64)
    if np.linalg.det(a) <= 0:
        raise ValueError(f"degenerate blended rotation (det = {np.linalg.det(a):.3e})")
    c0 = a[:, 0] / np.linalg.norm(a[:, 0])
    c1 = a[:, 1] - (c0 @ a[:, 1]) * c0
    c1 = c1 / np.linalg.norm(c1)
    c2 = np.cross(c0, c1)
    return np.stack([c0, c1, c2], axis=1)


def pose_splat(p: SplatPrimitive, pose: Pose, index=None):
    """Carry one canonical splat into observation space (mean + rotation)."""
    m = blend_bone_transforms(p.w, pose)
    mu_o = m[:3, :3] @ p.mu_c.astype(np.float64) + m[:3, 3]
    blended = m[:3, :3] @ quat_to_matrix(p.q_c)
    try:
        r_o = orthonormalize(blended)
    except ValueError as e:
        name = f"splat {index}" if index is not None else "splat"
        raise ValueError(f"{name}: {e}") from None
    return PosedSplat(mu_o, r_o, p.s.copy(), p.o, p.a.copy(), p.r, p.m)


def pose_points(points, weights, pose: Pose):
    """Vectorized forward LBS of points [N,3] with weights [N,n_b]."""
    w = np.asarray(weights, dtype=np.float64)
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > WEIGHT_SUM_TOL):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"skinning weights of point {bad} sum to {sums[bad]:.8f}")
    m = np.einsum("nb,bij->nij", w, pose.bone_transforms)  # [N,4,4]
    x = np.asarray(points, dtype=np.float64)
    return np.einsum("nij,nj->ni", m[:, :3, :3], x) + m[:, :3, 3]


def pose_splats_batch(mu_c, quats, weights, pose: Pose):
    """Vectorized pose_splat over a cloud: returns (mu_o [N,3], R_o [N,3,3]).

    Splats whose blended rotation degenerates (det <= 0) raise, naming the
    first offending index.
    """
    w = np.asarray(weights, dtype=np.float64)
    m = np.einsum("nb,bij->nij", w, pose.bone_transforms)
    mu = np.asarray(mu_c, dtype=np.float64)
    mu_o = np.einsum("nij,nj->ni", m[:, :3, :3], mu) + m[:, :3, 3]
    a = np.einsum("nij,njk->nik", m[:, :3, :3], quats_to_matrices(quats))
    det = np.linalg.det(a)
    if np.any(det <= 0):
        raise ValueError(f"splat {int(np.argmax(det <= 0))}: degenerate blended rotation")
    c0 = a[:, :, 0] / np.linalg.norm(a[:, :, 0], axis=1, keepdims=True)
    c1 = a[:, :, 1] - np.einsum("ni,ni->n", c0, a[:, :, 1])[:, None] * c0
    c1 = c1 / np.linalg.norm(c1, axis=1, keepdims=True)
    c2 = np.cross(c0, c1)
    return mu_o, np.stack([c0, c1, c2], axis=2)


def part_canonicalize(x_o, n_o, part, pose: Pose):
    """Transform an observed point and normal into one part's canonical frame:
    (B_p^-1 x_o, R_p^-1 n_o)."""
    if part >= pose.num_parts:
        raise ValueError(f"part index {part} out of range ({pose.num_parts} parts)")
    b = pose.part_transforms[part]
    rt = b[:3, :3].T
    x = rt @ (np.asarray(x_o, dtype=np.float64) - b[:3, 3])
    n = rt @ np.asarray(n_o, dtype=np.float64)
    return x, n


def part_canonicalize_batch(x_o, n_o, part, pose: Pose):
    """part_canonicalize over point/normal arrays [N,3]."""
    b = pose.part_transforms[part]
    rt = b[:3, :3].T
    x = (np.asarray(x_o, dtype=np.float64) - b[:3, 3]) @ rt.T
    n = np.asarray(n_o, dtype=np.float64) @ rt.T
    return x, n
