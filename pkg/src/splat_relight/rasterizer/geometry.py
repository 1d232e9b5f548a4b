"""Exact ray/splat intersection and front-to-back alpha compositing.

These are the reference-precision building blocks: scalar/list based, used
directly by tests and small scenes. Frame rendering runs the same math
through the tiled kernel in kernel.py.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAUSSIAN_CUTOFF = 3.0
_PARALLEL_EPS = 1e-8


@dataclass(frozen=True)
class SplatFragment:
    """One ray-splat hit: tangent-frame uv (scale-normalized), ray depth, and
    the bounded Gaussian density ghat = exp(-(u^2+v^2)/2), zero beyond the
    3-sigma cutoff."""

    splat: int
    uv: np.ndarray
    depth: float
    ghat: float


def ray_splat_intersect(origin, direction, splat, index=0):
    """Intersect a ray with a posed splat's tangent plane.

    Returns a SplatFragment, or None when the hit is behind the origin,
    outside the 3-sigma extent, or the ray is parallel to the plane.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    n = splat.R_o[:, 2]
    denom = float(n @ d)
    if abs(denom) < _PARALLEL_EPS:
        return None
    t = float(n @ (splat.mu_o - o)) / denom
    if t <= 0:
        return None
    local = o + t * d - splat.mu_o
    u = float(splat.R_o[:, 0] @ local) / float(splat.s[0])
    v = float(splat.R_o[:, 1] @ local) / float(splat.s[1])
    if abs(u) > GAUSSIAN_CUTOFF or abs(v) > GAUSSIAN_CUTOFF:
        return None
    ghat = float(np.exp(-0.5 * (u * u + v * v)))
    return SplatFragment(index, np.array([u, v]), t, ghat)


def composite(fragments, colors, opacities=None):
    """Front-to-back alpha compositing of depth-sorted fragments:

        I = sum_i c_i alpha_i prod_{j<i} (1 - alpha_j),  alpha_i = o_i ghat_i

    colors[i] is the color of fragments[i] (any channel count); opacities
    optionally override per-fragment opacity (defaults to 1, i.e. alpha =
    ghat). Returns (composited value, accumulated weight). Raises on
    unsorted input.
    """
    if not fragments:
        return np.zeros(np.asarray(colors).shape[1] if np.ndim(colors) == 2 else 3), 0.0
    depths = [f.depth for f in fragments]
    if any(b < a for a, b in zip(depths, depths[1:])):
        raise ValueError("fragments must be sorted ascending by depth")
    colors = np.atleast_2d(np.asarray(colors, dtype=np.float64))
    out = np.zeros(colors.shape[1])
    transmittance = 1.0
    weight = 0.0
    for i, frag in enumerate(fragments):
        o = 1.0 if opacities is None else float(opacities[i])
        alpha = o * frag.ghat
        w = alpha * transmittance
        out += w * colors[i]
        weight += w
        transmittance *= 1.0 - alpha
    return out, weight
