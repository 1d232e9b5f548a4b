"""Dense all-splats-per-ray renderer (pure numpy).

For every ray it intersects every splat, sorts by depth, and applies exact
front-to-back compositing via a cumulative product. Cost is O(rays x
splats): perfect for loss evaluation over ray subsets, finite-difference
probing, and validating the tiled kernel on small scenes; unusable for
full frames of large clouds.
"""

from __future__ import annotations

import numpy as np

from .geometry import GAUSSIAN_CUTOFF

_PARALLEL_EPS = 1e-8


def ray_splat_alphas(origins, dirs, mu, rot, s, opacity):
    """Per-(ray, splat) alpha and depth matrices: [R, N] each.

    Misses hold alpha 0 and depth +inf. Depth ties are later broken by splat
    index via lexicographic sort keys.
    """
    o = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    n = rot[:, :, 2]  # [N,3]
    denom = d @ n.T  # [R,N]
    numer = np.einsum("nk,nk->n", mu, n)[None, :] - o @ n.T
    safe = np.abs(denom) > _PARALLEL_EPS
    t = np.where(safe, numer / np.where(safe, denom, 1.0), np.inf)
    hit = o[:, None, :] + t[..., None] * d[:, None, :] - mu[None, :, :]
    u = np.einsum("rnk,nk->rn", hit, rot[:, :, 0]) / s[None, :, 0]
    v = np.einsum("rnk,nk->rn", hit, rot[:, :, 1]) / s[None, :, 1]
    inside = (
        safe
        & (t > 1e-6)
        & np.isfinite(t)
        & (np.abs(u) <= GAUSSIAN_CUTOFF)
        & (np.abs(v) <= GAUSSIAN_CUTOFF)
    )
    alpha = np.where(inside, opacity[None, :] * np.exp(-0.5 * (u * u + v * v)), 0.0)
    depth = np.where(inside, t, np.inf)
    return alpha, depth


def composite_rays(alpha, depth, values):
    """Exact Eq.-13 compositing of dense per-ray fragment matrices.

    alpha, depth: [R, N]; values: [N, C] shared across rays, or [R, N, C]
    per ray. Returns (img [R, C], weight [R], mean_depth [R], per-fragment
    weights [R, N] in splat order).
    """
    r, n = alpha.shape
    order = np.lexsort((np.broadcast_to(np.arange(n), (r, n)), depth), axis=1)
    a_sorted = np.take_along_axis(alpha, order, axis=1)
    t_sorted = np.take_along_axis(depth, order, axis=1)
    trans = np.cumprod(1.0 - a_sorted, axis=1)
    trans_before = np.concatenate([np.ones((r, 1)), trans[:, :-1]], axis=1)
    w_sorted = a_sorted * trans_before
    if values.ndim == 3:
        vals_sorted = np.take_along_axis(values, order[..., None], axis=1)
    else:
        vals_sorted = values[order]  # [R,N,C]
    img = (w_sorted[..., None] * vals_sorted).sum(axis=1)
    weight = w_sorted.sum(axis=1)
    finite_t = np.where(np.isfinite(t_sorted), t_sorted, 0.0)
    mean_depth = (w_sorted * finite_t).sum(axis=1) / np.where(weight > 0, weight, 1.0)
    # scatter per-fragment weights back to splat order
    w_unsorted = np.zeros_like(w_sorted)
    np.put_along_axis(w_unsorted, order, w_sorted, axis=1)
    return img, weight, mean_depth, w_unsorted


def render_rays(origins, dirs, mu, rot, s, opacity, values):
    """Full dense pipeline: (img [R,C], weight [R], mean depth [R])."""
    alpha, depth = ray_splat_alphas(origins, dirs, mu, rot, s, opacity)
    img, weight, mean_depth, _ = composite_rays(alpha, depth, np.atleast_2d(values))
    return img, weight, mean_depth
