"""Tiled software rasterizer for 2D Gaussian splats (numba).

Exact per-pixel depth sort with deterministic splat-index tie-break, then
sequential front-to-back compositing with early termination once
transmittance falls below a threshold. Tiles are processed in parallel and
write disjoint pixels, so output is independent of thread schedule.

SPLAT_RELIGHT_THREADS (if set) caps the worker count.
"""

from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

TILE = 16
MAX_FRAGS_PER_PIXEL = 512
_NEAR = 1e-6

_cap = os.environ.get("SPLAT_RELIGHT_THREADS")
if _cap:
    try:
        numba.set_num_threads(max(1, min(int(_cap), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        pass


@njit(cache=True)
def _project_bboxes(mu, rot, s, cam_rot, cam_center, fx, fy, cx, cy, width, height):
    """Conservative integer pixel bboxes of the 3-sigma splat quads.

    Returns [N,4] (x0, y0, x1, y1) inclusive, or x0 = -1 for culled splats.
    """
    n = mu.shape[0]
    out = np.empty((n, 4), dtype=np.int64)
    for i in range(n):
        minx = 1e30
        miny = 1e30
        maxx = -1e30
        maxy = -1e30
        behind = 0
        for ca in range(4):
            su = 3.0 * s[i, 0] * (1.0 if ca % 2 == 0 else -1.0)
            sv = 3.0 * s[i, 1] * (1.0 if ca // 2 == 0 else -1.0)
            wx = mu[i, 0] + su * rot[i, 0, 0] + sv * rot[i, 0, 1] - cam_center[0]
            wy = mu[i, 1] + su * rot[i, 1, 0] + sv * rot[i, 1, 1] - cam_center[1]
            wz = mu[i, 2] + su * rot[i, 2, 0] + sv * rot[i, 2, 1] - cam_center[2]
            px = cam_rot[0, 0] * wx + cam_rot[0, 1] * wy + cam_rot[0, 2] * wz
            py = cam_rot[1, 0] * wx + cam_rot[1, 1] * wy + cam_rot[1, 2] * wz
            pz = cam_rot[2, 0] * wx + cam_rot[2, 1] * wy + cam_rot[2, 2] * wz
            if pz < 1e-4:
                behind += 1
                continue
            sx = fx * px / pz + cx
            sy = fy * py / pz + cy
            if sx < minx:
                minx = sx
            if sx > maxx:
                maxx = sx
            if sy < miny:
                miny = sy
            if sy > maxy:
                maxy = sy
        if behind == 4:
            out[i, 0] = -1
            continue
        if behind > 0:
            # quad crosses the camera plane; fall back to the full frame
            minx, miny, maxx, maxy = 0.0, 0.0, width - 1.0, height - 1.0
        x0 = int(np.floor(minx)) - 1
        y0 = int(np.floor(miny)) - 1
        x1 = int(np.ceil(maxx)) + 1
        y1 = int(np.ceil(maxy)) + 1
        if x1 < 0 or y1 < 0 or x0 >= width or y0 >= height:
            out[i, 0] = -1
            continue
        out[i, 0] = max(x0, 0)
        out[i, 1] = max(y0, 0)
        out[i, 2] = min(x1, width - 1)
        out[i, 3] = min(y1, height - 1)
    return out


@njit(cache=True, parallel=True)
def _rasterize(
    mu, rot, s, opacity, values, bboxes,
    cam_rot, cam_center, fx, fy, cx, cy,
    width, height, t_min_transmittance,
):
    channels = values.shape[1]
    img = np.zeros((height, width, channels))
    weight = np.zeros((height, width))
    depth = np.zeros((height, width))

    tiles_x = (width + TILE - 1) // TILE
    tiles_y = (height + TILE - 1) // TILE
    n_tiles = tiles_x * tiles_y
    n = mu.shape[0]

    # bin splats to tiles (CSR); fill pass iterates splats in index order so
    # per-tile candidate lists stay sorted by splat index
    counts = np.zeros(n_tiles + 1, dtype=np.int64)
    for i in range(n):
        if bboxes[i, 0] < 0:
            continue
        tx0 = bboxes[i, 0] // TILE
        ty0 = bboxes[i, 1] // TILE
        tx1 = bboxes[i, 2] // TILE
        ty1 = bboxes[i, 3] // TILE
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                counts[ty * tiles_x + tx + 1] += 1
    for t in range(n_tiles):
        counts[t + 1] += counts[t]
    fill = counts[:-1].copy()
    cand = np.empty(counts[n_tiles], dtype=np.int64)
    for i in range(n):
        if bboxes[i, 0] < 0:
            continue
        tx0 = bboxes[i, 0] // TILE
        ty0 = bboxes[i, 1] // TILE
        tx1 = bboxes[i, 2] // TILE
        ty1 = bboxes[i, 3] // TILE
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                t = ty * tiles_x + tx
                cand[fill[t]] = i
                fill[t] += 1

    inv_rot = cam_rot.T.copy()
    for tile in prange(n_tiles):
        start = counts[tile]
        end = counts[tile + 1]
        if end == start:
            continue
        tx = tile % tiles_x
        ty = tile // tiles_x
        frag_t = np.empty(MAX_FRAGS_PER_PIXEL)
        frag_i = np.empty(MAX_FRAGS_PER_PIXEL, dtype=np.int64)
        frag_a = np.empty(MAX_FRAGS_PER_PIXEL)
        for py in range(ty * TILE, min((ty + 1) * TILE, height)):
            for px in range(tx * TILE, min((tx + 1) * TILE, width)):
                dcx = (px + 0.5 - cx) / fx
                dcy = (py + 0.5 - cy) / fy
                dxw = inv_rot[0, 0] * dcx + inv_rot[0, 1] * dcy + inv_rot[0, 2]
                dyw = inv_rot[1, 0] * dcx + inv_rot[1, 1] * dcy + inv_rot[1, 2]
                dzw = inv_rot[2, 0] * dcx + inv_rot[2, 1] * dcy + inv_rot[2, 2]
                dn = np.sqrt(dxw * dxw + dyw * dyw + dzw * dzw)
                dxw /= dn
                dyw /= dn
                dzw /= dn
                count = 0
                for ci in range(start, end):
                    i = cand[ci]
                    if px < bboxes[i, 0] or px > bboxes[i, 2] or py < bboxes[i, 1] or py > bboxes[i, 3]:
                        continue
                    nx = rot[i, 0, 2]
                    ny = rot[i, 1, 2]
                    nz = rot[i, 2, 2]
                    denom = nx * dxw + ny * dyw + nz * dzw
                    if denom > -1e-8 and denom < 1e-8:
                        continue
                    t = (
                        nx * (mu[i, 0] - cam_center[0])
                        + ny * (mu[i, 1] - cam_center[1])
                        + nz * (mu[i, 2] - cam_center[2])
                    ) / denom
                    if t <= _NEAR:
                        continue
                    hx = cam_center[0] + t * dxw - mu[i, 0]
                    hy = cam_center[1] + t * dyw - mu[i, 1]
                    hz = cam_center[2] + t * dzw - mu[i, 2]
                    u = (hx * rot[i, 0, 0] + hy * rot[i, 1, 0] + hz * rot[i, 2, 0]) / s[i, 0]
                    v = (hx * rot[i, 0, 1] + hy * rot[i, 1, 1] + hz * rot[i, 2, 1]) / s[i, 1]
                    if abs(u) > 3.0 or abs(v) > 3.0:
                        continue
                    g2 = u * u + v * v
                    alpha = opacity[i] * np.exp(-0.5 * g2)
                    if alpha <= 0.0:
                        continue
                    if count < MAX_FRAGS_PER_PIXEL:
                        frag_t[count] = t
                        frag_i[count] = i
                        frag_a[count] = alpha
                        count += 1
                    else:
                        # buffer full: replace the farthest fragment if nearer
                        far = 0
                        for k in range(1, count):
                            if frag_t[k] > frag_t[far]:
                                far = k
                        if t < frag_t[far]:
                            frag_t[far] = t
                            frag_i[far] = i
                            frag_a[far] = alpha
                if count == 0:
                    continue
                # insertion sort by depth; equal depths keep splat-index order
                for k in range(1, count):
                    kt = frag_t[k]
                    ki = frag_i[k]
                    ka = frag_a[k]
                    j = k - 1
                    while j >= 0 and (frag_t[j] > kt or (frag_t[j] == kt and frag_i[j] > ki)):
                        frag_t[j + 1] = frag_t[j]
                        frag_i[j + 1] = frag_i[j]
                        frag_a[j + 1] = frag_a[j]
                        j -= 1
                    frag_t[j + 1] = kt
                    frag_i[j + 1] = ki
                    frag_a[j + 1] = ka
                transmittance = 1.0
                wsum = 0.0
                dsum = 0.0
                for k in range(count):
                    w = frag_a[k] * transmittance
                    idx = frag_i[k]
                    for c in range(channels):
                        img[py, px, c] += w * values[idx, c]
                    wsum += w
                    dsum += w * frag_t[k]
                    transmittance *= 1.0 - frag_a[k]
                    if transmittance < t_min_transmittance:
                        break
                weight[py, px] = wsum
                depth[py, px] = dsum
    return img, weight, depth


def rasterize_values(mu, rot, s, opacity, values, camera, t_min_transmittance=1e-7):
    """Composite per-splat value vectors into a frame.

    Returns (img [H,W,C], weight [H,W], depth [H,W]); depth holds the
    weight-accumulated ray distance (divide by weight for the mean).
    """
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    rot = np.ascontiguousarray(rot, dtype=np.float64)
    s = np.ascontiguousarray(s, dtype=np.float64)
    opacity = np.ascontiguousarray(opacity, dtype=np.float64)
    values = np.ascontiguousarray(np.atleast_2d(values), dtype=np.float64)
    cam_rot = np.ascontiguousarray(camera.rotation, dtype=np.float64)
    cam_center = np.ascontiguousarray(camera.center, dtype=np.float64)
    bboxes = _project_bboxes(
        mu, rot, s, cam_rot, cam_center,
        camera.fx, camera.fy, camera.cx, camera.cy, camera.width, camera.height,
    )
    return _rasterize(
        mu, rot, s, opacity, values, bboxes,
        cam_rot, cam_center, camera.fx, camera.fy, camera.cx, camera.cy,
        camera.width, camera.height, t_min_transmittance,
    )
