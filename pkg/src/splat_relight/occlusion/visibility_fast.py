"""Numba-accelerated any-hit ray casting against capsule sets.

Probe baking fires hundreds of millions of visibility rays; this kernel
handles the analytic capsule/sphere backend (spheres are capsules with
coincident endpoints). Results match the numpy path in oracle.analytic
exactly (same quadratics, same near/far root handling for interior
origins).
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def capsule_any_hit(origins, dirs, seg_a, seg_b, radii, t_min, t_max):
    n_rays = origins.shape[0]
    n_caps = seg_a.shape[0]
    out = np.zeros(n_rays, dtype=np.bool_)
    for r in prange(n_rays):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        hit = False
        for c in range(n_caps):
            bax = seg_b[c, 0] - seg_a[c, 0]
            bay = seg_b[c, 1] - seg_a[c, 1]
            baz = seg_b[c, 2] - seg_a[c, 2]
            oax = ox - seg_a[c, 0]
            oay = oy - seg_a[c, 1]
            oaz = oz - seg_a[c, 2]
            rad2 = radii[c] * radii[c]
            baba = bax * bax + bay * bay + baz * baz
            if baba > 1e-18:
                bard = bax * dx + bay * dy + baz * dz
                baoa = bax * oax + bay * oay + baz * oaz
                rdoa = dx * oax + dy * oay + dz * oaz
                oaoa = oax * oax + oay * oay + oaz * oaz
                a = baba - bard * bard
                b = baba * rdoa - baoa * bard
                cc = baba * oaoa - baoa * baoa - rad2 * baba
                disc = b * b - a * cc
                if disc >= 0.0 and abs(a) > 1e-12:
                    sq = np.sqrt(disc)
                    for sgn in (-1.0, 1.0):  # near root, then far (interior origins)
                        t = (-b + sgn * sq) / a
                        if t_min < t < t_max:
                            y = baoa + t * bard
                            if 0.0 < y < baba:
                                hit = True
                                break
                if hit:
                    break
            # end-cap spheres (the full capsule is cylinder-slab U end spheres)
            for ex, ey, ez in ((seg_a[c, 0], seg_a[c, 1], seg_a[c, 2]),
                               (seg_b[c, 0], seg_b[c, 1], seg_b[c, 2])):
                ocx = ox - ex
                ocy = oy - ey
                ocz = oz - ez
                bq = ocx * dx + ocy * dy + ocz * dz
                cq = ocx * ocx + ocy * ocy + ocz * ocz - rad2
                dq = bq * bq - cq
                if dq >= 0.0:
                    sqq = np.sqrt(dq)
                    t0 = -bq - sqq
                    t1 = -bq + sqq
                    t = t0 if t0 > t_min else t1
                    if t_min < t < t_max:
                        hit = True
                        break
            if hit:
                break
        out[r] = hit
    return out


def capsule_arrays(primitives):
    """(seg_a, seg_b, radii) arrays for a capsule/sphere-only primitive list,
    or None when other primitive types are present."""
    from ..oracle.analytic import Capsule, Sphere

    seg_a = []
    seg_b = []
    radii = []
    for p in primitives:
        if isinstance(p, Capsule):
            seg_a.append(p.p0)
            seg_b.append(p.p1)
            radii.append(p.radius)
        elif isinstance(p, Sphere):
            seg_a.append(p.center)
            seg_b.append(p.center)
            radii.append(p.radius)
        else:
            return None
    return (
        np.ascontiguousarray(seg_a, dtype=np.float64),
        np.ascontiguousarray(seg_b, dtype=np.float64),
        np.ascontiguousarray(radii, dtype=np.float64),
    )
