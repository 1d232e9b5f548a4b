"""Analytic teacher: procedural SDF geometry and closed-form material fields.

The teacher answers point queries (signed distance, gradient normal,
roughness/metallic/albedo) and ray queries (exact intersections, sphere
tracing) in canonical space; posed queries go through exact per-part rigid
inverses. Primitives are spheres, capsules, and planes, each owned by one
rigid body part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.types import ALBEDO_MAX, ALBEDO_MIN, Pose

_RAY_EPS = 1e-7


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    part: int = 0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))

    def sdf(self, x):
        return np.linalg.norm(x - self.center, axis=-1) - self.radius

    def ray_hits(self, o, d, t_min, t_max):
        oc = o - self.center
        b = np.einsum("...i,...i->...", oc, d)
        c = np.einsum("...i,...i->...", oc, oc) - self.radius**2
        disc = b * b - c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 > t_min, t0, t1)
        return hit & (t > t_min) & (t < t_max)

    def bounds(self):
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float
    part: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=np.float64))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=np.float64))

    def sdf(self, x):
        pa = x - self.p0
        ba = self.p1 - self.p0
        h = np.clip(np.einsum("...i,i->...", pa, ba) / (ba @ ba), 0.0, 1.0)
        return np.linalg.norm(pa - h[..., None] * ba, axis=-1) - self.radius

    def ray_hits(self, o, d, t_min, t_max):
        # closest-approach quadratic between the ray and the capsule axis
        ba = self.p1 - self.p0
        oa = o - self.p0
        baba = ba @ ba
        bard = np.einsum("...i,i->...", d, ba)
        baoa = np.einsum("...i,i->...", oa, ba)
        rdoa = np.einsum("...i,...i->...", d, oa)
        oaoa = np.einsum("...i,...i->...", oa, oa)
        a = baba - bard * bard
        b = baba * rdoa - baoa * bard
        c = baba * oaoa - baoa * baoa - self.radius**2 * baba
        disc = b * b - a * c
        can = disc >= 0
        sq = np.sqrt(np.where(can, disc, 0.0))
        a_safe = np.where(np.abs(a) < 1e-12, 1e-12, a)
        hit = np.zeros(np.shape(c), dtype=bool)
        for t_cyl in ((-b - sq) / a_safe, (-b + sq) / a_safe):  # near root, then far (inside origins)
            y = baoa + t_cyl * bard
            hit = hit | (can & (y > 0) & (y < baba) & (t_cyl > t_min) & (t_cyl < t_max))
        for cap_center in (self.p0, self.p1):
            oc = o - cap_center
            bq = np.einsum("...i,...i->...", oc, d)
            cq = np.einsum("...i,...i->...", oc, oc) - self.radius**2
            dq = bq * bq - cq
            okq = dq >= 0
            sqq = np.sqrt(np.where(okq, dq, 0.0))
            t0 = -bq - sqq
            t1 = -bq + sqq
            tc = np.where(t0 > t_min, t0, t1)
            hit = hit | (okq & (tc > t_min) & (tc < t_max))
        return hit

    def bounds(self):
        lo = np.minimum(self.p0, self.p1) - self.radius
        hi = np.maximum(self.p0, self.p1) + self.radius
        return lo, hi


@dataclass(frozen=True)
class Plane:
    """Half-space occluder: sdf = n . x - offset (inside where negative)."""

    normal: np.ndarray
    offset: float
    part: int = 0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        object.__setattr__(self, "normal", n / np.linalg.norm(n))

    def sdf(self, x):
        return np.einsum("...i,i->...", x, self.normal) - self.offset

    def ray_hits(self, o, d, t_min, t_max):
        dn = np.einsum("...i,i->...", d, self.normal)
        on = np.einsum("...i,i->...", o, self.normal) - self.offset
        t = np.where(np.abs(dn) > 1e-12, -on / np.where(np.abs(dn) > 1e-12, dn, 1.0), np.inf)
        crosses = (t > t_min) & (t < t_max)
        inside = on < 0
        return crosses | inside

    def bounds(self):
        big = 1e6
        return np.full(3, -big), np.full(3, big)


def _smooth01(x):
    return 0.5 + 0.5 * np.tanh(x)


@dataclass(frozen=True)
class ProceduralMaterial:
    """Smooth closed-form material fields over canonical position.

    Ranges: albedo in [0.03, 0.8], roughness in [rough_lo, rough_hi],
    metallic in [0, metal_hi]. Smoothness everywhere keeps finite-difference
    gradient checks meaningful.
    """

    base_albedo: np.ndarray = field(default_factory=lambda: np.array([0.45, 0.38, 0.32]))
    albedo_variation: float = 0.12
    rough_lo: float = 0.35
    rough_hi: float = 0.85
    metal_hi: float = 0.35

    def __post_init__(self):
        object.__setattr__(self, "base_albedo", np.asarray(self.base_albedo, dtype=np.float64))

    def albedo(self, x):
        x = np.asarray(x, dtype=np.float64)
        wob = np.stack(
            [
                np.sin(3.1 * x[..., 0] + 1.7 * x[..., 1]),
                np.sin(2.3 * x[..., 1] + 2.9 * x[..., 2] + 1.0),
                np.sin(2.7 * x[..., 2] + 1.3 * x[..., 0] + 2.0),
            ],
            axis=-1,
        )
        a = self.base_albedo + self.albedo_variation * wob
        return np.clip(a, ALBEDO_MIN, ALBEDO_MAX)

    def roughness(self, x):
        x = np.asarray(x, dtype=np.float64)
        t = _smooth01(1.5 * np.sin(4.1 * x[..., 0] + 2.3 * x[..., 1] - 1.9 * x[..., 2]))
        return self.rough_lo + (self.rough_hi - self.rough_lo) * t

    def metallic(self, x):
        x = np.asarray(x, dtype=np.float64)
        t = _smooth01(2.0 * np.sin(2.2 * x[..., 1] + 3.1 * x[..., 2]) - 1.0)
        return self.metal_hi * t


class AnalyticScene:
    """Occluder set + material fields + signed-distance evaluator."""

    def __init__(self, primitives, material=None, num_parts=None):
        self.primitives = tuple(primitives)
        self.material = material if material is not None else ProceduralMaterial()
        if num_parts is None:
            num_parts = (max(p.part for p in self.primitives) + 1) if self.primitives else 1
        self.num_parts = num_parts

    def sdf(self, x):
        """min over primitives; positive outside, negative inside."""
        x = np.asarray(x, dtype=np.float64)
        if not self.primitives:
            return np.full(x.shape[:-1], np.inf)
        return np.min(np.stack([p.sdf(x) for p in self.primitives]), axis=0)

    def sdf_gradient(self, x, h=1e-5):
        """Central-difference gradient of the scene SDF."""
        x = np.asarray(x, dtype=np.float64)
        g = np.empty_like(x)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            g[..., k] = (self.sdf(x + e) - self.sdf(x - e)) / (2 * h)
        return g

    def normal(self, x):
        g = self.sdf_gradient(x)
        n = np.linalg.norm(g, axis=-1, keepdims=True)
        return g / np.where(n > 0, n, 1.0)

    def ray_hits(self, o, d, t_min=_RAY_EPS, t_max=np.inf, exclude_parts=()):
        """Boolean any-hit query for rays (o [.,3], d unit [.,3])."""
        o = np.asarray(o, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        hit = np.zeros(np.broadcast(o[..., 0], d[..., 0]).shape, dtype=bool)
        for p in self.primitives:
            if p.part in exclude_parts:
                continue
            hit = hit | p.ray_hits(o, d, t_min, t_max)
        return hit

    def part_primitives(self, part):
        return [p for p in self.primitives if p.part == part]

    def posed(self, pose: Pose):
        return PosedAnalyticScene(self, pose)

    def sphere_trace(self, o, d, t_max=20.0, steps=128, eps=1e-4):
        """Sphere-trace rays against the SDF; returns (hit mask, t)."""
        o = np.asarray(o, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        n = o.shape[0]
        t = np.zeros(n)
        done = np.zeros(n, dtype=bool)
        hit = np.zeros(n, dtype=bool)
        for _ in range(steps):
            active = ~done
            if not np.any(active):
                break
            x = o[active] + t[active, None] * d[active]
            dist = self.sdf(x)
            close = dist < eps
            idx = np.flatnonzero(active)
            hit[idx[close]] = True
            done[idx[close]] = True
            t[idx[~close]] += dist[~close]
            over = t[idx] > t_max
            done[idx[over]] = True
        return hit, t


def teacher_query(scene: AnalyticScene, x_c):
    """Point query of the teacher fields at canonical positions.

    Returns (sdf, roughness, metallic, albedo, normal); the normal is the
    normalized SDF gradient.
    """
    x = np.asarray(x_c, dtype=np.float64)
    return (
        scene.sdf(x),
        scene.material.roughness(x),
        scene.material.metallic(x),
        scene.material.albedo(x),
        scene.normal(x),
    )


class PosedAnalyticScene:
    """The teacher geometry under a pose: each part transformed rigidly by
    B_p(theta); queries invert the per-part transform exactly."""

    def __init__(self, scene: AnalyticScene, pose: Pose):
        if pose.num_parts < scene.num_parts:
            raise ValueError(f"pose has {pose.num_parts} part transforms, scene needs {scene.num_parts}")
        self.scene = scene
        self.pose = pose
        self._inv_rot = pose.part_transforms[:, :3, :3].transpose(0, 2, 1)
        self._trans = pose.part_transforms[:, :3, 3]

    def _to_part(self, x, part):
        return (x - self._trans[part]) @ self._inv_rot[part].T

    def sdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        best = np.full(x.shape[:-1], np.inf)
        for p in self.scene.primitives:
            best = np.minimum(best, p.sdf(self._to_part(x, p.part)))
        return best

    def ray_hits(self, o, d, t_min=_RAY_EPS, t_max=np.inf):
        o = np.asarray(o, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        hit = np.zeros(np.broadcast(o[..., 0], d[..., 0]).shape, dtype=bool)
        for p in self.scene.primitives:
            oc = self._to_part(o, p.part)
            dc = d @ self._inv_rot[p.part].T
            hit = hit | p.ray_hits(oc, dc, t_min, t_max)
        return hit

    def normal(self, x, h=1e-5):
        x = np.asarray(x, dtype=np.float64)
        g = np.empty_like(x)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            g[..., k] = (self.sdf(x + e) - self.sdf(x - e)) / (2 * h)
        n = np.linalg.norm(g, axis=-1, keepdims=True)
        return g / np.where(n > 0, n, 1.0)

    def sphere_trace(self, o, d, t_max=20.0, steps=128, eps=1e-4):
        o = np.asarray(o, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        n = o.shape[0]
        t = np.zeros(n)
        done = np.zeros(n, dtype=bool)
        hit = np.zeros(n, dtype=bool)
        for _ in range(steps):
            active = ~done
            if not np.any(active):
                break
            x = o[active] + t[active, None] * d[active]
            dist = self.sdf(x)
            close = dist < eps
            idx = np.flatnonzero(active)
            hit[idx[close]] = True
            done[idx[close]] = True
            t[idx[~close]] += dist[~close]
            over = t[idx] > t_max
            done[idx[over]] = True
        return hit, t

    def nearest_part_point(self, x):
        """Canonical-space point and owning part of the posed-space point x
        (by smallest per-part SDF)."""
        x = np.asarray(x, dtype=np.float64)
        best = np.inf
        out = (x, 0)
        for p in self.scene.primitives:
            xc = self._to_part(x, p.part)
            d = float(p.sdf(xc))
            if d < best:
                best = d
                out = (xc, p.part)
        return out
