"""Cubemap storage, direction mapping, exact texel solid angles, and sampling.

Face order and orientation follow the usual +x,-x,+y,-y,+z,-z layout. For
face-local coordinates (u, v) in [-1, 1] the world direction is::

    +x: ( 1, -v, -u)    -x: (-1, -v,  u)
    +y: ( u,  1,  v)    -y: ( u, -1, -v)
    +z: ( u, -v,  1)    -z: (-u, -v, -1)

u runs with the face's pixel column, v with its row (row 0 = top).
"""

from __future__ import annotations

import numpy as np

FACE_NAMES = ("+x", "-x", "+y", "-y", "+z", "-z")


def _face_dir(face, u, v):
    one = np.ones_like(u)
    if face == 0:
        return np.stack([one, -v, -u], axis=-1)
    if face == 1:
        return np.stack([-one, -v, u], axis=-1)
    if face == 2:
        return np.stack([u, one, v], axis=-1)
    if face == 3:
        return np.stack([u, -one, -v], axis=-1)
    if face == 4:
        return np.stack([u, -v, one], axis=-1)
    return np.stack([-u, -v, -one], axis=-1)


def _dir_to_face_uv(d):
    """Directions [N,3] -> (face [N], u [N], v [N]) with u,v in [-1,1]."""
    d = np.asarray(d, dtype=np.float64)
    ax, ay, az = np.abs(d[:, 0]), np.abs(d[:, 1]), np.abs(d[:, 2])
    face = np.where(
        (ax >= ay) & (ax >= az),
        np.where(d[:, 0] >= 0, 0, 1),
        np.where(ay >= az, np.where(d[:, 1] >= 0, 2, 3), np.where(d[:, 2] >= 0, 4, 5)),
    )
    major = np.choose(face, [d[:, 0], -d[:, 0], d[:, 1], -d[:, 1], d[:, 2], -d[:, 2]])
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    u = np.choose(face, [-z, z, x, x, x, -x]) / major
    v = np.choose(face, [-y, -y, z, -z, -y, -y]) / major
    return face, u, v


def _area_element(x, y):
    return np.arctan2(x * y, np.sqrt(x * x + y * y + 1.0))


class Cubemap:
    """Six square float faces, shape [6, R, R, C]."""

    def __init__(self, faces):
        f = np.asarray(faces, dtype=np.float32)
        if f.ndim == 3:
            f = f[..., None]
        if f.ndim != 4 or f.shape[0] != 6 or f.shape[1] != f.shape[2]:
            raise ValueError(f"cubemap faces must be [6, R, R, C], got {f.shape}")
        self.faces = f

    @property
    def resolution(self):
        return self.faces.shape[1]

    @property
    def channels(self):
        return self.faces.shape[3]

    @classmethod
    def constant(cls, value, resolution=16):
        value = np.atleast_1d(np.asarray(value, dtype=np.float32))
        f = np.broadcast_to(value, (6, resolution, resolution, value.size)).copy()
        return cls(f)

    @classmethod
    def from_function(cls, fn, resolution):
        """Evaluate fn(dirs [N,3]) -> [N,C] at every texel center direction."""
        dirs = cls.texel_directions(resolution)  # [6,R,R,3]
        vals = np.asarray(fn(dirs.reshape(-1, 3)), dtype=np.float32)
        if vals.ndim == 1:
            vals = vals[:, None]
        return cls(vals.reshape(6, resolution, resolution, -1))

    @staticmethod
    def texel_centers_1d(resolution):
        return (np.arange(resolution) + 0.5) / resolution * 2.0 - 1.0

    @classmethod
    def texel_directions(cls, resolution, normalized=True):
        """Unit directions of all texel centers: [6, R, R, 3]."""
        c = cls.texel_centers_1d(resolution)
        u, v = np.meshgrid(c, c)  # v varies along rows
        out = np.empty((6, resolution, resolution, 3))
        for face in range(6):
            out[face] = _face_dir(face, u, v)
        if normalized:
            out /= np.linalg.norm(out, axis=-1, keepdims=True)
        return out

    @classmethod
    def texel_solid_angles(cls, resolution):
        """Exact per-texel solid angles [R, R]; identical on every face, sums to 4pi/6."""
        edges = np.linspace(-1.0, 1.0, resolution + 1)
        x0, y0 = np.meshgrid(edges[:-1], edges[:-1])
        x1, y1 = np.meshgrid(edges[1:], edges[1:])
        return (_area_element(x1, y1) - _area_element(x0, y1) - _area_element(x1, y0) + _area_element(x0, y0)).astype(
            np.float64
        )

    def sample_nearest(self, dirs):
        dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        face, u, v = _dir_to_face_uv(dirs)
        r = self.resolution
        col = np.clip(((u + 1) * 0.5 * r).astype(np.int64), 0, r - 1)
        row = np.clip(((v + 1) * 0.5 * r).astype(np.int64), 0, r - 1)
        return self.faces[face, row, col].astype(np.float64)

    def sample_bilinear(self, dirs):
        """Bilinear fetch within the hit face (clamp at edges), dirs [N,3] -> [N,C]."""
        dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        face, u, v = _dir_to_face_uv(dirs)
        r = self.resolution
        fu = (u + 1) * 0.5 * r - 0.5
        fv = (v + 1) * 0.5 * r - 0.5
        c0 = np.clip(np.floor(fu).astype(np.int64), 0, r - 1)
        r0 = np.clip(np.floor(fv).astype(np.int64), 0, r - 1)
        c1 = np.minimum(c0 + 1, r - 1)
        r1 = np.minimum(r0 + 1, r - 1)
        tu = np.clip(fu - np.floor(fu), 0.0, 1.0)[:, None]
        tv = np.clip(fv - np.floor(fv), 0.0, 1.0)[:, None]
        f = self.faces
        top = f[face, r0, c0] * (1 - tu) + f[face, r0, c1] * tu
        bot = f[face, r1, c0] * (1 - tu) + f[face, r1, c1] * tu
        return (top * (1 - tv) + bot * tv).astype(np.float64)

    def downsample(self):
        """2x box downsample of every face (resolution must be even)."""
        f = self.faces.astype(np.float64)
        r = self.resolution
        if r == 1:
            return Cubemap(self.faces.copy())
        g = f.reshape(6, r // 2, 2, r // 2, 2, -1).mean(axis=(2, 4))
        return Cubemap(g)

    def total_energy(self):
        """Solid-angle-weighted integral of the map over the sphere, per channel."""
        w = self.texel_solid_angles(self.resolution)
        return np.einsum("frck,rc->k", self.faces.astype(np.float64), w)
