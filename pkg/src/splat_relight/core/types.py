"""Domain types shared by the whole engine.

All types are immutable after construction (mutation = whole-value
replacement) and therefore safe to share across concurrent readers.
Scalars and small vectors are float32 unless noted; accumulation-heavy
code upcasts to float64 internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ALBEDO_MIN = 0.03
ALBEDO_MAX = 0.8
DEFAULT_NUM_PARTS = 9


def _as_f32(x, shape=None):
    a = np.asarray(x, dtype=np.float32)
    if shape is not None and a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    return a


def quat_to_matrix(q):
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = (float(v) for v in q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def quats_to_matrices(q):
    """Batched quaternion -> rotation matrix, q: [N,4] (w,x,y,z) -> [N,3,3]."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def matrix_to_quat(m):
    """Unit quaternion (w, x, y, z) of a rotation matrix."""
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array([(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array([(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s])
    return q / np.linalg.norm(q)


def is_rigid(mat, tol=1e-6):
    """True if the 4x4 (or 3x3) transform has an orthonormal, det=+1 rotation block."""
    m = np.asarray(mat, dtype=np.float64)
    r = m[:3, :3]
    if not np.allclose(r @ r.T, np.eye(3), atol=tol):
        return False
    return np.linalg.det(r) > 0


@dataclass(frozen=True)
class SplatPrimitive:
    """One canonical-space 2D Gaussian surfel with intrinsic material attributes.

    mu_c     canonical position (meters)
    q_c      unit quaternion (w, x, y, z); the splat normal is the third
             column of its rotation matrix
    s        tangent-axis scales (meters, strictly positive, length 2)
    o        opacity in [0, 1]
    c        linear RGB radiance (training aid only)
    a        RGB albedo, calibrated into [0.03, 0.8]
    r, m     roughness / metallic in [0, 1]
    w        skinning weights over the bone set (>= 0, sums to 1)
    """

    mu_c: np.ndarray
    q_c: np.ndarray
    s: np.ndarray
    o: float
    c: np.ndarray
    a: np.ndarray
    r: float
    m: float
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu_c", _as_f32(self.mu_c, (3,)))
        q = np.asarray(self.q_c, dtype=np.float64)
        if q.shape != (4,):
            raise ValueError(f"quaternion must have 4 components, got {q.shape}")
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValueError(f"quaternion not unit length: |q| = {np.linalg.norm(q):.8f}")
        object.__setattr__(self, "q_c", q)
        s = _as_f32(self.s, (2,))
        if not np.all(s > 0):
            raise ValueError(f"scales must be strictly positive, got {s}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "o", float(np.clip(self.o, 0.0, 1.0)))
        object.__setattr__(self, "c", np.maximum(_as_f32(self.c, (3,)), 0.0))
        a = np.clip(_as_f32(self.a, (3,)), ALBEDO_MIN, ALBEDO_MAX)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "r", float(np.clip(self.r, 0.0, 1.0)))
        object.__setattr__(self, "m", float(np.clip(self.m, 0.0, 1.0)))
        w = np.asarray(self.w, dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-5:
            raise ValueError(f"skinning weights must be >= 0 and sum to 1, got sum {w.sum():.8f}")
        object.__setattr__(self, "w", w)

    @property
    def normal_c(self):
        return quat_to_matrix(self.q_c)[:, 2]


@dataclass(frozen=True)
class Pose:
    """Posed bone and body-part transforms for one frame.

    bone_transforms  [n_b, 4, 4] rigid skinning matrices B_i(theta)
    part_transforms  [N_p, 4, 4] rigid per-part transforms B_p(theta)
    theta            joint-angle vector the transforms were derived from
                     (opaque to the engine; kept for bookkeeping)
    """

    bone_transforms: np.ndarray
    part_transforms: np.ndarray
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        bt = np.asarray(self.bone_transforms, dtype=np.float64)
        pt = np.asarray(self.part_transforms, dtype=np.float64)
        for name, arr in (("bone", bt), ("part", pt)):
            if arr.ndim != 3 or arr.shape[1:] != (4, 4):
                raise ValueError(f"{name}_transforms must be [n, 4, 4], got {arr.shape}")
            for i, m in enumerate(arr):
                if not is_rigid(m):
                    raise ValueError(f"{name}_transforms[{i}] is not rigid")
        object.__setattr__(self, "bone_transforms", bt)
        object.__setattr__(self, "part_transforms", pt)
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=np.float64))

    @property
    def num_bones(self):
        return self.bone_transforms.shape[0]

    @property
    def num_parts(self):
        return self.part_transforms.shape[0]

    @staticmethod
    def identity(num_bones, num_parts=DEFAULT_NUM_PARTS):
        eye = np.tile(np.eye(4), (num_bones, 1, 1))
        eyep = np.tile(np.eye(4), (num_parts, 1, 1))
        return Pose(eye, eyep)


@dataclass(frozen=True)
class Bone:
    name: str
    parent: int  # -1 for root
    head: np.ndarray  # joint pivot in canonical space
    part: int

    def __post_init__(self):
        object.__setattr__(self, "head", _as_f32(self.head, (3,)))


@dataclass(frozen=True)
class Skeleton:
    """Bone hierarchy with rest pose and a bone -> body-part assignment."""

    bones: tuple

    def __post_init__(self):
        bones = tuple(self.bones)
        if not bones:
            raise ValueError("skeleton needs at least one bone")
        parts = sorted({b.part for b in bones})
        if parts != list(range(len(parts))):
            raise ValueError(f"part indices must be contiguous from 0, got {parts}")
        for i, b in enumerate(bones):
            if b.parent >= i:
                raise ValueError(f"bone {b.name!r}: parent index {b.parent} must precede the bone")
        object.__setattr__(self, "bones", bones)

    @property
    def num_bones(self):
        return len(self.bones)

    @property
    def num_parts(self):
        return max(b.part for b in self.bones) + 1

    def part_of_bone(self, i):
        return self.bones[i].part

    def primary_bone_of_part(self, p):
        for i, b in enumerate(self.bones):
            if b.part == p:
                return i
        raise ValueError(f"no bone assigned to part {p}")

    def pose_from_rotations(self, rotations):
        """Forward kinematics: per-bone local axis-angle rotations -> Pose.

        ``rotations`` maps bone name -> length-3 axis-angle vector (radians);
        missing bones stay at rest. Rest orientation of every bone is the
        identity, so the skinning matrix of bone i is W_i(theta) @ W_i(rest)^-1.
        """
        n = self.num_bones
        world = np.tile(np.eye(4), (n, 1, 1))
        theta = np.zeros((n, 3))
        for i, b in enumerate(self.bones):
            rot = np.asarray(rotations.get(b.name, (0.0, 0.0, 0.0)), dtype=np.float64)
            theta[i] = rot
            local = np.eye(4)
            local[:3, :3] = _axis_angle_matrix(rot)
            parent_world = world[b.parent] if b.parent >= 0 else np.eye(4)
            # rotate about the bone head, expressed relative to the parent joint
            pivot = np.eye(4)
            pivot[:3, 3] = b.head
            unpivot = np.eye(4)
            unpivot[:3, 3] = -b.head
            world[i] = parent_world @ pivot @ local @ unpivot
        # rest world transforms are identity, so B_i = world_i directly
        part_tf = np.stack([world[self.primary_bone_of_part(p)] for p in range(self.num_parts)])
        return Pose(world, part_tf, theta.ravel())


def _axis_angle_matrix(v):
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return np.eye(3)
    x, y, z = v / angle
    c, s = np.cos(angle), np.sin(angle)
    cc = 1 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: extrinsic rigid transform plus pixel intrinsics.

    x_cam = R @ (x_world - center); image y runs downward.
    """

    rotation: np.ndarray  # [3,3] world->camera
    center: np.ndarray  # camera position in world space
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        if not is_rigid(np.vstack([np.hstack([r, np.zeros((3, 1))]), [[0, 0, 0, 1]]])):
            raise ValueError("camera rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @staticmethod
    def look_at(position, target, up=(0.0, 1.0, 0.0), fov_deg=45.0, width=512, height=512):
        pos = np.asarray(position, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - pos
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=np.float64))
        right = right / np.linalg.norm(right)
        down = np.cross(fwd, right)
        rot = np.stack([right, down, fwd])  # rows: camera axes in world space
        f = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
        return Camera(rot, pos, f, f, width / 2, height / 2, width, height)

    def rays(self):
        """Ray directions (world space, unit) for every pixel center: [H, W, 3]."""
        j, i = np.meshgrid(np.arange(self.width), np.arange(self.height))
        d = np.stack(
            [(j + 0.5 - self.cx) / self.fx, (i + 0.5 - self.cy) / self.fy, np.ones_like(j, dtype=np.float64)],
            axis=-1,
        )
        d = d @ self.rotation  # == (R^T @ d^T)^T
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


@dataclass(frozen=True)
class Image:
    """Row-major linear float image."""

    width: int
    height: int
    channels: int
    data: np.ndarray  # flat, length width*height*channels

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32).ravel()
        if d.size != self.width * self.height * self.channels:
            raise ValueError(
                f"data length {d.size} != width*height*channels = "
                f"{self.width * self.height * self.channels}"
            )
        if not np.all(np.isfinite(d)):
            bad = int(np.flatnonzero(~np.isfinite(d))[0] // self.channels)
            raise ValueError(f"non-finite value at pixel index {bad}")
        object.__setattr__(self, "data", d)

    @staticmethod
    def from_array(arr):
        a = np.asarray(arr, dtype=np.float32)
        if a.ndim == 2:
            a = a[:, :, None]
        h, w, c = a.shape
        return Image(w, h, c, a.ravel())

    def to_array(self):
        return self.data.reshape(self.height, self.width, self.channels)


@dataclass(frozen=True)
class EnvironmentLight:
    """Cubemap radiance with a pre-filtered specular mip chain and diffuse irradiance.

    specular_mips[0] is the base map (roughness 0); mip count is log2(R)+1.
    sh_for_loss optionally carries an SH projection used by the environment
    distillation loss.
    """

    base: "Cubemap"
    specular_mips: tuple = ()
    irradiance: "Cubemap" = None
    sh_for_loss: np.ndarray = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.base.faces)) or np.any(self.base.faces < 0):
            raise ValueError("environment radiance must be finite and >= 0")
        if self.specular_mips:
            mips = tuple(self.specular_mips)
            expect = int(np.log2(self.base.resolution)) + 1
            if len(mips) != expect:
                raise ValueError(f"expected {expect} specular mips for base resolution {self.base.resolution}, got {len(mips)}")
            if mips[0].resolution != self.base.resolution:
                raise ValueError("specular_mips[0] must match the base resolution")
            object.__setattr__(self, "specular_mips", mips)

    @property
    def prefiltered(self):
        return bool(self.specular_mips) and self.irradiance is not None
