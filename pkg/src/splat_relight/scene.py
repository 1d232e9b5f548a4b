"""Scene files: JSON schema, validation, the procedural capsule-person
avatar, and environment construction.

The capsule person is the default test avatar: nine rigid parts (torso,
head, upper/lower arms, upper/lower legs), one bone per part, with splats
sampled on the capsule surfaces and materials taken from the analytic
teacher fields so that generator and teacher agree by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import SplatCloud
from .core.cubemap import Cubemap
from .core.types import Bone, Camera, Skeleton, matrix_to_quat
from .core.io import read_cubemap
from .oracle.analytic import AnalyticScene, Capsule, ProceduralMaterial

SCHEMA_VERSION = 1
PART_NAMES = (
    "torso", "upper_arm_l", "lower_arm_l", "upper_arm_r", "lower_arm_r",
    "upper_leg_l", "lower_leg_l", "upper_leg_r", "lower_leg_r",
)


class SceneError(ValueError):
    """Scene file fails validation; message names the offending field."""


# ---------------------------------------------------------------------------
# capsule person
# ---------------------------------------------------------------------------

def capsule_person_shapes():
    """Capsules (name, p0, p1, radius, part index) of the nine-part avatar in
    canonical T-pose: torso (with head), and upper/lower segments per limb.

    Units are meters, y up, facing +z. Part indices are contiguous from 0.
    """
    return [
        ("torso", (0.0, 0.0, 0.0), (0.0, 0.50, 0.0), 0.11, 0),
        ("head", (0.0, 0.60, 0.0), (0.0, 0.70, 0.0), 0.08, 0),
        ("upper_arm_l", (0.16, 0.46, 0.0), (0.40, 0.46, 0.0), 0.040, 1),
        ("lower_arm_l", (0.40, 0.46, 0.0), (0.64, 0.46, 0.0), 0.035, 2),
        ("upper_arm_r", (-0.16, 0.46, 0.0), (-0.40, 0.46, 0.0), 0.040, 3),
        ("lower_arm_r", (-0.40, 0.46, 0.0), (-0.64, 0.46, 0.0), 0.035, 4),
        ("upper_leg_l", (0.085, -0.02, 0.0), (0.085, -0.42, 0.0), 0.055, 5),
        ("lower_leg_l", (0.085, -0.42, 0.0), (0.085, -0.80, 0.0), 0.045, 6),
        ("upper_leg_r", (-0.085, -0.02, 0.0), (-0.085, -0.42, 0.0), 0.055, 7),
        ("lower_leg_r", (-0.085, -0.42, 0.0), (-0.085, -0.80, 0.0), 0.045, 8),
    ]


def capsule_person_skeleton():
    """One bone per part; bone heads sit at the joint pivots."""
    spec = [
        ("torso", -1, (0.0, 0.0, 0.0), 0),
        ("upper_arm_l", 0, (0.16, 0.46, 0.0), 1),
        ("lower_arm_l", 1, (0.40, 0.46, 0.0), 2),
        ("upper_arm_r", 0, (-0.16, 0.46, 0.0), 3),
        ("lower_arm_r", 3, (-0.40, 0.46, 0.0), 4),
        ("upper_leg_l", 0, (0.085, -0.02, 0.0), 5),
        ("lower_leg_l", 5, (0.085, -0.42, 0.0), 6),
        ("upper_leg_r", 0, (-0.085, -0.02, 0.0), 7),
        ("lower_leg_r", 7, (-0.085, -0.42, 0.0), 8),
    ]
    return Skeleton(tuple(Bone(name=n, parent=p, head=np.asarray(h), part=pt) for n, p, h, pt in spec))


def capsule_person_teacher(material=None):
    """AnalyticScene matching the capsule person, with procedural materials."""
    prims = [Capsule(p0, p1, r, part=part) for (_, p0, p1, r, part) in capsule_person_shapes()]
    return AnalyticScene(prims, material=material or ProceduralMaterial(), num_parts=9)


def _sample_capsule_surface(p0, p1, radius, count, rng):
    """Area-uniform points + outward normals on one capsule."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    axis = p1 - p0
    length = np.linalg.norm(axis)
    axis_n = axis / length if length > 0 else np.array([0.0, 1.0, 0.0])
    area_cyl = 2 * np.pi * radius * length
    area_caps = 4 * np.pi * radius**2
    n_cyl = int(round(count * area_cyl / (area_cyl + area_caps)))
    n_caps = count - n_cyl
    # tangent frame of the axis
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis_n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(axis_n, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis_n, e1)
    pts = []
    nrm = []
    for _ in range(n_cyl):
        h = rng.random() * length
        phi = rng.random() * 2 * np.pi
        n = np.cos(phi) * e1 + np.sin(phi) * e2
        pts.append(p0 + h * axis_n + radius * n)
        nrm.append(n)
    for k in range(n_caps):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        center = p1 if v @ axis_n > 0 else p0
        pts.append(center + radius * v)
        nrm.append(v)
    return np.array(pts), np.array(nrm)


def generate_capsule_person(counts_per_part=None, seed=0, material=None, scale_factor=1.0):
    """(SplatCloud, Skeleton, AnalyticScene) for the capsule-person avatar.

    Splat scales follow sqrt(part area / count) so coverage stays roughly
    constant as counts change; materials are the teacher fields evaluated at
    the splat centers.
    """
    shapes = capsule_person_shapes()
    skeleton = capsule_person_skeleton()
    teacher = capsule_person_teacher(material)
    if counts_per_part is None:
        counts_per_part = default_part_counts(900)
    if len(counts_per_part) != 9:
        raise SceneError(f"counts_per_part must have 9 entries, got {len(counts_per_part)}")
    rng = np.random.default_rng(seed)
    mu, quat, s, opac, wts = [], [], [], [], []
    # split each part's budget across its capsules by surface area
    part_area = np.zeros(9)
    areas = []
    for (_, p0, p1, radius, part) in shapes:
        length = np.linalg.norm(np.asarray(p1, dtype=np.float64) - np.asarray(p0, dtype=np.float64))
        a = 2 * np.pi * radius * length + 4 * np.pi * radius**2
        areas.append(a)
        part_area[part] += a
    for (name, p0, p1, radius, part), area in zip(shapes, areas):
        count = int(round(counts_per_part[part] * area / part_area[part]))
        if count == 0:
            continue
        pts, nrm = _sample_capsule_surface(p0, p1, radius, count, rng)
        length = np.linalg.norm(np.asarray(p1, dtype=np.float64) - np.asarray(p0, dtype=np.float64))
        base_scale = np.sqrt(area / count) * 0.85 * scale_factor
        p0 = np.asarray(p0, dtype=np.float64)
        axis_n = (np.asarray(p1, dtype=np.float64) - p0) / max(length, 1e-9)
        for p, n in zip(pts, nrm):
            # tangent frame: t1 roughly along the capsule axis
            t1 = axis_n - (axis_n @ n) * n
            t1n = np.linalg.norm(t1)
            if t1n < 1e-6:
                ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
                t1 = ref - (ref @ n) * n
                t1n = np.linalg.norm(t1)
            t1 /= t1n
            t2 = np.cross(n, t1)
            quat.append(matrix_to_quat(np.stack([t1, t2, n], axis=1)))
            mu.append(p)
            jitter = 0.85 + 0.3 * rng.random(2)
            s.append(base_scale * jitter)
            opac.append(0.92 + 0.06 * rng.random())
            w = np.zeros(9)
            w[part] = 1.0
            wts.append(w)
    mu = np.array(mu)
    albedo = teacher.material.albedo(mu)
    rough = teacher.material.roughness(mu)
    metal = teacher.material.metallic(mu)
    cloud = SplatCloud(
        mu_c=mu, quat=np.array(quat), s=np.array(s), opacity=np.array(opac),
        color=albedo.copy(), albedo=albedo, roughness=rough, metallic=metal,
        weights=np.array(wts),
    )
    return cloud, skeleton, teacher


def default_part_counts(total):
    """Split a total splat budget across the nine parts by surface area."""
    areas = np.zeros(9)
    for (_, p0, p1, r, part) in capsule_person_shapes():
        length = np.linalg.norm(np.asarray(p1, dtype=np.float64) - np.asarray(p0, dtype=np.float64))
        areas[part] += 2 * np.pi * r * length + 4 * np.pi * r * r
    counts = np.maximum(np.round(total * areas / areas.sum()).astype(int), 1)
    return counts.tolist()


# canonical test poses for the capsule person
CAPSULE_PERSON_POSES = {
    "rest": {},
    "arms_out": {},
    "arm_lowered": {"upper_arm_l": (0.0, 0.0, -1.5)},
    "arms_lowered": {"upper_arm_l": (0.0, 0.0, -1.5), "upper_arm_r": (0.0, 0.0, 1.5)},
    "walk": {
        "upper_arm_l": (0.0, 0.0, -1.2),
        "upper_arm_r": (0.0, 0.0, 1.2),
        "upper_leg_l": (0.45, 0.0, 0.0),
        "upper_leg_r": (-0.45, 0.0, 0.0),
        "lower_leg_r": (0.7, 0.0, 0.0),
    },
}


# ---------------------------------------------------------------------------
# environments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradientEnvironment:
    """Smooth sky/ground gradient with a wide sun lobe; low-frequency by
    construction (validation defaults)."""

    zenith: tuple = (0.465, 0.48, 0.535)
    horizon: tuple = (0.515, 0.49, 0.46)
    ground: tuple = (0.43, 0.405, 0.39)
    sun_direction: tuple = (0.5, 0.6, 0.4)
    sun_color: tuple = (1.0, 0.9, 0.7)
    sun_gain: float = 0.25
    sun_exponent: float = 2.0

    def __call__(self, dirs):
        d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        zen = np.asarray(self.zenith)
        hor = np.asarray(self.horizon)
        gnd = np.asarray(self.ground)
        up = np.clip(d[:, 1], 0.0, 1.0)[:, None]
        dn = np.clip(-d[:, 1], 0.0, 1.0)[:, None]
        sky = hor + (zen - hor) * up
        ground = hor + (gnd - hor) * dn
        base = np.where(d[:, 1:2] >= 0, sky, ground)
        sd = np.asarray(self.sun_direction, dtype=np.float64)
        sd = sd / np.linalg.norm(sd)
        lobe = np.clip(d @ sd, 0.0, 1.0) ** self.sun_exponent
        return base + self.sun_gain * lobe[:, None] * np.asarray(self.sun_color)


def build_base_cubemap(spec, resolution=128):
    """Base cubemap from an environment spec dict (scene schema section)."""
    kind = spec.get("type", "gradient")
    res = int(spec.get("resolution", resolution))
    if kind == "constant":
        value = spec.get("value", (1.0, 1.0, 1.0))
        return Cubemap.constant(np.asarray(value, dtype=np.float32), res)
    if kind == "gradient":
        keys = ("zenith", "horizon", "ground", "sun_direction", "sun_color", "sun_gain", "sun_exponent")
        kwargs = {k: tuple(spec[k]) if isinstance(spec.get(k), (list, tuple)) else spec[k] for k in keys if k in spec}
        return Cubemap.from_function(GradientEnvironment(**kwargs), res)
    if kind == "files":
        return read_cubemap(spec["path"])
    raise SceneError(f"environment.type: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# scene files
# ---------------------------------------------------------------------------

@dataclass
class Scene:
    """A loaded, validated scene: avatar + skeleton + environment + cameras
    + named poses (+ the analytic teacher when the avatar is procedural)."""

    cloud: SplatCloud
    skeleton: Skeleton
    env_spec: dict
    cameras: list
    poses: dict  # name -> rotations dict
    teacher: AnalyticScene = None
    distill: dict = field(default_factory=dict)

    def pose(self, name_or_index):
        if isinstance(name_or_index, int):
            try:
                name = list(self.poses)[name_or_index]
            except IndexError:
                raise SceneError(f"pose index {name_or_index} out of range ({len(self.poses)} poses)")
        else:
            name = name_or_index
            if name not in self.poses:
                raise SceneError(f"unknown pose {name!r}; have {sorted(self.poses)}")
        return self.skeleton.pose_from_rotations(self.poses[name])

    def camera(self, index):
        try:
            return self.cameras[index]
        except IndexError:
            raise SceneError(f"camera index {index} out of range ({len(self.cameras)} cameras)")

    @property
    def num_parts(self):
        return self.skeleton.num_parts


def load_scene(source):
    """Load and validate a scene from a path, JSON string, or dict."""
    if isinstance(source, dict):
        doc = source
        base_dir = Path(".")
    else:
        path = Path(source)
        if path.exists():
            doc = json.loads(path.read_text())
            base_dir = path.parent
        else:
            try:
                doc = json.loads(str(source))
            except json.JSONDecodeError:
                raise SceneError(f"scene file not found: {source}")
            base_dir = Path(".")
    return _build_scene(doc, base_dir)


def _require(doc, key, where):
    if key not in doc:
        raise SceneError(f"{where}: missing required field {key!r}")
    return doc[key]


def _build_scene(doc, base_dir):
    version = _require(doc, "version", "scene")
    if version != SCHEMA_VERSION:
        raise SceneError(f"scene.version: expected {SCHEMA_VERSION}, got {version}")

    splats = _require(doc, "splats", "scene")
    teacher = None
    if "generator" in splats:
        if splats["generator"] != "capsule_person":
            raise SceneError(f"scene.splats.generator: unknown generator {splats['generator']!r}")
        counts = splats.get("counts_per_part") or default_part_counts(int(splats.get("total", 900)))
        cloud, skeleton, teacher = generate_capsule_person(
            counts_per_part=counts, seed=int(splats.get("seed", 0)),
            scale_factor=float(splats.get("scale_factor", 1.0)),
        )
    elif "list" in splats:
        skeleton = _parse_skeleton(_require(doc, "skeleton", "scene"))
        cloud = _parse_splat_list(splats["list"], skeleton.num_bones)
    else:
        raise SceneError("scene.splats: need either 'generator' or 'list'")

    env_spec = dict(doc.get("environment", {"type": "gradient"}))
    if env_spec.get("type") == "files":
        env_spec["path"] = str((base_dir / env_spec["path"]).resolve())

    cameras = []
    for k, c in enumerate(doc.get("cameras", [DEFAULT_CAMERA])):
        try:
            cameras.append(
                Camera.look_at(
                    position=c.get("position", (0.0, 0.3, 2.2)),
                    target=c.get("look_at", (0.0, 0.1, 0.0)),
                    up=c.get("up", (0.0, 1.0, 0.0)),
                    fov_deg=float(c.get("fov_deg", 45.0)),
                    width=int(c.get("width", 512)),
                    height=int(c.get("height", 512)),
                )
            )
        except ValueError as e:
            raise SceneError(f"scene.cameras[{k}]: {e}")

    poses = {"rest": {}}
    if teacher is not None:
        poses.update({k: dict(v) for k, v in CAPSULE_PERSON_POSES.items()})
    for p in doc.get("poses", []):
        name = _require(p, "name", "scene.poses[]")
        rots = {}
        for bone_name, vec in p.get("rotations", {}).items():
            if not any(b.name == bone_name for b in skeleton.bones):
                raise SceneError(f"scene.poses[{name!r}]: unknown bone {bone_name!r}")
            v = np.asarray(vec, dtype=np.float64)
            if v.shape != (3,):
                raise SceneError(f"scene.poses[{name!r}].rotations[{bone_name!r}]: need a 3-vector")
            rots[bone_name] = tuple(v)
        poses[name] = rots

    return Scene(
        cloud=cloud, skeleton=skeleton, env_spec=env_spec, cameras=cameras,
        poses=poses, teacher=teacher, distill=dict(doc.get("distill", {})),
    )


DEFAULT_CAMERA = {
    "position": (0.0, 0.3, 2.2),
    "look_at": (0.0, 0.1, 0.0),
    "fov_deg": 45.0,
    "width": 512,
    "height": 512,
}


def _parse_skeleton(doc):
    bones = []
    for i, b in enumerate(doc.get("bones", [])):
        try:
            bones.append(
                Bone(
                    name=_require(b, "name", f"skeleton.bones[{i}]"),
                    parent=int(b.get("parent", -1)),
                    head=np.asarray(_require(b, "head", f"skeleton.bones[{i}]"), dtype=np.float64),
                    part=int(_require(b, "part", f"skeleton.bones[{i}]")),
                )
            )
        except ValueError as e:
            raise SceneError(f"skeleton.bones[{i}]: {e}")
    try:
        return Skeleton(tuple(bones))
    except ValueError as e:
        raise SceneError(f"skeleton: {e}")


def _parse_splat_list(items, num_bones):
    prims = []
    from .core.types import SplatPrimitive

    for i, it in enumerate(items):
        try:
            w = np.zeros(num_bones)
            for bone, val in it.get("weights", {}).items():
                w[int(bone)] = float(val)
            prims.append(
                SplatPrimitive(
                    mu_c=np.asarray(_require(it, "position", f"splats.list[{i}]"), dtype=np.float64),
                    q_c=np.asarray(it.get("quaternion", (1.0, 0.0, 0.0, 0.0)), dtype=np.float64),
                    s=np.asarray(_require(it, "scale", f"splats.list[{i}]"), dtype=np.float64),
                    o=float(it.get("opacity", 1.0)),
                    c=np.asarray(it.get("color", (0.5, 0.5, 0.5)), dtype=np.float64),
                    a=np.asarray(it.get("albedo", (0.4, 0.4, 0.4)), dtype=np.float64),
                    r=float(it.get("roughness", 0.7)),
                    m=float(it.get("metallic", 0.0)),
                    w=w,
                )
            )
        except ValueError as e:
            raise SceneError(f"splats.list[{i}]: {e}")
    if not prims:
        raise SceneError("splats.list: empty")
    return SplatCloud.from_primitives(prims)


def part_occluder_scenes(teacher: AnalyticScene):
    """Per-part analytic occluder scenes for probe baking."""
    out = []
    for part in range(teacher.num_parts):
        prims = teacher.part_primitives(part)
        out.append(AnalyticScene(prims, material=teacher.material, num_parts=1) if prims else None)
    return out


def part_splat_occluders(cloud: SplatCloud, skeleton: Skeleton):
    """Per-part SplatOccluders sets (canonical frame) for the splat backend."""
    from .occlusion.probes import SplatOccluders
    from .core.types import quats_to_matrices

    part_of_bone = np.array([b.part for b in skeleton.bones])
    splat_part = part_of_bone[np.argmax(cloud.weights, axis=1)]
    rots = quats_to_matrices(cloud.quat)
    out = []
    for part in range(skeleton.num_parts):
        m = splat_part == part
        out.append(
            SplatOccluders(cloud.mu_c[m], rots[m], cloud.s[m], cloud.opacity[m]) if np.any(m) else None
        )
    return out
