"""Toy distillation: fit splat parameters to the analytic teacher by
gradient descent on the combined loss, with gradients from central finite
differences.

Image-space terms are evaluated on fixed stratified ray subsets (the losses
are defined as means over ray sets), with at least two auxiliary poses in
the batch. The finite-difference gradient splits the objective into a
per-splat separable part (point/sdf/aniso: perturbations of one splat only
move that splat's own contribution, evaluated vectorized across splats) and
a ray-batch part (attribute/orientation renders: perturbing one splat only
re-composites the rays it touches).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.types import Camera, quats_to_matrices
from ..ibl.shade import shade_batch
from ..oracle.analytic import AnalyticScene
from ..rasterizer.dense import composite_rays, ray_splat_alphas
from .losses import (
    DEFAULT_WEIGHTS,
    AdaptLayer,
    anisotropy_loss,
    depth_distortion,
    env_distill_loss,
    image_distill_loss,
    make_report,
    material_smoothness_loss,
    normal_consistency,
    normal_orientation_loss,
    point_distill_loss,
    rendering_loss_components,
    sdf_distill_loss,
)

MAX_DEMO_SPLATS = 200

DEMO_WEIGHTS = {
    **{k: 0.0 for k in DEFAULT_WEIGHTS},
    "point": 0.5,
    "sdf": 0.1,
    "image": 0.5,
    "aniso": 0.1,
    "orient": 0.05,
}

_PARAMS_PER_SPLAT = 15  # mu(3) quat(4) s(2) o(1) albedo(3) rough(1) metal(1)


@dataclass
class PoseBatch:
    """One pose's ray set with frozen teacher targets."""

    name: str
    pose: object
    origin: np.ndarray
    dirs: np.ndarray  # [R,3]
    teacher: dict  # attribute -> [R,C]
    mask: np.ndarray  # [R] bool (teacher coverage)
    gt_rgb: np.ndarray = None  # [R,3] pseudo ground truth shading
    grid_camera: Camera = None
    grid_teacher_rgb: np.ndarray = None  # [H,W,3]
    grid_teacher_mask: np.ndarray = None  # [H,W]


@dataclass
class DistillContext:
    """Frozen targets for the loss suite: teacher, pose/ray batches,
    environments, and the shading tables used for the rgb terms."""

    teacher: AnalyticScene
    skeleton: object
    batches: list
    env: object = None  # prefiltered EnvironmentLight (rgb/gt terms)
    lut: object = None
    env_pair: tuple = None  # (student env, teacher env) for env distillation
    adapt: AdaptLayer = field(default_factory=AdaptLayer)


def _stratified_pixels(camera: Camera, count, rng):
    """Stratified pixel picks over the frame; returns unit ray dirs [count,3]."""
    cells = int(np.ceil(np.sqrt(count)))
    xs = []
    ys = []
    k = 0
    for gy in range(cells):
        for gx in range(cells):
            if k >= count:
                break
            xs.append((gx + rng.random()) / cells * camera.width)
            ys.append((gy + rng.random()) / cells * camera.height)
            k += 1
    j = np.clip(np.array(xs), 0, camera.width - 1e-3)
    i = np.clip(np.array(ys), 0, camera.height - 1e-3)
    d = np.stack(
        [(j - camera.cx) / camera.fx, (i - camera.cy) / camera.fy, np.ones_like(j)], axis=-1
    )
    d = d @ camera.rotation
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def teacher_ray_attributes(teacher: AnalyticScene, pose, origin, dirs, t_max=20.0):
    """Sphere-trace the posed teacher along rays; returns attribute dict +
    coverage mask. Attributes are the canonical material fields at the hit,
    normals are posed-space SDF gradients."""
    posed = teacher.posed(pose)
    origins = np.broadcast_to(np.asarray(origin, dtype=np.float64), dirs.shape)
    hit, t = posed.sphere_trace(origins, dirs, t_max=t_max)
    n = dirs.shape[0]
    out = {
        "albedo": np.zeros((n, 3)),
        "normal": np.zeros((n, 3)),
        "roughness": np.zeros((n, 1)),
        "metallic": np.zeros((n, 1)),
        "mask": hit.astype(np.float64)[:, None],
    }
    if np.any(hit):
        x_o = origins[hit] + t[hit, None] * dirs[hit]
        out["normal"][hit] = posed.normal(x_o)
        for k, x in enumerate(np.flatnonzero(hit)):
            xc, part = posed.nearest_part_point(x_o[k])
            out["albedo"][x] = teacher.material.albedo(xc)
            out["roughness"][x, 0] = teacher.material.roughness(xc)
            out["metallic"][x, 0] = teacher.material.metallic(xc)
    return out, hit


def _splat_values(cloud, rot_o, origin):
    """Per-splat value matrix for the ray part: [albedo(3), raw normal(3),
    roughness, metallic] -> [N,8]."""
    return np.concatenate(
        [cloud.albedo, rot_o[:, :, 2], cloud.roughness[:, None], cloud.metallic[:, None]], axis=1
    )


def build_context(
    teacher,
    skeleton,
    reference_cloud,
    env,
    lut,
    camera=None,
    pose_names=("rest", "arm_lowered", "walk"),
    pose_rotations=None,
    rays_per_pose=192,
    grid_resolution=24,
    seed=0,
    teacher_env=None,
):
    """Freeze teacher targets and pseudo ground truth for the loss suite.

    Pseudo ground-truth rgb comes from forward-shading the reference
    (teacher-consistent) cloud through the same dense compositing path the
    student uses, under the same environment.
    """
    from ..scene import CAPSULE_PERSON_POSES

    rng = np.random.default_rng(seed)
    camera = camera or Camera.look_at((0.0, 0.25, 2.1), (0.0, 0.05, 0.0), fov_deg=52.0, width=96, height=96)
    rotations = dict(CAPSULE_PERSON_POSES)
    if pose_rotations:
        rotations.update(pose_rotations)
    batches = []
    for name in pose_names:
        pose = skeleton.pose_from_rotations(rotations.get(name, {}))
        dirs = _stratified_pixels(camera, rays_per_pose, rng)
        t_attrs, hit = teacher_ray_attributes(teacher, pose, camera.center, dirs)
        gw = grid_resolution
        grid_cam = Camera.look_at(
            camera.center, camera.center + camera.rotation[2], up=-camera.rotation[1],
            fov_deg=52.0, width=gw, height=gw,
        )
        batch = PoseBatch(
            name=name, pose=pose, origin=camera.center.copy(), dirs=dirs,
            teacher=t_attrs, mask=hit, grid_camera=grid_cam,
        )
        # pseudo ground truth from the reference cloud
        mu_o, rot_o = reference_cloud.posed(pose)
        batch.gt_rgb = _shade_and_composite(reference_cloud, mu_o, rot_o, camera.center, dirs, env, lut)[0]
        grid_rays = grid_cam.rays().reshape(-1, 3)
        rgb, w, _ = _shade_and_composite(reference_cloud, mu_o, rot_o, camera.center, grid_rays, env, lut)
        batch.grid_teacher_rgb = rgb.reshape(gw, gw, 3)
        batch.grid_teacher_mask = w.reshape(gw, gw)
        batches.append(batch)
    env_pair = (env.base, teacher_env or env.base)
    return DistillContext(
        teacher=teacher, skeleton=skeleton, batches=batches, env=env, lut=lut, env_pair=env_pair
    )


def _shade_and_composite(cloud, mu_o, rot_o, origin, dirs, env, lut):
    """Forward-shade each splat (no AO) and composite over the rays."""
    view = np.asarray(origin) - mu_o
    view = view / np.linalg.norm(view, axis=1, keepdims=True)
    flip = np.sign(np.einsum("ni,ni->n", rot_o[:, :, 2], view))
    n_eff = rot_o[:, :, 2] * np.where(flip == 0, 1.0, flip)[:, None]
    colors, _, _ = shade_batch(
        n_eff, view, cloud.albedo, cloud.roughness, cloud.metallic, np.ones(len(cloud)), env, lut
    )
    alpha, depth = ray_splat_alphas(np.asarray(origin)[None, :], dirs, mu_o, rot_o, cloud.s, cloud.opacity)
    img, weight, mean_depth, _ = composite_rays(alpha, depth, colors)
    return img, weight, mean_depth


def total_loss(cloud, ctx: DistillContext, weights=None, adapt=None):
    """Evaluate every loss term on the context's batches -> LossReport."""
    weights = dict(weights or DEFAULT_WEIGHTS)
    adapt = adapt or ctx.adapt
    terms = {k: 0.0 for k in DEFAULT_WEIGHTS}
    try:
        terms["point"] = point_distill_loss(cloud, ctx.teacher, adapt)
        terms["sdf"] = sdf_distill_loss(cloud, ctx.teacher)
        terms["aniso"] = anisotropy_loss(cloud.s)
        if ctx.env_pair is not None:
            terms["env"] = env_distill_loss(*ctx.env_pair)
        nb = len(ctx.batches)
        for batch in ctx.batches:
            mu_o, rot_o = cloud.posed(batch.pose)
            values = _splat_values(cloud, rot_o, batch.origin)
            alpha, depth = ray_splat_alphas(
                batch.origin[None, :], batch.dirs, mu_o, rot_o, cloud.s, cloud.opacity
            )
            img, weight, _, wmat = composite_rays(alpha, depth, values)
            student = {
                "albedo": img[:, 0:3],
                "normal": img[:, 3:6],
                "roughness": img[:, 6:7],
                "metallic": img[:, 7:8],
                "mask": weight[:, None],
            }
            terms["image"] += image_distill_loss(student, batch.teacher, batch.mask, adapt) / nb
            terms["orient"] += normal_orientation_loss(batch.dirs, img[:, 3:6]) / nb
            terms["dist"] += depth_distortion(wmat, depth) / nb
            if batch.gt_rgb is not None and ctx.env is not None:
                rgb, w, _ = _shade_and_composite(cloud, mu_o, rot_o, batch.origin, batch.dirs, ctx.env, ctx.lut)
                terms["rgb"] += float(np.abs(rgb - batch.gt_rgb).mean()) / nb
                terms["mask"] += float(np.abs(w - batch.mask.astype(np.float64)).mean()) / nb
            if batch.grid_camera is not None and batch.grid_teacher_rgb is not None:
                gcam = batch.grid_camera
                grid_rays = gcam.rays().reshape(-1, 3)
                galpha, gdepth = ray_splat_alphas(
                    batch.origin[None, :], grid_rays, mu_o, rot_o, cloud.s, cloud.opacity
                )
                gimg, gweight, gmean_depth, gwmat = composite_rays(galpha, gdepth, values)
                gw = gcam.width
                rgb_grid, _, _ = _shade_and_composite(cloud, mu_o, rot_o, batch.origin, grid_rays, ctx.env, ctx.lut)
                comp = rendering_loss_components(
                    rgb_grid.reshape(gw, gw, 3), batch.grid_teacher_rgb,
                    gweight.reshape(gw, gw), batch.grid_teacher_mask,
                )
                terms["ssim"] += comp["ssim"] / nb
                for attr_cols in ((0, 3), (6, 7), (7, 8)):
                    attr_img = gimg[:, attr_cols[0]:attr_cols[1]].reshape(gw, gw, -1)
                    terms["smooth"] += material_smoothness_loss(attr_img, batch.grid_teacher_rgb) / nb
                terms["nc"] += normal_consistency(
                    gwmat.reshape(gw, gw, -1), rot_o[:, :, 2], gmean_depth.reshape(gw, gw), gcam
                ) / nb
    except Exception as e:
        raise type(e)(f"total_loss: {e}") from e
    return make_report(terms, weights)


# ---------------------------------------------------------------------------
# finite-difference optimizer
# ---------------------------------------------------------------------------

def _pack(cloud):
    return np.concatenate(
        [cloud.mu_c, cloud.quat, cloud.s, cloud.opacity[:, None],
         cloud.albedo, cloud.roughness[:, None], cloud.metallic[:, None]], axis=1
    ).copy()


def _unpack(cloud, p):
    quat = p[:, 3:7]
    quat = quat / np.linalg.norm(quat, axis=1, keepdims=True)
    return cloud.replace(
        mu_c=p[:, 0:3], quat=quat, s=np.maximum(p[:, 7:9], 1e-4),
        opacity=np.clip(p[:, 9], 0.05, 1.0), albedo=np.clip(p[:, 10:13], 0.03, 0.8),
        roughness=np.clip(p[:, 13], 0.0, 1.0), metallic=np.clip(p[:, 14], 0.0, 1.0),
    )


def _separable_terms(p, teacher, weights, adapt):
    """Vectorized per-splat contributions of point + sdf + aniso at packed
    params p [N,15] -> [N]."""
    from ..oracle.analytic import teacher_query

    mu = p[:, 0:3]
    quat = p[:, 3:7] / np.linalg.norm(p[:, 3:7], axis=1, keepdims=True)
    s = np.maximum(p[:, 7:9], 1e-4)
    albedo = np.clip(p[:, 10:13], 0.03, 0.8)
    rough = np.clip(p[:, 13], 0.0, 1.0)
    metal = np.clip(p[:, 14], 0.0, 1.0)
    sdf, r_t, m_t, a_t, n_t = teacher_query(teacher, mu)
    n_s = quats_to_matrices(quat)[:, :, 2]
    point = (
        np.abs(adapt.roughness(rough) - r_t)
        + np.abs(adapt.metallic(metal) - m_t)
        + np.abs(adapt.albedo(albedo) - a_t).sum(axis=1)
        + (1.0 - np.clip(np.einsum("ni,ni->n", n_s, n_t), -1.0, 1.0))
    )
    ratio = s.max(axis=1) / s.min(axis=1)
    aniso = np.maximum(ratio, 3.0) - 3.0
    return weights.get("point", 0.0) * point + weights.get("sdf", 0.0) * np.abs(sdf) + weights.get("aniso", 0.0) * aniso


class _RayBatchEvaluator:
    """Incremental image + orientation loss over one pose's ray set.

    Perturbing one splat only re-composites the rays it touches; all 2 x 15
    finite-difference variants of a splat are composited in one batch.
    """

    def __init__(self, batch: PoseBatch, weights, adapt):
        self.batch = batch
        self.weights = weights
        self.adapt = adapt
        self.denom = max(int(batch.mask.sum()), 1)
        self.n_rays = batch.dirs.shape[0]

    def set_cloud(self, cloud):
        self.cloud = cloud
        self.mu_o, self.rot_o = cloud.posed(self.batch.pose)
        self.blend = np.einsum("nb,bij->nij", cloud.weights, self.batch.pose.bone_transforms)
        self.values = _splat_values(cloud, self.rot_o, self.batch.origin)
        self.alpha, self.depth = ray_splat_alphas(
            self.batch.origin[None, :], self.batch.dirs, self.mu_o, self.rot_o, cloud.s, cloud.opacity
        )
        img, weight, _, _ = composite_rays(self.alpha, self.depth, self.values)
        self.img_contrib, self.orient_contrib = self._row_contrib(
            img[None], weight[None], np.arange(self.n_rays)
        )
        self.img_contrib = self.img_contrib[0]
        self.orient_contrib = self.orient_contrib[0]

    def _row_contrib(self, img, weight, rows):
        """Per-ray loss contributions for composited rows; img [B, R, 8],
        weight [B, R] -> (image contrib [B, R], orientation contrib [B, R])."""
        t = self.batch.teacher
        m = self.batch.mask[rows]
        contrib = np.zeros(img.shape[:2])
        a_s = self.adapt.albedo(img[..., 0:3])
        contrib += np.where(m, np.abs(a_s - t["albedo"][rows]).mean(axis=-1), 0.0) / self.denom
        contrib += np.where(m, np.abs(self.adapt.roughness(img[..., 6]) - t["roughness"][rows, 0]), 0.0) / self.denom
        contrib += np.where(m, np.abs(self.adapt.metallic(img[..., 7]) - t["metallic"][rows, 0]), 0.0) / self.denom
        n_s = img[..., 3:6]
        n_t = t["normal"][rows]
        sn = np.linalg.norm(n_s, axis=-1)
        tn = np.linalg.norm(n_t, axis=-1)
        ok = m & (sn > 1e-9) & (tn > 1e-9)
        cos = np.einsum("...ij,ij->...i", n_s, n_t) / np.maximum(sn * tn, 1e-12)
        contrib += np.where(ok, 1.0 - np.clip(cos, -1.0, 1.0), 0.0) / self.denom
        contrib += np.abs(weight - t["mask"][rows, 0]) / self.n_rays
        orient = np.clip(np.einsum("...ij,ij->...i", n_s, self.batch.dirs[rows]), 0.0, None) / self.n_rays
        return contrib, orient

    def loss(self):
        return (
            self.weights.get("image", 0.0) * self.img_contrib.sum()
            + self.weights.get("orient", 0.0) * self.orient_contrib.sum()
        )

    def _splat_variants(self, i, p_rows):
        """Posed geometry and value rows for B packed-parameter variants of
        splat i: (mu_o [B,3], rot [B,3,3], s [B,2], o [B], values [B,8])."""
        p = np.atleast_2d(p_rows)
        quat = p[:, 3:7] / np.linalg.norm(p[:, 3:7], axis=1, keepdims=True)
        s = np.maximum(p[:, 7:9], 1e-4)
        o = np.clip(p[:, 9], 0.05, 1.0)
        m = self.blend[i]
        mu_o = p[:, 0:3] @ m[:3, :3].T + m[:3, 3]
        a = np.einsum("ij,bjk->bik", m[:3, :3], quats_to_matrices(quat))
        c0 = a[:, :, 0] / np.linalg.norm(a[:, :, 0], axis=1, keepdims=True)
        c1 = a[:, :, 1] - np.einsum("bi,bi->b", c0, a[:, :, 1])[:, None] * c0
        c1 = c1 / np.linalg.norm(c1, axis=1, keepdims=True)
        c2 = np.cross(c0, c1)
        rot = np.stack([c0, c1, c2], axis=2)
        values = np.concatenate(
            [np.clip(p[:, 10:13], 0.03, 0.8), rot[:, :, 2],
             np.clip(p[:, 13:14], 0.0, 1.0), np.clip(p[:, 14:15], 0.0, 1.0)], axis=1
        )
        return mu_o, rot, s, o, values

    def grad_for_splat(self, i, p_row, h):
        """Central-difference gradient [15] of this batch's loss w.r.t. splat
        i's packed parameters, all variants composited in one batch."""
        n_par = p_row.shape[0]
        variants = np.repeat(p_row[None, :], 2 * n_par, axis=0)
        for k in range(n_par):
            variants[k, k] += h
            variants[n_par + k, k] -= h
        mu_o, rot, s, o, values = self._splat_variants(i, variants)
        col_alpha, col_depth = ray_splat_alphas(
            self.batch.origin[None, :], self.batch.dirs, mu_o, rot, s, o
        )  # [R, B]
        rows = np.flatnonzero((self.alpha[:, i] > 0) | np.any(col_alpha > 0, axis=1))
        if rows.size == 0:
            return np.zeros(n_par)
        b = variants.shape[0]
        n = self.alpha.shape[1]
        alpha_b = np.broadcast_to(self.alpha[rows], (b, rows.size, n)).copy()
        depth_b = np.broadcast_to(self.depth[rows], (b, rows.size, n)).copy()
        alpha_b[:, :, i] = col_alpha[rows].T
        depth_b[:, :, i] = col_depth[rows].T
        values_b = np.broadcast_to(self.values, (b, n, values.shape[1])).copy()
        values_b[:, i, :] = values
        values_rs = np.broadcast_to(values_b[:, None], (b, rows.size, n, values.shape[1])).reshape(
            b * rows.size, n, -1
        )
        img, weight, _, _ = composite_rays(
            alpha_b.reshape(b * rows.size, n), depth_b.reshape(b * rows.size, n), values_rs
        )
        contrib, orient = self._row_contrib(
            img.reshape(b, rows.size, -1), weight.reshape(b, rows.size), rows
        )
        base_img = self.img_contrib.sum() - self.img_contrib[rows].sum()
        base_orient = self.orient_contrib.sum() - self.orient_contrib[rows].sum()
        losses = self.weights.get("image", 0.0) * (base_img + contrib.sum(axis=1)) + self.weights.get(
            "orient", 0.0
        ) * (base_orient + orient.sum(axis=1))
        return (losses[:n_par] - losses[n_par:]) / (2 * h)


def distill_demo(cloud, ctx: DistillContext, steps=100, lr=0.05, weights=None, h=1e-3, on_step=None):
    """Finite-difference gradient descent on the demo loss subset.

    Returns (trajectory of LossReports, final cloud); the trajectory has one
    report per step plus the final state. Aborts with the partial trajectory
    attached if the loss diverges past 10x its initial value.
    """
    if len(cloud) > MAX_DEMO_SPLATS:
        raise ValueError(f"distill_demo handles at most {MAX_DEMO_SPLATS} splats, got {len(cloud)}")
    weights = dict(weights or DEMO_WEIGHTS)
    adapt = ctx.adapt
    p = _pack(cloud)
    trajectory = []
    initial_total = None
    for step in range(steps):
        current = _unpack(cloud, p)
        report = total_loss(current, ctx, weights, adapt)
        trajectory.append(report)
        if on_step:
            on_step(step, report)
        if initial_total is None:
            initial_total = report.total
        elif report.total > 10.0 * max(initial_total, 1e-12):
            raise DivergenceError(trajectory)
        grad = _fd_gradient(current, p, ctx, weights, adapt, h)
        p = p - lr * grad
    final = _unpack(cloud, p)
    trajectory.append(total_loss(final, ctx, weights, adapt))
    return trajectory, final


class DivergenceError(RuntimeError):
    def __init__(self, trajectory):
        super().__init__("distillation diverged (loss exceeded 10x the initial value)")
        self.trajectory = trajectory


def _fd_gradient(cloud, p, ctx, weights, adapt, h):
    n = p.shape[0]
    grad = np.zeros_like(p)
    # separable part: perturb one parameter of every splat simultaneously
    for k in range(_PARAMS_PER_SPLAT):
        dp = np.zeros_like(p)
        dp[:, k] = h
        plus = _separable_terms(p + dp, ctx.teacher, weights, adapt)
        minus = _separable_terms(p - dp, ctx.teacher, weights, adapt)
        grad[:, k] += (plus - minus) / (2 * h) / n  # terms are means over splats
    # ray part: batched per-splat variants
    evals = [_RayBatchEvaluator(b, weights, adapt) for b in ctx.batches]
    for ev in evals:
        ev.set_cloud(cloud)
    nb = len(ctx.batches)
    for i in range(n):
        for ev in evals:
            grad[i] += ev.grad_for_splat(i, p[i], h) / nb
    return grad
