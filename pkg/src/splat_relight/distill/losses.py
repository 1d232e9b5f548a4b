"""Distillation and regularization losses.

Every loss is >= 0, exactly 0 at its documented zero configuration, and
smooth enough away from kinks for central finite differences to be
meaningful. The perceptual term of the rendering loss is (1 - SSIM) with an
11-tap gaussian window (the usual LPIPS term needs a pretrained network and
is out of scope here).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from ..core.types import Image

DEFAULT_WEIGHTS = {
    "rgb": 1.0,
    "ssim": 0.2,
    "mask": 0.1,
    "point": 0.5,
    "sdf": 0.1,
    "image": 0.5,
    "smooth": 0.01,
    "aniso": 0.1,
    "orient": 0.05,
    "dist": 0.01,
    "nc": 0.05,
    "env": 0.1,
}

ANISO_CAP = 3.0  # max allowed ratio between the two tangent-axis lengths


@dataclass(frozen=True)
class AdaptLayer:
    """Per-property learnable scale and bias absorbing the systematic offset
    between ray-traced teacher shading and split-sum student shading.

    Applies to roughness, metallic (scalars) and albedo (per channel);
    normals are direction-valued and pass through unchanged.
    """

    r_scale: float = 1.0
    r_bias: float = 0.0
    m_scale: float = 1.0
    m_bias: float = 0.0
    a_scale: np.ndarray = field(default_factory=lambda: np.ones(3))
    a_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.r_scale <= 0 or self.m_scale <= 0 or np.any(np.asarray(self.a_scale) <= 0):
            raise ValueError("adapt scales must be positive")
        object.__setattr__(self, "a_scale", np.asarray(self.a_scale, dtype=np.float64))
        object.__setattr__(self, "a_bias", np.asarray(self.a_bias, dtype=np.float64))

    def roughness(self, r):
        return self.r_scale * np.asarray(r) + self.r_bias

    def metallic(self, m):
        return self.m_scale * np.asarray(m) + self.m_bias

    def albedo(self, a):
        return self.a_scale * np.asarray(a) + self.a_bias


@dataclass(frozen=True)
class LossReport:
    """Named loss terms, their weights, and the weighted total."""

    terms: dict
    weights: dict
    total: float

    def __post_init__(self):
        check = sum(self.weights.get(k, 0.0) * v for k, v in self.terms.items())
        if not np.isfinite(self.total) or abs(check - self.total) > 1e-9 * max(1.0, abs(self.total)):
            raise ValueError(f"total {self.total} inconsistent with weighted terms {check}")
        for k, v in self.terms.items():
            if not np.isfinite(v) or v < -1e-12:
                raise ValueError(f"loss term {k!r} must be finite and >= 0, got {v}")

    def row(self):
        return {**{k: float(v) for k, v in self.terms.items()}, "total": float(self.total)}


def make_report(terms, weights):
    total = float(sum(weights.get(k, 0.0) * v for k, v in terms.items()))
    return LossReport(terms={k: float(v) for k, v in terms.items()}, weights=dict(weights), total=total)


# ---------------------------------------------------------------------------
# point-space losses
# ---------------------------------------------------------------------------

def point_distill_loss(cloud, teacher, adapt: AdaptLayer = None):
    """Mean per-splat property distance to the teacher fields at the splat
    centers: L1 for roughness/metallic/albedo, (1 - cosine) for normals."""
    adapt = adapt or AdaptLayer()
    from ..oracle.analytic import teacher_query

    sdf, r_t, m_t, a_t, n_t = teacher_query(teacher, cloud.mu_c)
    from ..core.types import quats_to_matrices

    n_s = quats_to_matrices(cloud.quat)[:, :, 2]
    cos = np.clip(np.einsum("ni,ni->n", n_s, n_t), -1.0, 1.0)
    per_splat = (
        np.abs(adapt.roughness(cloud.roughness) - r_t)
        + np.abs(adapt.metallic(cloud.metallic) - m_t)
        + np.abs(adapt.albedo(cloud.albedo) - a_t).sum(axis=1)
        + (1.0 - cos)
    )
    return float(per_splat.mean())


def sdf_distill_loss(cloud, teacher):
    """Mean |sdf| at the splat centers: zero when centers sit on the teacher
    zero-level set."""
    return float(np.abs(teacher.sdf(cloud.mu_c)).mean())


def anisotropy_loss(scales, cap=ANISO_CAP):
    """mean(max(max(s)/min(s), cap) - cap): penalizes threadlike splats."""
    s = np.asarray(scales, dtype=np.float64).reshape(-1, 2)
    if np.any(s <= 0):
        raise ValueError("scales must be positive")
    ratio = s.max(axis=1) / s.min(axis=1)
    return float((np.maximum(ratio, cap) - cap).mean())


# ---------------------------------------------------------------------------
# image-space losses
# ---------------------------------------------------------------------------

def _to_array(img):
    return img.to_array() if isinstance(img, Image) else np.asarray(img, dtype=np.float64)


def _check_same_shape(a, b, what):
    if a.shape != b.shape:
        raise ValueError(f"{what}: resolution mismatch {a.shape} vs {b.shape}")


def image_distill_loss(student, teacher, mask, adapt: AdaptLayer = None):
    """Per-attribute distance between student and teacher attribute renders.

    student/teacher: dicts attribute -> [..., C] arrays over the same pixel
    or ray set. Normals use (1 - cosine) on rows where both are nonzero;
    other attributes use L1; 'mask' compares coverage everywhere. Non-mask
    attributes are averaged over rows where `mask` (teacher coverage) holds,
    then summed over attributes.
    """
    adapt = adapt or AdaptLayer()
    mask = np.asarray(mask, dtype=bool).ravel()
    total = 0.0
    denom = max(int(mask.sum()), 1)
    for attr, s_val in student.items():
        if attr not in teacher:
            raise ValueError(f"image_distill_loss: teacher render missing attribute {attr!r}")
        s = _to_array(s_val).reshape(mask.size, -1)
        t = _to_array(teacher[attr]).reshape(mask.size, -1)
        _check_same_shape(s, t, f"image_distill_loss[{attr}]")
        if attr == "mask":
            total += float(np.abs(s - t).mean())
            continue
        if attr == "normal":
            sn = s[mask]
            tn = t[mask]
            s_norm = np.linalg.norm(sn, axis=1)
            t_norm = np.linalg.norm(tn, axis=1)
            ok = (s_norm > 1e-9) & (t_norm > 1e-9)
            if np.any(ok):
                cos = np.einsum("ij,ij->i", sn[ok], tn[ok]) / (s_norm[ok] * t_norm[ok])
                total += float((1.0 - np.clip(cos, -1.0, 1.0)).sum() / denom)
            continue
        if attr == "albedo":
            s = adapt.albedo(s)
        elif attr == "roughness":
            s = adapt.roughness(s)
        elif attr == "metallic":
            s = adapt.metallic(s)
        total += float(np.abs(s[mask] - t[mask]).mean(axis=1).sum() / denom)
    return total


def ssim(img_a, img_b, data_range=1.0, sigma=1.5, truncate=3.5):
    """Mean SSIM with a gaussian window (11 taps at sigma 1.5), borders
    cropped by the window radius, population covariance."""
    a = _to_array(img_a).astype(np.float64)
    b = _to_array(img_b).astype(np.float64)
    _check_same_shape(a, b, "ssim")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1)
    kern = np.exp(-0.5 * (x / sigma) ** 2)
    kern /= kern.sum()

    def blur(img):
        out = convolve1d(img, kern, axis=0, mode="nearest")
        return convolve1d(out, kern, axis=1, mode="nearest")

    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    vals = []
    for c in range(a.shape[2]):
        x1, x2 = a[:, :, c], b[:, :, c]
        mu1, mu2 = blur(x1), blur(x2)
        s11 = blur(x1 * x1) - mu1 * mu1
        s22 = blur(x2 * x2) - mu2 * mu2
        s12 = blur(x1 * x2) - mu1 * mu2
        s_map = ((2 * mu1 * mu2 + c1) * (2 * s12 + c2)) / ((mu1**2 + mu2**2 + c1) * (s11 + s22 + c2))
        crop = s_map[radius:-radius, radius:-radius] if min(s_map.shape[:2]) > 2 * radius else s_map
        vals.append(crop.mean())
    return float(np.mean(vals))


def rendering_loss_components(render, gt, mask_render, gt_mask):
    """(rgb L1, 1 - SSIM, mask L1) between a render and ground truth."""
    r = _to_array(render)[..., :3]
    g = _to_array(gt)[..., :3]
    _check_same_shape(r, g, "rendering_loss rgb")
    mr = _to_array(mask_render).reshape(r.shape[0], r.shape[1], -1)[..., :1]
    mg = _to_array(gt_mask).reshape(r.shape[0], r.shape[1], -1)[..., :1]
    _check_same_shape(mr, mg, "rendering_loss mask")
    return {
        "rgb": float(np.abs(r - g).mean()),
        "ssim": float(1.0 - ssim(r, g)),
        "mask": float(np.abs(mr - mg).mean()),
    }


def rendering_loss(render, gt, mask_render, gt_mask, lambda_ssim=0.2):
    """L1(rgb) + lambda_ssim * (1 - SSIM) + L1(mask)."""
    c = rendering_loss_components(render, gt, mask_render, gt_mask)
    return c["rgb"] + lambda_ssim * c["ssim"] + c["mask"]


def material_smoothness_loss(attr_img, rgb_gt):
    """mean over pixels of ||grad attr||_1 * exp(-||grad rgb_gt||_1), with
    forward differences; suppresses material variation where the reference
    image is smooth-edged."""
    a = _to_array(attr_img)
    g = _to_array(rgb_gt)
    if a.ndim == 2:
        a = a[:, :, None]
    if g.ndim == 2:
        g = g[:, :, None]
    if a.shape[:2] != g.shape[:2]:
        raise ValueError(f"material_smoothness_loss: resolution mismatch {a.shape[:2]} vs {g.shape[:2]}")

    def grad_l1(img):
        gx = np.abs(np.diff(img, axis=1)).sum(axis=2)
        gy = np.abs(np.diff(img, axis=0)).sum(axis=2)
        return gx[:-1, :] + gy[:, :-1]  # common (H-1, W-1) grid

    return float((grad_l1(a) * np.exp(-grad_l1(g))).mean())


def normal_orientation_loss(ray_dirs, composited_normals):
    """mean over rays of max(-omega_o . N, 0): penalizes rasterized normals
    facing away from the camera (omega_o = -ray direction)."""
    d = np.atleast_2d(np.asarray(ray_dirs, dtype=np.float64))
    n = np.atleast_2d(np.asarray(composited_normals, dtype=np.float64))
    if d.shape != n.shape:
        raise ValueError(f"normal_orientation_loss: shape mismatch {d.shape} vs {n.shape}")
    return float(np.clip(np.einsum("ri,ri->r", d, n), 0.0, None).mean())


def depth_distortion(weights, depths):
    """mean over rays of sum_{i,j} w_i w_j |z_i - z_j| (Eq.-13 blending
    weights): concentrates each ray's weight at one depth."""
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    z = np.atleast_2d(np.asarray(depths, dtype=np.float64))
    z = np.where(np.isfinite(z), z, 0.0)  # zero-weight fragments carry inf depth
    order = np.argsort(z, axis=1)
    zs = np.take_along_axis(z, order, axis=1)
    ws = np.take_along_axis(w, order, axis=1)
    cw = np.cumsum(ws, axis=1)
    cwz = np.cumsum(ws * zs, axis=1)
    before_w = cw - ws
    before_wz = cwz - ws * zs
    pair = ws * (zs * before_w - before_wz)
    return float(2.0 * pair.sum(axis=1).mean())


def normal_consistency(weights, splat_normals, depth_map, camera):
    """mean over rays of sum_i w_i (1 - n_i . N(r)) with N(r) derived from
    the rendered depth map (cross product of screen-space position
    gradients). weights: [H, W, N]; splat_normals: [N, 3]."""
    w = np.asarray(weights, dtype=np.float64)
    h_img, w_img, n = w.shape
    d = np.asarray(depth_map, dtype=np.float64)
    rays = camera.rays()
    pos = camera.center[None, None, :] + d[..., None] * rays
    dx = np.empty_like(pos)
    dy = np.empty_like(pos)
    dx[:, :-1] = pos[:, 1:] - pos[:, :-1]
    dx[:, -1] = dx[:, -2]  # replicate the edge gradient
    dy[:-1, :] = pos[1:, :] - pos[:-1, :]
    dy[-1, :] = dy[-2, :]
    nrm = np.cross(dy, dx)
    ln = np.linalg.norm(nrm, axis=-1, keepdims=True)
    nrm = np.where(ln > 1e-12, nrm / np.where(ln > 1e-12, ln, 1.0), 0.0)
    # orient the derived normal toward the camera
    sgn = -np.sign(np.einsum("hwk,hwk->hw", nrm, rays))
    nrm = nrm * np.where(sgn == 0, 1.0, sgn)[..., None]
    dots = np.einsum("hwn,nk,hwk->hwn", w, np.asarray(splat_normals, dtype=np.float64), nrm)
    per_ray = (w - dots).sum(axis=2)
    return float(per_ray.mean())


def depth_regularizers(weights, depths, splat_normals=None, depth_map=None, camera=None):
    """(distortion, normal consistency); the latter needs the per-pixel
    weight grid, splat normals, rendered depth, and camera."""
    dist = depth_distortion(
        weights.reshape(-1, weights.shape[-1]), depths.reshape(-1, depths.shape[-1])
    )
    nc = 0.0
    if splat_normals is not None and depth_map is not None and camera is not None:
        nc = normal_consistency(weights, splat_normals, depth_map, camera)
    return dist, nc


def env_distill_loss(student_env, teacher_env, samples=512, seed=0):
    """Mean squared radiance difference over uniformly sampled directions.

    Inputs are callables dirs->RGB or Cubemaps."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(samples, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)

    def sample(env):
        if hasattr(env, "sample_bilinear"):
            return env.sample_bilinear(d)
        return np.asarray(env(d), dtype=np.float64)

    a = sample(student_env)
    b = sample(teacher_env)
    _check_same_shape(a, b, "env_distill_loss")
    return float(((a - b) ** 2).mean())
