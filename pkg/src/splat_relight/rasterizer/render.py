"""Frame rendering: forward shading, deferred shading, attribute maps.

Forward: shade each splat once (view direction from the splat center to the
camera), then composite shaded colors. Deferred: composite material
attributes into a G-buffer, un-premultiply, then shade covered pixels with
per-pixel view directions. Attribute rendering composites the named
per-splat property as the color, per the same weights.

Normals are flipped toward the viewer before shading and attribute output
(2D splats are two-sided).
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from ..core.types import Camera, Image
from ..ibl.shade import shade_batch
from ..occlusion.probes import combined_ao_batch
from .kernel import rasterize_values

ATTRIBUTES = ("albedo", "normal", "roughness", "metallic", "ao", "mask")
_WEIGHT_EPS = 1e-8


@dataclass
class GBuffer:
    """Screen-space attribute buffers (premultiplied by weight)."""

    albedo: np.ndarray
    normal: np.ndarray
    roughness: np.ndarray
    metallic: np.ndarray
    ao: np.ndarray
    weight: np.ndarray
    depth: np.ndarray

    def normalized_normal(self):
        """Unit normals where covered, zero elsewhere."""
        norm = np.linalg.norm(self.normal, axis=-1, keepdims=True)
        return np.where(norm > 1e-9, self.normal / np.where(norm > 1e-9, norm, 1.0), 0.0)


@contextmanager
def _stage(timings, name):
    if timings is None:
        yield
        return
    t0 = time.perf_counter()
    yield
    timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def _posed_arrays(cloud, pose, camera: Camera, timings):
    with _stage(timings, "lbs"):
        mu_o, rot_o = cloud.posed(pose)
    view = camera.center[None, :] - mu_o
    view = view / np.linalg.norm(view, axis=1, keepdims=True)
    flip = np.sign(np.einsum("ni,ni->n", rot_o[:, :, 2], view))
    flip = np.where(flip == 0, 1.0, flip)
    n_eff = rot_o[:, :, 2] * flip[:, None]
    return mu_o, rot_o, n_eff, view


def _splat_ao(cloud, mu_o, n_eff, pose, grids, no_ao, timings):
    with _stage(timings, "occlusion"):
        if no_ao:
            return np.ones(len(cloud))
        if grids is None:
            raise ValueError("probe grids missing; bake probes first or render with no_ao=True")
        return combined_ao_batch(mu_o, n_eff, pose, grids)


def render_forward(cloud, pose, camera: Camera, env, lut, grids, *, no_ao=False, timings=None):
    """Shade per splat, then composite. Returns a 4-channel Image (RGB + weight)."""
    mu_o, rot_o, n_eff, view = _posed_arrays(cloud, pose, camera, timings)
    ao = _splat_ao(cloud, mu_o, n_eff, pose, grids, no_ao, timings)
    with _stage(timings, "shading"):
        colors, _, _ = shade_batch(
            n_eff, view, cloud.albedo, cloud.roughness, cloud.metallic, ao, env, lut
        )
    with _stage(timings, "raster"):
        img, weight, _ = rasterize_values(mu_o, rot_o, cloud.s, cloud.opacity, colors, camera)
    return Image.from_array(np.concatenate([img, weight[..., None]], axis=-1))


def render_deferred(cloud, pose, camera: Camera, env, lut, grids, *, no_ao=False, timings=None, return_gbuffer=False):
    """Composite attributes into a G-buffer, then shade covered pixels."""
    mu_o, rot_o, n_eff, view = _posed_arrays(cloud, pose, camera, timings)
    ao = _splat_ao(cloud, mu_o, n_eff, pose, grids, no_ao, timings)
    values = np.concatenate(
        [
            cloud.albedo,
            n_eff,
            cloud.roughness[:, None],
            cloud.metallic[:, None],
            ao[:, None],
        ],
        axis=1,
    )
    with _stage(timings, "raster"):
        buf, weight, depth = rasterize_values(mu_o, rot_o, cloud.s, cloud.opacity, values, camera)
    gbuf = GBuffer(
        albedo=buf[..., 0:3], normal=buf[..., 3:6], roughness=buf[..., 6],
        metallic=buf[..., 7], ao=buf[..., 8], weight=weight, depth=depth,
    )
    with _stage(timings, "shading"):
        out = np.zeros((camera.height, camera.width, 3))
        covered = weight > _WEIGHT_EPS
        if np.any(covered):
            w = weight[covered][:, None]
            alb = gbuf.albedo[covered] / w
            nrm = gbuf.normal[covered] / w
            norm = np.linalg.norm(nrm, axis=1, keepdims=True)
            ok = norm[:, 0] > 1e-6
            nrm = np.where(norm > 1e-6, nrm / np.where(norm > 1e-6, norm, 1.0), 0.0)
            rough = gbuf.roughness[covered] / w[:, 0]
            metal = gbuf.metallic[covered] / w[:, 0]
            pao = gbuf.ao[covered] / w[:, 0]
            rays = camera.rays()[covered]
            shaded = np.zeros_like(alb)
            if np.any(ok):
                shaded[ok], _, _ = shade_batch(
                    nrm[ok], -rays[ok], np.clip(alb[ok], 0.0, None),
                    np.clip(rough[ok], 0.0, 1.0), np.clip(metal[ok], 0.0, 1.0),
                    np.clip(pao[ok], 0.0, 1.0), env, lut,
                )
            out[covered] = shaded * w
    img = Image.from_array(np.concatenate([out, weight[..., None]], axis=-1))
    if return_gbuffer:
        return img, gbuf
    return img


def render_attribute(cloud, pose, camera: Camera, attr, grids=None, *, no_ao=False, timings=None):
    """Composite one named per-splat property as the rasterized color.

    mask composites constant 1; ao needs probe grids (or no_ao)."""
    if attr not in ATTRIBUTES:
        raise ValueError(f"unknown attribute {attr!r}; expected one of {ATTRIBUTES}")
    mu_o, rot_o, n_eff, view = _posed_arrays(cloud, pose, camera, timings)
    if attr == "albedo":
        values = cloud.albedo
    elif attr == "normal":
        values = n_eff
    elif attr == "roughness":
        values = cloud.roughness[:, None]
    elif attr == "metallic":
        values = cloud.metallic[:, None]
    elif attr == "ao":
        values = _splat_ao(cloud, mu_o, n_eff, pose, grids, no_ao, timings)[:, None]
    else:  # mask
        values = np.ones((len(cloud), 1))
    with _stage(timings, "raster"):
        img, weight, _ = rasterize_values(mu_o, rot_o, cloud.s, cloud.opacity, values, camera)
    return Image.from_array(np.concatenate([img, weight[..., None]], axis=-1))
