"""Environment pre-filtering: GGX specular mip chain and diffuse irradiance.

The specular chain uses filtered importance sampling: GGX half-vector
samples around the reflection direction (n = v = r assumption), each fetched
from a box mip pyramid of the base map at a level matched to the sample's
solid angle. This keeps narrow-kernel levels sharp while spreading point
sources correctly at rough levels. Mip level k covers roughness k/(mips-1);
level 0 is the base map itself.

Diffuse irradiance is a direct cosine-lobe quadrature over a downsampled
copy of the base map: irradiance(n) = (1/pi) sum L(w) max(n.w, 0) dOmega.
"""

from __future__ import annotations

import numpy as np

from ..core.cubemap import Cubemap
from ..core.types import EnvironmentLight
from .brdf import ggx_sample_h, hammersley

_EPS = 1e-12


def _box_pyramid(base: Cubemap):
    levels = [Cubemap(base.faces.astype(np.float64))]
    while levels[-1].resolution > 1:
        levels.append(levels[-1].downsample())
    return levels


def _sample_pyramid(pyramid, dirs, level):
    """Trilinear fetch across pyramid levels; level may be fractional [N]."""
    level = np.clip(level, 0.0, len(pyramid) - 1)
    lo = np.floor(level).astype(np.int64)
    hi = np.minimum(lo + 1, len(pyramid) - 1)
    t = (level - lo)[:, None]
    out = np.zeros((dirs.shape[0], pyramid[0].channels))
    for lv in np.unique(lo):
        m = lo == lv
        out[m] = pyramid[lv].sample_bilinear(dirs[m]) * (1 - t[m])
    for lv in np.unique(hi):
        m = hi == lv
        out[m] += pyramid[lv].sample_bilinear(dirs[m]) * t[m]
    return out


_DIRECT_CONV_ROUGHNESS = 0.4  # kernels at least this wide use exact texel-sum convolution


def prefilter_environment(base: Cubemap, samples=192):
    """GGX-convolve the base cubemap into a specular mip chain.

    Returns a list of Cubemaps; chain length is log2(R)+1 and level k has
    face resolution R >> k, convolved at roughness k/(mips-1). Narrow
    kernels use filtered importance sampling; wide kernels (where the FIS
    pyramid fetches get too coarse and the output texel count is small) use
    the exact texel-sum convolution instead.
    """
    res = base.resolution
    if res & (res - 1):
        raise ValueError(f"base cubemap resolution must be a power of two, got {res}")
    mips = int(np.log2(res)) + 1
    pyramid = _box_pyramid(base)
    base_texel_sa = 4.0 * np.pi / (6.0 * res * res)
    u1, u2 = hammersley(samples)
    chain = [Cubemap(base.faces.copy())]
    for k in range(1, mips):
        rough = k / (mips - 1)
        # face resolution floored at 16: wide kernels still vary enough over
        # direction that 1- and 2-texel faces alias badly at lookup time
        out_res = max(res >> k, min(16, res))
        if rough >= _DIRECT_CONV_ROUGHNESS or out_res <= 8:
            out = _convolve_direct(base, rough, out_res)
        else:
            out = _convolve_fis(pyramid, rough, out_res, u1, u2, base_texel_sa, base.channels)
        chain.append(out)
    return chain


def _convolve_fis(pyramid, rough, out_res, u1, u2, base_texel_sa, channels):
    alpha = max(rough * rough, 1e-4)
    samples = u1.shape[0]
    dirs = Cubemap.texel_directions(out_res).reshape(-1, 3)  # reflection dirs, n = v = r
    h_local = ggx_sample_h(u1, u2, alpha)  # [S,3]
    ref = np.where(np.abs(dirs[:, 2:3]) < 0.999, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    t = np.cross(ref, dirs)
    t /= np.linalg.norm(t, axis=-1, keepdims=True)
    b = np.cross(dirs, t)
    faces_out = np.zeros((dirs.shape[0], channels))
    chunk = max(1, 2_000_000 // samples)  # bounds the [chunk, S, 3] intermediates
    for s in range(0, dirs.shape[0], chunk):
        e = min(s + chunk, dirs.shape[0])
        n = dirs[s:e]
        hw = (
            h_local[None, :, 0:1] * t[s:e, None, :]
            + h_local[None, :, 1:2] * b[s:e, None, :]
            + h_local[None, :, 2:3] * n[:, None, :]
        )  # [C,S,3]
        o_dot_h = np.einsum("csk,ck->cs", hw, n)
        l = 2.0 * o_dot_h[..., None] * hw - n[:, None, :]
        n_dot_l = np.einsum("csk,ck->cs", l, n)
        w = np.clip(n_dot_l, 0.0, None)
        pdf = _ggx_pdf_ndf(h_local[:, 2], alpha)[None, :] / np.maximum(4.0 * o_dot_h, 1e-6)
        sample_sa = 1.0 / np.maximum(samples * pdf, _EPS)
        level = 0.5 * np.log2(np.maximum(sample_sa / base_texel_sa, _EPS))
        vals = _sample_pyramid(pyramid, l.reshape(-1, 3), np.clip(level, 0.0, len(pyramid) - 1).ravel())
        vals = vals.reshape(e - s, samples, -1)
        wsum = np.maximum(w.sum(axis=1, keepdims=True), _EPS)
        faces_out[s:e] = (vals * w[..., None]).sum(axis=1) / wsum
    return Cubemap(faces_out.reshape(6, out_res, out_res, -1))


def _convolve_direct(base: Cubemap, rough, out_res, source_resolution=32):
    """Exact weighted texel sum with the n = v = r GGX kernel."""
    alpha = max(rough * rough, 1e-4)
    src = Cubemap(base.faces.astype(np.float64))
    while src.resolution > max(source_resolution, out_res):
        src = src.downsample()
    src_res = src.resolution
    src_dirs = Cubemap.texel_directions(src_res).reshape(-1, 3)
    src_sa = np.broadcast_to(Cubemap.texel_solid_angles(src_res), (6, src_res, src_res)).reshape(-1)
    radiance = src.faces.reshape(-1, src.channels).astype(np.float64)
    out_dirs = Cubemap.texel_directions(out_res).reshape(-1, 3)
    out = np.zeros((out_dirs.shape[0], src.channels))
    chunk = max(1, 4_000_000 // src_dirs.shape[0])
    for s in range(0, out_dirs.shape[0], chunk):
        e = min(s + chunk, out_dirs.shape[0])
        n_dot_l = out_dirs[s:e] @ src_dirs.T  # [c, S]; n = v = r
        cos_half = np.sqrt(np.clip((n_dot_l + 1.0) * 0.5, 0.0, 1.0))  # n.h for h = normalize(n+l)
        d = _ggx_pdf_ndf(cos_half, alpha) / np.maximum(4.0 * cos_half, _EPS)
        w = np.where(n_dot_l > 0, d * n_dot_l * src_sa[None, :], 0.0)
        out[s:e] = (w @ radiance) / np.maximum(w.sum(axis=1, keepdims=True), _EPS)
    return Cubemap(out.reshape(6, out_res, out_res, -1))


def _ggx_pdf_ndf(n_dot_h, alpha):
    a2 = alpha * alpha
    d = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0
    return a2 * n_dot_h / np.maximum(np.pi * d * d, _EPS)


def diffuse_irradiance(base: Cubemap, out_resolution=32, source_resolution=64):
    """Cosine-convolved irradiance map: texel n holds (1/pi) int L max(n.w,0) dw."""
    src = Cubemap(base.faces.astype(np.float64))
    while src.resolution > source_resolution:
        src = src.downsample()
    src_dirs = Cubemap.texel_directions(src.resolution).reshape(-1, 3)
    src_sa = np.broadcast_to(
        Cubemap.texel_solid_angles(src.resolution), (6, src.resolution, src.resolution)
    ).reshape(-1)
    radiance = src.faces.reshape(-1, src.channels).astype(np.float64)
    out_dirs = Cubemap.texel_directions(out_resolution).reshape(-1, 3)
    out = np.zeros((out_dirs.shape[0], src.channels))
    chunk = 2048
    weighted = radiance * src_sa[:, None]
    for s in range(0, out_dirs.shape[0], chunk):
        e = min(s + chunk, out_dirs.shape[0])
        cosw = np.clip(out_dirs[s:e] @ src_dirs.T, 0.0, None)  # [c, S]
        out[s:e] = cosw @ weighted / np.pi
    return Cubemap(out.reshape(6, out_resolution, out_resolution, -1))


def build_environment(base: Cubemap, prefilter_samples=192, irradiance_resolution=32):
    """Bake a render-ready EnvironmentLight from a base cubemap."""
    mips = prefilter_environment(base, samples=prefilter_samples)
    irr = diffuse_irradiance(base, out_resolution=min(irradiance_resolution, base.resolution))
    return EnvironmentLight(base=base, specular_mips=tuple(mips), irradiance=irr)
