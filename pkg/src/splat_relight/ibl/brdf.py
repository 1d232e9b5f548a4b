"""Pre-integrated specular BRDF lookup table (split-sum, Fresnel-split form).

Each cell over (cos_theta_v, roughness) stores the pair (scale, bias) such
that the specular integral approximates F0 * scale + bias. Sampling follows
the GGX half-vector distribution with a Hammersley sequence; the geometry
term is height-correlated Smith with alpha = roughness^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = 1e-9


def hammersley(count):
    """First `count` points of the (0, phi_2) Hammersley set in [0,1)^2."""
    i = np.arange(count, dtype=np.uint32)
    bits = i.copy()
    bits = (bits << np.uint32(16)) | (bits >> np.uint32(16))
    bits = ((bits & np.uint32(0x55555555)) << np.uint32(1)) | ((bits & np.uint32(0xAAAAAAAA)) >> np.uint32(1))
    bits = ((bits & np.uint32(0x33333333)) << np.uint32(2)) | ((bits & np.uint32(0xCCCCCCCC)) >> np.uint32(2))
    bits = ((bits & np.uint32(0x0F0F0F0F)) << np.uint32(4)) | ((bits & np.uint32(0xF0F0F0F0)) >> np.uint32(4))
    bits = ((bits & np.uint32(0x00FF00FF)) << np.uint32(8)) | ((bits & np.uint32(0xFF00FF00)) >> np.uint32(8))
    return i.astype(np.float64) / count, bits.astype(np.float64) * 2.3283064365386963e-10


def ggx_sample_h(u1, u2, alpha):
    """Half vectors in the local frame (n = +z) from uniform pairs."""
    cos_th = np.sqrt((1.0 - u2) / (1.0 + (alpha * alpha - 1.0) * u2))
    sin_th = np.sqrt(np.clip(1.0 - cos_th * cos_th, 0.0, 1.0))
    phi = 2.0 * np.pi * u1
    return np.stack([sin_th * np.cos(phi), sin_th * np.sin(phi), cos_th], axis=-1)


def smith_g_height_correlated(n_dot_i, n_dot_o, alpha):
    def lam(mu):
        mu = np.clip(mu, _EPS, 1.0)
        return 0.5 * (np.sqrt(1.0 + alpha * alpha * (1.0 - mu * mu) / (mu * mu)) - 1.0)

    return 1.0 / (1.0 + lam(n_dot_i) + lam(n_dot_o))


def integrate_brdf_cell(n_dot_v, roughness, samples=1024):
    """(scale, bias) of one LUT cell via GGX importance sampling."""
    n_dot_v = float(np.clip(n_dot_v, 1e-4, 1.0))
    alpha = max(float(roughness) ** 2, 1e-4)
    v = np.array([np.sqrt(1.0 - n_dot_v * n_dot_v), 0.0, n_dot_v])
    u1, u2 = hammersley(samples)
    h = ggx_sample_h(u1, u2, alpha)
    l = 2.0 * (h @ v)[:, None] * h - v
    n_dot_l = l[:, 2]
    n_dot_h = np.clip(h[:, 2], 0.0, 1.0)
    v_dot_h = np.clip(h @ v, 0.0, 1.0)
    ok = n_dot_l > 0
    g = smith_g_height_correlated(np.clip(n_dot_l, 0, 1), n_dot_v, alpha)
    g_vis = np.where(ok, g * v_dot_h / np.maximum(n_dot_h * n_dot_v, _EPS), 0.0)
    fc = np.power(1.0 - v_dot_h, 5.0)
    scale = np.mean((1.0 - fc) * g_vis)
    bias = np.mean(fc * g_vis)
    return float(scale), float(bias)


@dataclass(frozen=True)
class BrdfLut:
    """table[iv, ir, 0:2] = (scale, bias); iv indexes cos_theta_v, ir roughness.

    Cell centers sit at (i + 0.5) / size; lookups are bilinear with edge clamp.
    """

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float32)
        if t.ndim != 3 or t.shape[2] != 2:
            raise ValueError(f"LUT table must be [H, W, 2], got {t.shape}")
        if t.min() < -1e-4 or t.max() > 1 + 1e-4:
            raise ValueError("LUT scale/bias entries must lie in [0, 1]")
        t = np.clip(t, 0.0, 1.0)  # absorb float32 rounding at the mirror limit
        if float((t[..., 0] + t[..., 1]).max()) > 1.01:
            raise ValueError("LUT violates the energy bound scale + bias <= 1.01")
        object.__setattr__(self, "table", t)

    @property
    def resolution(self):
        return self.table.shape[:2]

    def lookup(self, n_dot_v, roughness):
        """Bilinear (scale, bias) lookup; inputs may be arrays."""
        nv = np.clip(np.asarray(n_dot_v, dtype=np.float64), 1e-4, 1.0)
        r = np.clip(np.asarray(roughness, dtype=np.float64), 0.0, 1.0)
        h, w = self.resolution
        fi = nv * h - 0.5
        fj = r * w - 0.5
        i0 = np.clip(np.floor(fi).astype(np.int64), 0, h - 1)
        j0 = np.clip(np.floor(fj).astype(np.int64), 0, w - 1)
        i1 = np.minimum(i0 + 1, h - 1)
        j1 = np.minimum(j0 + 1, w - 1)
        ti = np.clip(fi - np.floor(fi), 0.0, 1.0)[..., None]
        tj = np.clip(fj - np.floor(fj), 0.0, 1.0)[..., None]
        t = self.table.astype(np.float64)
        top = t[i0, j0] * (1 - tj) + t[i0, j1] * tj
        bot = t[i1, j0] * (1 - tj) + t[i1, j1] * tj
        return top * (1 - ti) + bot * ti


def precompute_brdf_lut(samples_per_cell=1024, resolution=(64, 64)):
    """Bake the split-sum LUT. resolution = (n_cos_cells, n_roughness_cells)."""
    h, w = resolution
    if h < 16 or w < 16:
        raise ValueError(f"LUT resolution must be at least 16x16, got {resolution}")
    if samples_per_cell < 256:
        raise ValueError(f"need at least 256 samples per cell, got {samples_per_cell}")
    # vectorized over cells: build sample grids once, broadcast per roughness row
    u1, u2 = hammersley(samples_per_cell)
    nv = (np.arange(h) + 0.5) / h
    rough = (np.arange(w) + 0.5) / w
    table = np.zeros((h, w, 2), dtype=np.float64)
    v = np.stack([np.sqrt(1.0 - nv * nv), np.zeros_like(nv), nv], axis=-1)  # [h,3]
    for j, r in enumerate(rough):
        alpha = max(r * r, 1e-4)
        hvec = ggx_sample_h(u1, u2, alpha)  # [S,3]
        v_dot_h = v @ hvec.T  # [h,S]
        n_dot_l = 2.0 * v_dot_h * hvec[:, 2][None, :] - v[:, 2:3]  # l_z
        n_dot_h = np.clip(hvec[:, 2], 0.0, 1.0)[None, :]
        v_dot_h = np.clip(v_dot_h, 0.0, 1.0)
        ok = n_dot_l > 0
        g = smith_g_height_correlated(np.clip(n_dot_l, 0, 1), nv[:, None], alpha)
        g_vis = np.where(ok, g * v_dot_h / np.maximum(n_dot_h * nv[:, None], _EPS), 0.0)
        fc = np.power(1.0 - v_dot_h, 5.0)
        table[:, j, 0] = np.mean((1.0 - fc) * g_vis, axis=1)
        table[:, j, 1] = np.mean(fc * g_vis, axis=1)
    return BrdfLut(table)
