"""Monte Carlo reference shading and ambient occlusion.

These integrate the rendering equation directly (BRDF x incident radiance x
ray-cast visibility x foreshortening) and ground-truth the split-sum and
probe approximations. Deterministic given a seed; multiple importance
sampling combines stratified cosine sampling with GGX half-vector sampling
under the balance heuristic.

The BRDF here is evaluated from its unsimplified Cook-Torrance form (GGX
distribution, Schlick Fresnel, height-correlated Smith); the split-sum LUT
uses the algebraically reduced estimator, so the two sides share only the
material model, not code.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-9
RAY_OFFSET = 1e-4


def _orthobasis(n):
    """Tangent/bitangent for unit normal(s) n."""
    n = np.asarray(n, dtype=np.float64)
    ref = np.where(np.abs(n[..., 2:3]) < 0.999, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    t = np.cross(ref, n)
    t = t / np.linalg.norm(t, axis=-1, keepdims=True)
    b = np.cross(n, t)
    return t, b


def _stratified_2d(count, rng):
    """Jittered sqrt(count) x sqrt(count) grid in [0,1)^2 (count must be square-ish)."""
    side = int(np.floor(np.sqrt(count)))
    base = side * side
    xs, ys = np.meshgrid(np.arange(side), np.arange(side))
    u = (xs.ravel() + rng.random(base)) / side
    v = (ys.ravel() + rng.random(base)) / side
    if base < count:
        extra = rng.random((count - base, 2))
        u = np.concatenate([u, extra[:, 0]])
        v = np.concatenate([v, extra[:, 1]])
    return u, v


def _ggx_d(n_dot_h, alpha):
    a2 = alpha * alpha
    denom = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0
    return a2 / np.maximum(np.pi * denom * denom, _EPS)


def _smith_lambda(mu, alpha):
    mu = np.clip(mu, _EPS, 1.0)
    a2 = alpha * alpha
    return 0.5 * (np.sqrt(1.0 + a2 * (1.0 - mu * mu) / (mu * mu)) - 1.0)


def _g_height_correlated(n_dot_i, n_dot_o, alpha):
    return 1.0 / (1.0 + _smith_lambda(n_dot_i, alpha) + _smith_lambda(n_dot_o, alpha))


def _schlick(v_dot_h, f0):
    return f0 + (1.0 - f0) * np.power(np.clip(1.0 - v_dot_h, 0.0, 1.0), 5.0)[..., None]


def eval_brdf(n, omega_i, omega_o, albedo, roughness, metallic, lobes=("diffuse", "specular")):
    """Cook-Torrance BRDF value [N_i, 3] for fixed n/omega_o and many omega_i.

    Diffuse lobe: (1 - m) * a / pi. Specular lobe:
    D * F * G / (4 (n.wi)(n.wo)) with alpha = roughness^2 and
    F0 = mix(0.04, albedo, metallic).
    """
    n = np.asarray(n, dtype=np.float64)
    omega_i = np.atleast_2d(np.asarray(omega_i, dtype=np.float64))
    albedo = np.asarray(albedo, dtype=np.float64)
    n_dot_i = np.clip(omega_i @ n, 0.0, 1.0)
    n_dot_o = float(np.clip(np.dot(n, omega_o), 0.0, 1.0))
    out = np.zeros((omega_i.shape[0], 3))
    if "diffuse" in lobes:
        out += (1.0 - metallic) * albedo / np.pi
    if "specular" in lobes:
        alpha = max(roughness * roughness, 1e-4)
        h = omega_i + omega_o
        h_norm = np.linalg.norm(h, axis=-1, keepdims=True)
        h = h / np.maximum(h_norm, _EPS)
        n_dot_h = np.clip(h @ n, 0.0, 1.0)
        v_dot_h = np.clip(np.einsum("ij,j->i", h, np.asarray(omega_o, dtype=np.float64)), 0.0, 1.0)
        f0 = 0.04 * (1.0 - metallic) + albedo * metallic
        d = _ggx_d(n_dot_h, alpha)
        g = _g_height_correlated(n_dot_i, n_dot_o, alpha)
        f = _schlick(v_dot_h, f0)
        spec = (d * g / np.maximum(4.0 * n_dot_i * n_dot_o, _EPS))[:, None] * f
        out += np.where((n_dot_i > 0)[:, None], spec, 0.0)
    return out


def _ggx_pdf(omega_i, n, omega_o, alpha):
    """pdf of omega_i under GGX half-vector importance sampling."""
    h = omega_i + omega_o
    h = h / np.maximum(np.linalg.norm(h, axis=-1, keepdims=True), _EPS)
    n_dot_h = np.clip(h @ n, 0.0, 1.0)
    o_dot_h = np.clip(np.einsum("ij,j->i", h, omega_o), _EPS, 1.0)
    return _ggx_d(n_dot_h, alpha) * n_dot_h / (4.0 * o_dot_h)


def _sample_cosine(n, count, rng):
    u, v = _stratified_2d(count, rng)
    r = np.sqrt(u)
    phi = 2 * np.pi * v
    local = np.stack([r * np.cos(phi), r * np.sin(phi), np.sqrt(np.clip(1 - u, 0.0, 1.0))], axis=-1)
    t, b = _orthobasis(n)
    dirs = local[:, 0:1] * t + local[:, 1:2] * b + local[:, 2:3] * n
    pdf = np.clip(dirs @ n, 0.0, 1.0) / np.pi
    return dirs, pdf


def _sample_ggx(n, omega_o, alpha, count, rng):
    u, v = _stratified_2d(count, rng)
    cos_th = np.sqrt((1.0 - u) / (1.0 + (alpha * alpha - 1.0) * u))
    sin_th = np.sqrt(np.clip(1.0 - cos_th * cos_th, 0.0, 1.0))
    phi = 2 * np.pi * v
    local = np.stack([sin_th * np.cos(phi), sin_th * np.sin(phi), cos_th], axis=-1)
    t, b = _orthobasis(n)
    h = local[:, 0:1] * t + local[:, 1:2] * b + local[:, 2:3] * n
    o_dot_h = h @ omega_o
    dirs = 2.0 * o_dot_h[:, None] * h - omega_o
    return dirs


def mc_shade(
    x,
    n,
    material,
    env,
    scene,
    omega_o,
    samples=4096,
    seed=0,
    lobes=("diffuse", "specular"),
):
    """MIS Monte Carlo estimate of the exact shading integral at a surface point.

    material: (albedo RGB, roughness, metallic). env: callable dirs->RGB or a
    Cubemap. scene: AnalyticScene/PosedAnalyticScene or None (no occlusion).
    Visibility is ray-cast from x nudged RAY_OFFSET along n.
    """
    x = np.asarray(x, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    omega_o = np.asarray(omega_o, dtype=np.float64)
    albedo, roughness, metallic = material
    alpha = max(float(roughness) ** 2, 1e-4)
    rng = np.random.default_rng(seed)

    n_cos = samples // 2
    n_ggx = samples - n_cos
    if "specular" not in lobes:
        n_cos, n_ggx = samples, 0
    dirs_c, _ = _sample_cosine(n, n_cos, rng)
    dirs_g = _sample_ggx(n, omega_o, alpha, n_ggx, rng) if n_ggx else np.zeros((0, 3))
    dirs = np.concatenate([dirs_c, dirs_g])

    n_dot_i = dirs @ n
    valid = n_dot_i > 0
    pdf_c = np.clip(n_dot_i, 0.0, None) / np.pi
    pdf_g = _ggx_pdf(dirs, n, omega_o, alpha) if n_ggx else np.zeros(dirs.shape[0])
    denom = n_cos * pdf_c + n_ggx * pdf_g

    f = eval_brdf(n, dirs, omega_o, albedo, roughness, metallic, lobes=lobes)
    radiance = env.sample_bilinear(dirs) if hasattr(env, "sample_bilinear") else np.asarray(env(dirs), dtype=np.float64)
    if scene is not None:
        vis = ~scene.ray_hits(x + RAY_OFFSET * n, dirs, t_min=RAY_OFFSET)
    else:
        vis = np.ones(dirs.shape[0], dtype=bool)

    w = np.where(valid & (denom > _EPS), 1.0 / np.maximum(denom, _EPS), 0.0)
    contrib = f * radiance * (vis * np.clip(n_dot_i, 0.0, None) * w)[:, None]
    return contrib.sum(axis=0)


def brute_force_ao(x, n, scene, samples=4096, seed=0):
    """Cosine-weighted hemispherical visibility in [0, 1], ray-cast against the scene."""
    x = np.asarray(x, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    rng = np.random.default_rng(seed)
    dirs, _ = _sample_cosine(n, samples, rng)
    if scene is None:
        return 1.0
    vis = ~scene.ray_hits(x + RAY_OFFSET * n, dirs, t_min=RAY_OFFSET)
    # cosine-pdf sampling makes the estimator the plain visible fraction
    return float(np.mean(vis))
