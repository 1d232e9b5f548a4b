"""Split-sum shading of surface samples under a pre-filtered environment.

color = ao * [ (1 - m) * albedo * irradiance(n)
               + prefiltered(reflect(-w_o, n), roughness) * (F0 * scale + bias) ]

with F0 = mix(0.04, albedo, metallic). The prefiltered lookup interpolates
trilinearly across the roughness mip chain; irradiance and LUT lookups are
bilinear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.types import EnvironmentLight
from .brdf import BrdfLut

_UNIT_TOL = 1e-4


@dataclass(frozen=True)
class ShadingSample:
    """Inputs of one shading evaluation."""

    n: np.ndarray
    omega_o: np.ndarray
    a: np.ndarray
    r: float
    m: float
    ao: float = 1.0

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.float64)
        o = np.asarray(self.omega_o, dtype=np.float64)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "omega_o", o)
        object.__setattr__(self, "a", np.asarray(self.a, dtype=np.float64))
        object.__setattr__(self, "ao", float(np.clip(self.ao, 0.0, 1.0)))


def shade_batch(n, omega_o, albedo, roughness, metallic, ao, env: EnvironmentLight, lut: BrdfLut):
    """Vectorized split-sum shading; all geometric inputs [N,3], scalars [N].

    Raises if normals or view directions are not unit length, or if the
    environment has not been pre-filtered.
    """
    if not env.prefiltered:
        raise ValueError("environment light has no pre-filtered mips/irradiance; bake it first")
    n = np.atleast_2d(np.asarray(n, dtype=np.float64))
    omega_o = np.atleast_2d(np.asarray(omega_o, dtype=np.float64))
    bad_n = np.abs(np.linalg.norm(n, axis=1) - 1.0) > _UNIT_TOL
    if np.any(bad_n):
        raise ValueError(f"normal {int(np.argmax(bad_n))} is not unit length")
    bad_o = np.abs(np.linalg.norm(omega_o, axis=1) - 1.0) > _UNIT_TOL
    if np.any(bad_o):
        raise ValueError(f"view direction {int(np.argmax(bad_o))} is not unit length")
    albedo = np.atleast_2d(np.asarray(albedo, dtype=np.float64))
    roughness = np.atleast_1d(np.asarray(roughness, dtype=np.float64))
    metallic = np.atleast_1d(np.asarray(metallic, dtype=np.float64))
    ao = np.clip(np.atleast_1d(np.asarray(ao, dtype=np.float64)), 0.0, 1.0)

    diffuse = (1.0 - metallic)[:, None] * albedo * env.irradiance.sample_bilinear(n)

    n_dot_v = np.clip(np.einsum("ij,ij->i", n, omega_o), 1e-4, 1.0)
    refl = 2.0 * n_dot_v[:, None] * n - omega_o
    refl = refl / np.linalg.norm(refl, axis=1, keepdims=True)
    prefiltered = _sample_mips(env.specular_mips, refl, roughness)
    ab = lut.lookup(n_dot_v, roughness)
    f0 = 0.04 * (1.0 - metallic)[:, None] + albedo * metallic[:, None]
    specular = prefiltered * (f0 * ab[:, 0:1] + ab[:, 1:2])
    return ao[:, None] * (diffuse + specular), ao[:, None] * diffuse, ao[:, None] * specular


def _sample_mips(mips, dirs, roughness):
    level = np.clip(roughness, 0.0, 1.0) * (len(mips) - 1)
    lo = np.floor(level).astype(np.int64)
    hi = np.minimum(lo + 1, len(mips) - 1)
    t = (level - lo)[:, None]
    out = np.zeros((dirs.shape[0], mips[0].channels))
    for lv in np.unique(lo):
        m = lo == lv
        out[m] = mips[lv].sample_bilinear(dirs[m]) * (1 - t[m])
    for lv in np.unique(hi):
        m = hi == lv
        out[m] += mips[lv].sample_bilinear(dirs[m]) * t[m]
    return out


def shade(sample: ShadingSample, env: EnvironmentLight, lut: BrdfLut):
    """Shade one sample; see shade_batch."""
    total, _, _ = shade_batch(
        sample.n, sample.omega_o, sample.a, sample.r, sample.m, sample.ao, env, lut
    )
    return total[0]


def shade_components(sample: ShadingSample, env: EnvironmentLight, lut: BrdfLut):
    """(total, diffuse, specular) for one sample, each ao-scaled RGB."""
    total, diff, spec = shade_batch(
        sample.n, sample.omega_o, sample.a, sample.r, sample.m, sample.ao, env, lut
    )
    return total[0], diff[0], spec[0]
