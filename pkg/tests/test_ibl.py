import numpy as np
import pytest

from splat_relight.core.cubemap import Cubemap
from splat_relight.ibl import (
    ShadingSample,
    diffuse_irradiance,
    integrate_brdf_cell,
    precompute_brdf_lut,
    prefilter_environment,
    shade,
    shade_batch,
    shade_components,
)
from splat_relight.oracle import mc_shade

from _reference import mc_irradiance, reference_brdf_cell


class TestBrdfLut:
    def test_normal_incidence_smooth_limit(self, lut32):
        # near-mirror at normal incidence: scale -> 1, bias -> 0
        ref_scale, ref_bias = reference_brdf_cell(1.0 - 1 / 64, 1 / 64)
        got = lut32.lookup(1.0 - 1 / 64, 1 / 64)
        assert abs(got[0] - ref_scale) < 0.02
        assert abs(got[1] - ref_bias) < 0.02
        assert got[0] == pytest.approx(1.0, abs=0.02)
        assert got[1] == pytest.approx(0.0, abs=0.02)

    def test_white_furnace_energy_bound(self, lut32):
        t = lut32.table
        assert float((t[..., 0] + t[..., 1]).max()) <= 1.01

    def test_grazing_cell_vs_reference(self, lut32):
        nv = 0.5 / 32  # first row center
        for rough in (0.25, 0.5, 0.9):
            ref = reference_brdf_cell(nv, rough)
            cell = integrate_brdf_cell(nv, rough, samples=8192)
            assert abs(cell[0] - ref[0]) < 0.02
            assert abs(cell[1] - ref[1]) < 0.02

    def test_random_cells_vs_reference(self):
        rng = np.random.default_rng(5)
        for _ in range(4):
            nv = 0.2 + 0.8 * rng.random()
            rough = 0.1 + 0.9 * rng.random()
            ref = reference_brdf_cell(nv, rough)
            cell = integrate_brdf_cell(nv, rough, samples=8192)
            assert abs(cell[0] - ref[0]) < 0.02 and abs(cell[1] - ref[1]) < 0.02

    def test_resolution_and_sample_preconditions(self):
        with pytest.raises(ValueError, match="16x16"):
            precompute_brdf_lut(512, (8, 8))
        with pytest.raises(ValueError, match="256 samples"):
            precompute_brdf_lut(64, (16, 16))


class TestPrefilter:
    def test_constant_map_all_mips(self):
        base = Cubemap.constant([1.5, 1.0, 0.5], 32)
        chain = prefilter_environment(base, samples=96)
        assert len(chain) == 6
        for mip in chain:
            assert np.abs(mip.faces - np.array([1.5, 1.0, 0.5])).max() < 1e-3

    def test_level_zero_is_base(self, gradient_base):
        chain = prefilter_environment(gradient_base, samples=64)
        assert np.array_equal(chain[0].faces, gradient_base.faces)

    def test_single_texel_energy_conserved(self):
        faces = np.zeros((6, 64, 64, 3), dtype=np.float32)
        faces[2, 30, 30] = 500.0
        base = Cubemap(faces)
        e0 = base.total_energy()
        for k, mip in enumerate(prefilter_environment(base, samples=192)[1:], 1):
            ratio = mip.total_energy() / e0
            assert np.abs(ratio - 1).max() < 0.05, f"mip {k} energy off: {ratio}"


class TestIrradiance:
    def test_constant_environment(self):
        base = Cubemap.constant([2.0, 1.0, 0.25], 32)
        irr = diffuse_irradiance(base, out_resolution=8)
        assert np.abs(irr.faces - np.array([2.0, 1.0, 0.25])).max() < 2e-3

    def test_zero_map(self):
        irr = diffuse_irradiance(Cubemap.constant([0, 0, 0], 16), out_resolution=8)
        assert np.abs(irr.faces).max() == 0.0

    def test_hemisphere_split_vs_mc(self):
        def split(d):
            return np.where(d[:, 1:2] > 0, 1.0, 0.0) * np.ones(3)

        base = Cubemap.from_function(split, 64)
        irr = diffuse_irradiance(base, out_resolution=16)
        up = irr.sample_bilinear(np.array([[0.0, 1.0, 0.0]]))[0]
        ref = mc_irradiance(split, [0, 1, 0], samples=1_000_000, seed=1)
        assert np.abs(up - ref).max() / ref.max() < 0.01


class TestShade:
    def test_diffuse_furnace(self, constant_env, lut32):
        # constant env L0, m=0, ao=1: diffuse component alone = albedo * L0
        a = np.array([0.5, 0.25, 0.8])
        s = ShadingSample(n=(0, 0, 1), omega_o=(0, 0, 1), a=a, r=1.0, m=0.0, ao=1.0)
        _, diff, _ = shade_components(s, constant_env, lut32)
        assert np.allclose(diff, a * np.array([2.0, 1.5, 1.0]), rtol=2e-3)

    def test_full_occlusion_black(self, constant_env, lut32):
        s = ShadingSample(n=(0, 0, 1), omega_o=(0, 0, 1), a=(0.5, 0.5, 0.5), r=0.5, m=0.5, ao=0.0)
        assert np.allclose(shade(s, constant_env, lut32), 0.0)

    def test_linear_in_ao(self, gradient_env, lut32):
        s1 = ShadingSample(n=(0, 1, 0), omega_o=(0, 1, 0), a=(0.4, 0.4, 0.4), r=0.5, m=0.3, ao=0.25)
        s2 = ShadingSample(n=(0, 1, 0), omega_o=(0, 1, 0), a=(0.4, 0.4, 0.4), r=0.5, m=0.3, ao=0.5)
        assert np.allclose(2 * shade(s1, gradient_env, lut32), shade(s2, gradient_env, lut32), atol=1e-12)

    def test_metal_has_no_diffuse(self, gradient_env, lut32):
        rng = np.random.default_rng(8)
        for _ in range(5):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            s = ShadingSample(n=n, omega_o=n, a=rng.random(3), r=rng.random(), m=1.0, ao=1.0)
            _, diff, _ = shade_components(s, gradient_env, lut32)
            assert np.abs(diff).max() == 0.0

    def test_azimuth_invariance_constant_env(self, constant_env, lut32):
        n = np.array([0.0, 0.0, 1.0])
        vals = []
        for phi in np.linspace(0, 2 * np.pi, 7):
            wo = np.array([0.6 * np.cos(phi), 0.6 * np.sin(phi), 0.8])
            s = ShadingSample(n=n, omega_o=wo, a=(0.5, 0.5, 0.5), r=0.4, m=0.7, ao=1.0)
            vals.append(shade(s, constant_env, lut32))
        vals = np.array(vals)
        assert np.abs(vals - vals[0]).max() < 1e-3

    def test_rejects_non_unit_inputs(self, constant_env, lut32):
        with pytest.raises(ValueError, match="not unit"):
            shade(ShadingSample(n=(0, 0, 2), omega_o=(0, 0, 1), a=(0.5, 0.5, 0.5), r=0.5, m=0.0), constant_env, lut32)
        with pytest.raises(ValueError, match="not unit"):
            shade(ShadingSample(n=(0, 0, 1), omega_o=(0, 0, 0.5), a=(0.5, 0.5, 0.5), r=0.5, m=0.0), constant_env, lut32)

    def test_requires_prefiltered_env(self, constant_base, lut32):
        from splat_relight.core import EnvironmentLight

        env = EnvironmentLight(base=constant_base)
        with pytest.raises(ValueError, match="pre-filtered"):
            shade(ShadingSample(n=(0, 0, 1), omega_o=(0, 0, 1), a=(0.5, 0.5, 0.5), r=0.5, m=0.0), env, lut32)

    def test_vs_mc_oracle(self, gradient_base, gradient_env, lut32):
        rng = np.random.default_rng(42)
        worst = 0.0
        for i in range(12):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            cosv = 0.15 + 0.85 * rng.random()
            sinv = np.sqrt(1 - cosv * cosv)
            phi = 2 * np.pi * rng.random()
            axis = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.999 else np.array([1.0, 0.0, 0.0])
            t = np.cross(axis, n)
            t /= np.linalg.norm(t)
            b = np.cross(n, t)
            wo = sinv * np.cos(phi) * t + sinv * np.sin(phi) * b + cosv * n
            a = 0.03 + 0.77 * rng.random(3)
            r = 0.3 + 0.7 * rng.random()
            m = rng.random()
            approx = shade(ShadingSample(n=n, omega_o=wo, a=a, r=r, m=m, ao=1.0), gradient_env, lut32)
            ref = mc_shade((0, 0, 0), n, (a, r, m), gradient_base, None, wo, samples=8192, seed=500 + i)
            rel = np.linalg.norm(approx - ref) / max(np.linalg.norm(ref), 1e-12)
            worst = max(worst, rel)
        assert worst < 0.10

    def test_batch_matches_scalar(self, gradient_env, lut32):
        rng = np.random.default_rng(3)
        n = rng.normal(size=(6, 3))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        albedo = rng.random((6, 3)) * 0.7 + 0.05
        rough = rng.random(6)
        metal = rng.random(6)
        ao = rng.random(6)
        out, _, _ = shade_batch(n, n, albedo, rough, metal, ao, gradient_env, lut32)
        for i in range(6):
            one = shade(
                ShadingSample(n=n[i], omega_o=n[i], a=albedo[i], r=rough[i], m=metal[i], ao=ao[i]),
                gradient_env, lut32,
            )
            assert np.allclose(one, out[i], atol=1e-12)
