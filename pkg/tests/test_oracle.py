import numpy as np
import pytest

from splat_relight.core import Cubemap
from splat_relight.oracle import (
    AnalyticScene,
    Capsule,
    Plane,
    ProceduralMaterial,
    Sphere,
    brute_force_ao,
    mc_shade,
    teacher_query,
)


class TestTeacherQuery:
    def test_unit_sphere_outside(self):
        scene = AnalyticScene([Sphere((0, 0, 0), 1.0)])
        sdf, r, m, a, n = teacher_query(scene, np.array([2.0, 0, 0]))
        assert sdf == pytest.approx(1.0)
        assert np.allclose(n, [1, 0, 0], atol=1e-6)

    def test_unit_sphere_center(self):
        scene = AnalyticScene([Sphere((0, 0, 0), 1.0)])
        sdf, *_ = teacher_query(scene, np.zeros(3))
        assert sdf == pytest.approx(-1.0)

    def test_capsule_gradient_matches_analytic(self):
        cap = Capsule((0, -0.3, 0), (0, 0.3, 0), 0.2)
        scene = AnalyticScene([cap])
        rng = np.random.default_rng(5)
        pts = rng.normal(scale=0.6, size=(50, 3))
        # keep clear of the medial axis where the SDF is non-smooth
        pts = pts[np.abs(cap.sdf(pts)) > 0.05][:20]
        numeric = scene.normal(pts)  # central differences
        # closed form: direction away from the nearest axis point
        pa = pts - np.array([0, -0.3, 0])
        h = np.clip(pa[:, 1] / 0.6, 0, 1)
        closest = np.array([0, -0.3, 0]) + h[:, None] * np.array([0, 0.6, 0])
        analytic = pts - closest
        analytic /= np.linalg.norm(analytic, axis=1, keepdims=True)
        assert np.abs(numeric - analytic).max() < 1e-4

    def test_material_fields_in_range(self):
        scene = AnalyticScene([Sphere((0, 0, 0), 1.0)], material=ProceduralMaterial())
        rng = np.random.default_rng(6)
        x = rng.normal(size=(200, 3))
        _, r, m, a, n = teacher_query(scene, x)
        assert np.all((r >= 0) & (r <= 1))
        assert np.all((m >= 0) & (m <= 1))
        assert np.all((a >= 0.03) & (a <= 0.8))
        norms = np.linalg.norm(n, axis=1)
        assert np.abs(norms - 1).max() < 1e-6


class TestBruteForceAo:
    def test_empty_scene(self):
        assert brute_force_ao((0, 0, 0), (0, 0, 1), AnalyticScene([]), 512, seed=1) == 1.0

    def test_enclosed_point(self):
        scene = AnalyticScene([Sphere((0, 0, 0), 1.0)])
        assert brute_force_ao((0, 0, 0), (0, 0, 1), scene, 512, seed=1) == 0.0

    def test_point_on_plane_facing_up(self):
        scene = AnalyticScene([Plane((0, 0, 1), 0.0)])
        val = brute_force_ao((0, 0, 0), (0, 0, 1), scene, 2048, seed=2)
        assert val == pytest.approx(1.0, abs=0.02)

    def test_bounded(self):
        scene = AnalyticScene([Sphere((0.5, 0, 0.5), 0.4)])
        rng = np.random.default_rng(3)
        for i in range(10):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            v = brute_force_ao(rng.normal(size=3), n, scene, 256, seed=i)
            assert 0.0 <= v <= 1.0

    def test_deterministic_given_seed(self):
        scene = AnalyticScene([Sphere((0.3, 0.1, 0.4), 0.5)])
        a = brute_force_ao((0, 0, 0), (0, 0, 1), scene, 1024, seed=9)
        b = brute_force_ao((0, 0, 0), (0, 0, 1), scene, 1024, seed=9)
        assert a == b


class TestMcShade:
    def test_dark_env_is_black(self):
        env = Cubemap.constant([0.0, 0.0, 0.0], 8)
        out = mc_shade((0, 0, 0), (0, 0, 1), (np.full(3, 0.5), 0.5, 0.0), env, None, (0, 0, 1), 512, seed=1)
        assert np.allclose(out, 0.0)

    def test_enclosed_is_black(self):
        env = Cubemap.constant([1.0, 1.0, 1.0], 8)
        scene = AnalyticScene([Sphere((0, 0, 0), 1.0)])
        out = mc_shade((0, 0, 0), (0, 0, 1), (np.full(3, 0.5), 0.5, 0.0), env, scene, (0, 0, 1), 512, seed=1)
        assert np.allclose(out, 0.0)

    def test_lambertian_furnace(self):
        lum = np.array([2.0, 1.0, 0.5])
        env = Cubemap.constant(lum.astype(np.float32), 8)
        a = np.array([0.6, 0.4, 0.7])
        out = mc_shade((0, 0, 0), (0, 0, 1), (a, 0.8, 0.0), env, None, (0, 0, 1), 8192, seed=3,
                       lobes=("diffuse",))
        assert np.abs(out - a * lum).max() / (a * lum).max() < 0.02

    def test_deterministic_given_seed(self, gradient_base):
        args = ((0, 0, 0), (0, 0, 1), (np.full(3, 0.5), 0.4, 0.5), gradient_base, None, (0.3, 0.3, 0.905))
        wo = np.array([0.3, 0.3, 0.905])
        wo /= np.linalg.norm(wo)
        a = mc_shade((0, 0, 0), (0, 0, 1), (np.full(3, 0.5), 0.4, 0.5), gradient_base, None, wo, 2048, seed=4)
        b = mc_shade((0, 0, 0), (0, 0, 1), (np.full(3, 0.5), 0.4, 0.5), gradient_base, None, wo, 2048, seed=4)
        assert np.array_equal(a, b)

    def test_convergence_rate(self, gradient_base):
        # plain MC would shrink the empirical std-dev by 1/sqrt(2) per
        # doubling; the stratified sampler must do at least that well, so a
        # quadrupling must at least halve the spread (measured over 32 seeds)
        wo = np.array([0.2, 0.3, 0.933])
        wo /= np.linalg.norm(wo)
        n = np.array([0.0, 0.0, 1.0])
        mat = (np.full(3, 0.5), 0.45, 0.6)

        def std_at(samples):
            vals = [
                np.linalg.norm(mc_shade((0, 0, 0), n, mat, gradient_base, None, wo, samples, seed=s))
                for s in range(32)
            ]
            return np.std(vals)

        assert std_at(4096) <= 0.55 * std_at(1024)


class TestPosedScene:
    def test_posed_sdf_matches_unposed_at_rest(self, small_avatar):
        _, skeleton, teacher = small_avatar
        pose = skeleton.pose_from_rotations({})
        posed = teacher.posed(pose)
        rng = np.random.default_rng(8)
        x = rng.normal(scale=0.4, size=(50, 3))
        assert np.abs(posed.sdf(x) - teacher.sdf(x)).max() < 1e-12

    def test_posed_geometry_moves(self, small_avatar):
        _, skeleton, teacher = small_avatar
        pose = skeleton.pose_from_rotations({"upper_arm_l": (0, 0, -1.5)})
        posed = teacher.posed(pose)
        # a point on the T-pose lower arm is empty space once the arm drops
        probe = np.array([0.55, 0.46, 0.0])
        assert teacher.sdf(probe) < 0
        assert posed.sdf(probe) > 0

    def test_sphere_trace_hits_surface(self, small_avatar):
        _, skeleton, teacher = small_avatar
        pose = skeleton.pose_from_rotations({})
        posed = teacher.posed(pose)
        o = np.array([[0.0, 0.25, 2.0]])
        d = np.array([[0.0, 0.0, -1.0]])
        hit, t = posed.sphere_trace(o, d)
        assert hit[0]
        x = o[0] + t[0] * d[0]
        assert abs(posed.sdf(x[None])[0]) < 1e-3
