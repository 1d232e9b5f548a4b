import numpy as np
import pytest
from scipy.special import sph_harm_y

from splat_relight.core import Cubemap, Pose
from splat_relight.occlusion import (
    OcclusionProbeGrid,
    SplatOccluders,
    bake_part_grids,
    bake_visibility_cubemap,
    combined_ao_batch,
    convolve_cosine,
    cosine_lobe_zonal_factors,
    eval_sh_basis,
    num_coeffs,
    project_ao_to_sh,
    query_probe,
    query_probe_batch,
    read_probe_grid,
    write_probe_grid,
)
from splat_relight.occlusion.probes import DirectionalAO, project_visibility_to_ao_sh
from splat_relight.oracle import AnalyticScene, Capsule, Plane, Sphere, brute_force_ao


class TestShBasis:
    def test_matches_scipy(self):
        rng = np.random.default_rng(1)
        d = rng.normal(size=(40, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        theta = np.arccos(d[:, 2])
        phi = np.arctan2(d[:, 1], d[:, 0])
        mine = eval_sh_basis(4, d)
        k = 0
        for l in range(5):
            for m in range(-l, l + 1):
                y = sph_harm_y(l, abs(m), theta, phi)
                if m > 0:
                    ref = np.sqrt(2) * (-1) ** m * np.real(y)
                elif m < 0:
                    ref = np.sqrt(2) * (-1) ** m * np.imag(y)
                else:
                    ref = np.real(y)
                assert np.abs(mine[:, k] - ref).max() < 1e-12, (l, m)
                k += 1

    def test_orthonormal_under_texel_quadrature(self):
        res = 64
        dirs = Cubemap.texel_directions(res).reshape(-1, 3)
        sa = np.broadcast_to(Cubemap.texel_solid_angles(res), (6, res, res)).reshape(-1)
        basis = eval_sh_basis(4, dirs)
        gram = basis.T @ (basis * sa[:, None])
        assert np.abs(gram - np.eye(25)).max() < 1e-3

    def test_degree_bounds(self):
        with pytest.raises(ValueError, match="degree"):
            eval_sh_basis(5, np.array([[0, 0, 1.0]]))


class TestVisibility:
    def test_empty_scene_all_ones(self):
        vis = bake_visibility_cubemap((0, 0, 0), AnalyticScene([]), 16)
        assert vis.faces.min() == 1.0

    def test_enclosed_all_zeros(self):
        vis = bake_visibility_cubemap((0, 0, 0), AnalyticScene([Sphere((0, 0, 0), 1.0)]), 16)
        assert vis.faces.max() == 0.0

    def test_half_space_fraction(self):
        scene = AnalyticScene([Plane((0, 0, 1), 0.0)])  # occupied z < 0
        res = 32
        vis = bake_visibility_cubemap((0, 0, 1e-5), scene, res)
        sa = np.broadcast_to(Cubemap.texel_solid_angles(res), (6, res, res)).reshape(-1)
        frac = float((vis.faces.reshape(-1) * sa).sum() / (4 * np.pi))
        assert frac == pytest.approx(0.5, abs=0.02)

    def test_face_res_minimum(self):
        with pytest.raises(ValueError, match="face_res"):
            bake_visibility_cubemap((0, 0, 0), AnalyticScene([]), 8)

    def test_splat_backend_wall(self):
        # dense wall of opaque splats in the z=0 plane blocks -z directions
        rng = np.random.default_rng(2)
        n = 900
        centers = np.zeros((n, 3))
        centers[:, 0] = rng.uniform(-1.5, 1.5, n)
        centers[:, 1] = rng.uniform(-1.5, 1.5, n)
        rot = np.tile(np.eye(3), (n, 1, 1))  # normal +z
        occ = SplatOccluders(centers, rot, np.full((n, 2), 0.12), np.ones(n))
        vis = bake_visibility_cubemap((0, 0, 0.4), occ, 16)
        dirs = Cubemap.texel_directions(16).reshape(-1, 3)
        v = vis.faces.reshape(-1)
        down = dirs[:, 2] < -0.2
        up = dirs[:, 2] > 0.2
        assert v[down].mean() < 0.05
        assert v[up].mean() > 0.95


class TestConvolveProject:
    def test_all_ones_gives_unit_ao(self):
        vis = Cubemap(np.ones((6, 16, 16, 1), dtype=np.float32))
        ao = convolve_cosine(vis)
        assert np.abs(ao.cubemap.faces - 1.0).max() < 1e-3

    def test_all_zeros(self):
        ao = convolve_cosine(Cubemap(np.zeros((6, 16, 16, 1), dtype=np.float32)))
        assert ao.cubemap.faces.max() == 0.0

    def test_half_space_parallel_normal(self):
        scene = AnalyticScene([Plane((0, 0, 1), 0.0)])
        ao = convolve_cosine(bake_visibility_cubemap((0, 0, 1e-5), scene, 32))
        val = ao.cubemap.sample_bilinear(np.array([[1.0, 0, 0]]))[0, 0]
        assert val == pytest.approx(0.5, abs=0.02)

    def test_constant_projects_to_dc_only(self):
        vis = Cubemap(np.ones((6, 32, 32, 1), dtype=np.float32))
        coeffs = project_ao_to_sh(convolve_cosine(vis), 2)
        assert coeffs[0] == pytest.approx(2 * np.sqrt(np.pi), abs=1e-3)
        assert np.abs(coeffs[1:]).max() < 1e-3

    def test_y10_signal_projects_to_single_coeff(self):
        res = 32
        dirs = Cubemap.texel_directions(res)
        signal = eval_sh_basis(1, dirs.reshape(-1, 3))[:, 2].reshape(6, res, res, 1)
        ao = DirectionalAO(Cubemap(np.clip(signal, 0, 1).astype(np.float32) * 0 + np.float32(0)))
        # use the raw signal (clamp-free) through the projection path directly
        sa = np.broadcast_to(Cubemap.texel_solid_angles(res), (6, res, res)).reshape(-1)
        basis = eval_sh_basis(2, dirs.reshape(-1, 3))
        coeffs = basis.T @ (signal.reshape(-1) * sa)
        expect = np.zeros(9)
        expect[2] = 1.0
        assert np.abs(coeffs - expect).max() < 1e-3

    def test_half_space_reconstruction_error(self):
        scene = AnalyticScene([Plane((0, 0, 1), 0.0)])
        ao = convolve_cosine(bake_visibility_cubemap((0, 0, 1e-5), scene, 32))
        coeffs = project_ao_to_sh(ao, 2)
        dirs = Cubemap.texel_directions(16).reshape(-1, 3)
        recon = np.clip(eval_sh_basis(2, dirs) @ coeffs, 0, 1)
        truth = ao.cubemap.sample_bilinear(dirs)[:, 0]
        assert np.abs(recon - truth).mean() < 0.05

    def test_spectral_equals_direct_pipeline(self):
        rng = np.random.default_rng(4)
        res = 16
        dirs = Cubemap.texel_directions(res).reshape(-1, 3)
        sa = np.broadcast_to(Cubemap.texel_solid_angles(res), (6, res, res)).reshape(-1)
        basis_sa = eval_sh_basis(2, dirs) * sa[:, None]
        zonal = cosine_lobe_zonal_factors(2)
        for _ in range(3):
            v = (rng.random(6 * res * res) > rng.random()).astype(np.float64)
            vis = Cubemap(v.astype(np.float32).reshape(6, res, res, 1))
            direct = project_ao_to_sh(convolve_cosine(vis), 2)
            spectral = project_visibility_to_ao_sh(v[None], basis_sa, zonal)[0]
            assert np.abs(direct - spectral).max() < 5e-4


def bake_single_capsule(dims=16, degree=2):
    cap = Capsule((0, 0, 0), (0, 0.4, 0), 0.1, part=0)
    scene = AnalyticScene([cap])
    return scene, bake_part_grids([scene], part_sdfs=[scene.sdf], dims=dims, degree=degree, face_res=16)[0]


class TestProbeGrid:
    def test_empty_scene_grid_is_one(self):
        grids = bake_part_grids([None], dims=4, degree=2)
        vals = query_probe_batch(grids[0], np.zeros((5, 3)), np.tile([0, 0, 1.0], (5, 1)))
        assert np.allclose(vals, 1.0)

    def test_query_at_lattice_point_equals_direct_sh(self):
        _, grid = bake_single_capsule(dims=8)
        pts = grid.lattice_points().reshape(8, 8, 8, 3)
        p = pts[2, 3, 4]
        n = np.array([0.0, 0.0, 1.0])
        direct = float(np.clip(eval_sh_basis(2, n[None]) @ grid.coeffs[2, 3, 4].astype(np.float64), 0, 1)[0])
        assert query_probe(grid, p, n) == pytest.approx(direct, abs=1e-7)

    def test_outside_bounds_returns_one(self):
        _, grid = bake_single_capsule(dims=8)
        assert query_probe(grid, grid.bounds_hi + 1.0, (0, 0, 1)) == 1.0

    def test_continuity_across_cells(self):
        _, grid = bake_single_capsule(dims=8)
        span = grid.bounds_hi - grid.bounds_lo
        n = np.array([1.0, 0, 0])
        xs = grid.bounds_lo[0] + np.linspace(0.3, 0.7, 200) * span[0]
        pts = np.stack([xs, np.full_like(xs, grid.bounds_lo[1] + 0.55 * span[1]),
                        np.full_like(xs, grid.bounds_lo[2] + 0.55 * span[2])], axis=1)
        vals = query_probe_batch(grid, pts, np.tile(n, (200, 1)))
        # trilinear interpolation: steps between adjacent samples stay small
        assert np.abs(np.diff(vals)).max() < 0.05

    def test_surface_accuracy_vs_brute_force(self):
        scene, grid = bake_single_capsule(dims=16)
        rng = np.random.default_rng(7)
        pts = []
        nrm = []
        for _ in range(40):
            h = rng.random() * 0.4
            phi = rng.random() * 2 * np.pi
            pts.append([0.1 * np.cos(phi), h, 0.1 * np.sin(phi)])
            nrm.append([np.cos(phi), 0.0, np.sin(phi)])
        pts = np.array(pts)
        nrm = np.array(nrm)
        approx = query_probe_batch(grid, pts, nrm)
        ref = np.array([brute_force_ao(p, n, scene, 2048, seed=30 + i) for i, (p, n) in enumerate(zip(pts, nrm))])
        assert np.abs(approx - ref).mean() < 0.05

    def test_degree_truncation_monotonicity(self):
        scene, grid = bake_single_capsule(dims=16)
        g0 = grid.truncated(0)
        rng = np.random.default_rng(9)
        pts = []
        nrm = []
        for _ in range(30):
            h = rng.random() * 0.4
            phi = rng.random() * 2 * np.pi
            pts.append([0.1 * np.cos(phi), h, 0.1 * np.sin(phi)])
            nrm.append([np.cos(phi), 0.0, np.sin(phi)])
        pts = np.array(pts)
        nrm = np.array(nrm)
        ref = np.array([brute_force_ao(p, n, scene, 2048, seed=60 + i) for i, (p, n) in enumerate(zip(pts, nrm))])
        err2 = np.abs(query_probe_batch(grid, pts, nrm) - ref).mean()
        err0 = np.abs(query_probe_batch(g0, pts, nrm) - ref).mean()
        assert err0 >= err2


class TestCombinedAo:
    def test_product_structure(self):
        coeffs = np.zeros((2, 2, 2, 9), dtype=np.float32)
        coeffs[..., 0] = 0.5 * 2 * np.sqrt(np.pi)  # constant AO 0.5
        half = OcclusionProbeGrid(0, (-1, -1, -1), (1, 1, 1), (2, 2, 2), 2, coeffs)
        one = OcclusionProbeGrid(1, (-1, -1, -1), (1, 1, 1), (2, 2, 2), 2,
                                 np.broadcast_to([2 * np.sqrt(np.pi)] + [0] * 8, (2, 2, 2, 9)).astype(np.float32))
        pose = Pose.identity(1, 9)
        grids = [half, half] + [one] * 7
        vals = combined_ao_batch(np.zeros((1, 3)), np.array([[0, 0, 1.0]]), pose, grids)
        assert vals[0] == pytest.approx(0.25, abs=1e-5)

    def test_zero_absorbs(self):
        zero = OcclusionProbeGrid(0, (-1, -1, -1), (1, 1, 1), (2, 2, 2), 2, np.zeros((2, 2, 2, 9), np.float32))
        one = OcclusionProbeGrid(1, (-1, -1, -1), (1, 1, 1), (2, 2, 2), 2,
                                 np.broadcast_to([2 * np.sqrt(np.pi)] + [0] * 8, (2, 2, 2, 9)).astype(np.float32))
        pose = Pose.identity(1, 9)
        vals = combined_ao_batch(np.zeros((1, 3)), np.array([[0, 0, 1.0]]), pose, [zero] + [one] * 8)
        assert vals[0] == 0.0

    def test_all_empty_parts_give_one(self):
        pose = Pose.identity(1, 9)
        grids = bake_part_grids([None] * 9, dims=2, degree=2)
        vals = combined_ao_batch(np.zeros((3, 3)), np.tile([0, 0, 1.0], (3, 1)), pose, grids)
        assert np.allclose(vals, 1.0)

    def test_order_independence(self):
        rng = np.random.default_rng(11)
        grids = []
        for p in range(9):
            c = np.zeros((2, 2, 2, 9), dtype=np.float32)
            c[..., 0] = (0.5 + 0.5 * rng.random()) * 2 * np.sqrt(np.pi)
            grids.append(OcclusionProbeGrid(p, (-1, -1, -1), (1, 1, 1), (2, 2, 2), 2, c))
        pose = Pose.identity(1, 9)
        x = np.zeros((1, 3))
        n = np.array([[0, 0, 1.0]])
        a = combined_ao_batch(x, n, pose, grids)
        b = np.prod([query_probe_batch(g, x, n) for g in grids], axis=0)
        assert np.allclose(a, b, atol=1e-12)

    def test_wrong_grid_count(self):
        pose = Pose.identity(1, 9)
        with pytest.raises(ValueError, match="9 probe grids"):
            combined_ao_batch(np.zeros((1, 3)), np.array([[0, 0, 1.0]]), pose, [None] * 3)


class TestPoseIndependence:
    def test_grids_are_bake_once(self, small_avatar):
        # probes live in part-canonical frames: posing the avatar must not
        # change them, only the query transform
        cloud, skeleton, teacher = small_avatar
        from splat_relight.scene import part_occluder_scenes

        parts = part_occluder_scenes(teacher)
        grids_a = bake_part_grids(parts[:2], part_sdfs=[p.sdf for p in parts[:2]], dims=6, degree=1)
        grids_b = bake_part_grids(parts[:2], part_sdfs=[p.sdf for p in parts[:2]], dims=6, degree=1)
        for a, b in zip(grids_a, grids_b):
            assert np.array_equal(a.coeffs, b.coeffs)


class TestProbeFile:
    def test_roundtrip_bytes_identical(self, tmp_path):
        _, grid = bake_single_capsule(dims=6, degree=2)
        p1 = tmp_path / "a.probes"
        p2 = tmp_path / "b.probes"
        write_probe_grid(p1, grid)
        back = read_probe_grid(p1)
        assert back.part == grid.part
        assert back.dims == grid.dims
        assert back.degree == grid.degree
        assert np.array_equal(back.coeffs, grid.coeffs)
        assert np.allclose(back.bounds_lo, grid.bounds_lo)
        write_probe_grid(p2, back)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_wrong_magic(self, tmp_path):
        bad = tmp_path / "bad.probes"
        bad.write_bytes(b"NOPE" + b"\0" * 100)
        with pytest.raises(ValueError, match="not a probe grid"):
            read_probe_grid(bad)

    def test_coefficient_count_follows_degree(self, tmp_path):
        for degree in (0, 1, 3):
            _, grid = bake_single_capsule(dims=4, degree=degree)
            assert grid.coeffs.shape[-1] == num_coeffs(degree) == (degree + 1) ** 2
