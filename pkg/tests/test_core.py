import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splat_relight.core import (
    Camera,
    Cubemap,
    EnvironmentLight,
    Image,
    Pose,
    SplatPrimitive,
    calibrate_albedo,
    linear_to_srgb,
    matrix_to_quat,
    quat_to_matrix,
    srgb_to_linear,
)
from splat_relight.core.io import (
    read_cubemap,
    read_pfm,
    read_png,
    read_lut_pfm,
    write_cubemap,
    write_lut_pfm,
    write_pfm,
    write_png,
)


class TestColor:
    def test_srgb_zero_fixed_point(self):
        assert linear_to_srgb(np.array([0.0]))[0] == 0.0

    def test_srgb_unit_fixed_point(self):
        assert linear_to_srgb(np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-9)

    def test_srgb_half(self):
        # 1.055 * 0.5**(1/2.4) - 0.055, evaluated independently
        expected = 1.055 * 0.5 ** (1 / 2.4) - 0.055
        assert expected == pytest.approx(0.73536, abs=5e-6)
        assert linear_to_srgb(np.array([0.5]))[0] == pytest.approx(expected, abs=1e-9)

    def test_srgb_nonfinite_names_pixel(self):
        img = np.ones((2, 2, 3), dtype=np.float32)
        img[1, 0, 1] = np.nan
        with pytest.raises(ValueError, match="pixel index 2"):
            linear_to_srgb(img)

    @given(st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=200, deadline=None)
    def test_srgb_roundtrip(self, x):
        enc = linear_to_srgb(np.array([x]))
        dec = srgb_to_linear(enc)
        assert abs(dec[0] - x) < 1e-5

    def test_srgb_monotone(self):
        xs = np.linspace(0, 1, 513)
        ys = linear_to_srgb(xs)
        assert np.all(np.diff(ys) > 0)

    def test_srgb_clips_after_gamma(self):
        assert linear_to_srgb(np.array([4.0]))[0] == 1.0

    def test_calibrate_endpoints(self):
        assert np.allclose(calibrate_albedo(np.zeros(3)), 0.03)
        assert np.allclose(calibrate_albedo(np.ones(3)), 0.8)

    def test_calibrate_midpoint(self):
        assert np.allclose(calibrate_albedo(np.full(3, 0.5)), 0.415)

    def test_calibrate_always_in_range_and_monotone(self):
        x = np.linspace(-1, 2, 101)
        y = calibrate_albedo(x)
        assert np.all((y >= 0.03) & (y <= 0.8))
        assert np.all(np.diff(y) >= 0)

    def test_image_roundtrip_through_gamma(self):
        img = Image.from_array(np.random.default_rng(0).random((4, 5, 3)).astype(np.float32))
        out = linear_to_srgb(img)
        assert isinstance(out, Image)
        assert out.width == 5 and out.height == 4


class TestTypes:
    def test_splat_invariants(self):
        p = SplatPrimitive(
            mu_c=(0, 0, 0), q_c=(1, 0, 0, 0), s=(0.1, 0.2), o=1.3, c=(1, 1, 1),
            a=(0.9, 0.0, 0.5), r=-0.5, m=2.0, w=np.array([1.0]),
        )
        assert p.o == 1.0 and p.r == 0.0 and p.m == 1.0
        assert p.a[0] == pytest.approx(0.8) and p.a[1] == pytest.approx(0.03)
        assert np.allclose(p.normal_c, [0, 0, 1])

    def test_splat_rejects_bad_quaternion(self):
        with pytest.raises(ValueError, match="quaternion"):
            SplatPrimitive((0, 0, 0), (1, 1, 0, 0), (0.1, 0.1), 1, (1, 1, 1), (0.5, 0.5, 0.5), 0.5, 0, np.array([1.0]))

    def test_splat_rejects_bad_weights(self):
        with pytest.raises(ValueError, match="weights"):
            SplatPrimitive((0, 0, 0), (1, 0, 0, 0), (0.1, 0.1), 1, (1, 1, 1), (0.5, 0.5, 0.5), 0.5, 0, np.array([0.7]))

    def test_quat_matrix_roundtrip(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            m = quat_to_matrix(q)
            assert np.allclose(m @ m.T, np.eye(3), atol=1e-12)
            q2 = matrix_to_quat(m)
            assert np.allclose(m, quat_to_matrix(q2), atol=1e-10)

    def test_pose_rejects_nonrigid(self):
        bad = np.eye(4)
        bad[0, 0] = 2.0
        with pytest.raises(ValueError, match="rigid"):
            Pose(bad[None], np.eye(4)[None])

    def test_camera_validation(self):
        with pytest.raises(ValueError, match="focal"):
            Camera(np.eye(3), np.zeros(3), -1, 1, 32, 32, 64, 64)
        with pytest.raises(ValueError, match="principal"):
            Camera(np.eye(3), np.zeros(3), 50, 50, 99, 32, 64, 64)

    def test_camera_rays_unit_and_center(self):
        cam = Camera.look_at((0, 0, 2), (0, 0, 0), width=33, height=33, fov_deg=40)
        rays = cam.rays()
        assert np.allclose(np.linalg.norm(rays, axis=-1), 1.0)
        center = rays[16, 16]
        fwd = np.array([0, 0, -1.0])
        assert center @ fwd > 0.999

    def test_image_length_check(self):
        with pytest.raises(ValueError, match="length"):
            Image(4, 4, 3, np.zeros(10))

    def test_environment_light_invariants(self, constant_base):
        with pytest.raises(ValueError, match=">= 0"):
            EnvironmentLight(base=Cubemap(-np.ones((6, 4, 4, 3), dtype=np.float32)))
        env = EnvironmentLight(base=constant_base)
        assert not env.prefiltered


class TestCubemap:
    def test_solid_angles_sum_to_sphere(self):
        for res in (4, 16, 64):
            sa = Cubemap.texel_solid_angles(res)
            assert 6 * sa.sum() == pytest.approx(4 * np.pi, rel=1e-12)

    def test_direction_roundtrip(self):
        cm = Cubemap.from_function(lambda d: d.copy(), 128)
        rng = np.random.default_rng(0)
        d = rng.normal(size=(500, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        rec = cm.sample_bilinear(d)
        rec /= np.linalg.norm(rec, axis=1, keepdims=True)
        assert np.abs(rec - d).max() < 0.01

    def test_constant_sampling(self):
        cm = Cubemap.constant([1.0, 2.0, 3.0], 8)
        d = np.array([[0.3, -0.8, 0.52]])
        d /= np.linalg.norm(d)
        assert np.allclose(cm.sample_bilinear(d), [1, 2, 3])

    def test_downsample_preserves_mean(self):
        rng = np.random.default_rng(1)
        cm = Cubemap(rng.random((6, 8, 8, 3)).astype(np.float32))
        down = cm.downsample()
        assert down.resolution == 4
        assert np.allclose(down.faces.mean(), cm.faces.mean(), atol=1e-6)


class TestIO:
    def test_pfm_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        arr = rng.random((7, 5, 3)).astype(np.float32) * 10
        write_pfm(tmp_path / "x.pfm", arr)
        back = read_pfm(tmp_path / "x.pfm").to_array()
        assert np.array_equal(back, arr)

    def test_pfm_grayscale_roundtrip(self, tmp_path):
        arr = np.random.default_rng(3).random((4, 6, 1)).astype(np.float32)
        write_pfm(tmp_path / "g.pfm", arr)
        assert np.array_equal(read_pfm(tmp_path / "g.pfm").to_array(), arr)

    def test_png_srgb_roundtrip(self, tmp_path):
        arr = np.random.default_rng(4).random((8, 8, 3)).astype(np.float32)
        write_png(tmp_path / "x.png", arr)
        back = read_png(tmp_path / "x.png")
        expected = np.round(linear_to_srgb(arr) * 255) / 255
        assert np.abs(back - expected).max() < 1e-6

    def test_cubemap_face_files(self, tmp_path):
        cm = Cubemap(np.random.default_rng(5).random((6, 4, 4, 3)).astype(np.float32))
        paths = write_cubemap(tmp_path / "env.pfm", cm)
        assert len(paths) == 6
        assert sorted(p.name for p in paths) == sorted(
            f"env{s}.pfm" for s in ("+x", "-x", "+y", "-y", "+z", "-z")
        )
        back = read_cubemap(tmp_path / "env.pfm")
        assert np.array_equal(back.faces, cm.faces)

    def test_missing_face_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="cubemap face"):
            read_cubemap(tmp_path / "nothing.pfm")

    def test_lut_pfm_roundtrip(self, tmp_path):
        table = np.random.default_rng(6).random((16, 16, 2)).astype(np.float32)
        write_lut_pfm(tmp_path / "lut.pfm", table)
        assert np.array_equal(read_lut_pfm(tmp_path / "lut.pfm"), table)
