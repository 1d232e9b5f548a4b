import json

import numpy as np
import pytest

from splat_relight.cli import EXIT_OK, EXIT_USAGE, main
from splat_relight.core import ALBEDO_MAX, ALBEDO_MIN
from splat_relight.scene import (
    SceneError,
    capsule_person_shapes,
    default_part_counts,
    generate_capsule_person,
    load_scene,
)


def scene_doc(total=220, **extra):
    doc = {
        "version": 1,
        "splats": {"generator": "capsule_person", "total": total, "seed": 1},
        "environment": {"type": "gradient", "resolution": 32},
    }
    doc.update(extra)
    return doc


def write_scene(tmp_path, doc, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


class TestCapsulePerson:
    def test_nine_parts_ten_capsules(self):
        shapes = capsule_person_shapes()
        parts = sorted({s[4] for s in shapes})
        assert parts == list(range(9))

    def test_generator_invariants(self):
        cloud, skeleton, teacher = generate_capsule_person(seed=3)
        assert skeleton.num_parts == 9
        assert cloud.num_bones == 9
        assert np.allclose(np.linalg.norm(cloud.quat, axis=1), 1.0, atol=1e-9)
        assert np.all(cloud.s > 0)
        assert np.all((cloud.albedo >= ALBEDO_MIN) & (cloud.albedo <= ALBEDO_MAX))
        assert np.allclose(cloud.weights.sum(axis=1), 1.0)
        # splats sit on (or inside, where capsules overlap) the union surface
        assert teacher.sdf(cloud.mu_c).max() < 1e-6

    def test_counts_scale_with_budget(self):
        small = default_part_counts(500)
        big = default_part_counts(5000)
        assert sum(big) > 8 * sum(small)
        assert len(small) == 9

    def test_deterministic_given_seed(self):
        a, _, _ = generate_capsule_person(seed=9)
        b, _, _ = generate_capsule_person(seed=9)
        assert np.array_equal(a.mu_c, b.mu_c)
        assert np.array_equal(a.quat, b.quat)


class TestSceneLoading:
    def test_loads_generator_scene(self, tmp_path):
        scene = load_scene(write_scene(tmp_path, scene_doc()))
        assert len(scene.cloud) > 100
        assert scene.teacher is not None
        assert "arm_lowered" in scene.poses

    def test_version_check(self, tmp_path):
        with pytest.raises(SceneError, match="version"):
            load_scene(write_scene(tmp_path, {"version": 99, "splats": {"generator": "capsule_person"}}))

    def test_unknown_generator(self, tmp_path):
        with pytest.raises(SceneError, match="generator"):
            load_scene(write_scene(tmp_path, {"version": 1, "splats": {"generator": "robot"}}))

    def test_missing_file(self):
        with pytest.raises(SceneError, match="not found"):
            load_scene("/nonexistent/scene.json")

    def test_explicit_splat_list(self, tmp_path):
        doc = {
            "version": 1,
            "skeleton": {"bones": [{"name": "root", "parent": -1, "head": [0, 0, 0], "part": 0}]},
            "splats": {"list": [{"position": [0, 0, 0], "scale": [0.1, 0.1], "weights": {"0": 1.0}}]},
        }
        scene = load_scene(write_scene(tmp_path, doc))
        assert len(scene.cloud) == 1
        assert scene.teacher is None

    def test_splat_list_validation_names_entry(self, tmp_path):
        doc = {
            "version": 1,
            "skeleton": {"bones": [{"name": "root", "parent": -1, "head": [0, 0, 0], "part": 0}]},
            "splats": {"list": [{"position": [0, 0, 0], "scale": [-0.1, 0.1], "weights": {"0": 1.0}}]},
        }
        with pytest.raises(SceneError, match=r"splats.list\[0\]"):
            load_scene(write_scene(tmp_path, doc))

    def test_pose_validation_names_bone(self, tmp_path):
        doc = scene_doc(poses=[{"name": "bad", "rotations": {"no_such_bone": [0, 0, 1]}}])
        with pytest.raises(SceneError, match="no_such_bone"):
            load_scene(write_scene(tmp_path, doc))

    def test_bad_camera_named(self, tmp_path):
        doc = scene_doc(cameras=[{"fov_deg": -10}])
        with pytest.raises(SceneError, match=r"cameras\[0\]"):
            load_scene(write_scene(tmp_path, doc))

    def test_unknown_pose_lookup(self, tmp_path):
        scene = load_scene(write_scene(tmp_path, scene_doc()))
        with pytest.raises(SceneError, match="unknown pose"):
            scene.pose("moonwalk")


class TestCli:
    def test_bake_render_roundtrip(self, tmp_path):
        scene = write_scene(tmp_path, scene_doc(total=200, cameras=[
            {"position": [0, 0.2, 2.0], "look_at": [0, 0, 0], "width": 48, "height": 48}
        ]))
        probes = tmp_path / "probes"
        rc = main(["bake-probes", "--scene", scene, "--out", str(probes),
                   "--probe-dims", "6", "--sh-degree", "1", "--face-res", "16"])
        assert rc == EXIT_OK
        manifest = json.loads((probes / "manifest.json").read_text())
        assert len(manifest["parts"]) == 9
        assert all((probes / e["file"]).exists() for e in manifest["parts"])

        out = tmp_path / "frame"
        rc = main(["render", "--scene", scene, "--probes", str(probes), "--out", str(out),
                   "--pose", "rest", "--shading", "forward"])
        assert rc == EXIT_OK
        assert out.with_suffix(".pfm").exists() and out.with_suffix(".png").exists()

    def test_rebake_is_byte_identical(self, tmp_path):
        scene = write_scene(tmp_path, scene_doc(total=150))
        p1, p2 = tmp_path / "a", tmp_path / "b"
        for p in (p1, p2):
            assert main(["bake-probes", "--scene", scene, "--out", str(p),
                         "--probe-dims", "5", "--sh-degree", "1"]) == EXIT_OK
        for f in sorted(x.name for x in p1.iterdir()):
            assert (p1 / f).read_bytes() == (p2 / f).read_bytes(), f

    def test_degree_zero_single_coefficient(self, tmp_path):
        from splat_relight.occlusion import read_probe_grid

        scene = write_scene(tmp_path, scene_doc(total=150))
        probes = tmp_path / "p0"
        assert main(["bake-probes", "--scene", scene, "--out", str(probes),
                     "--probe-dims", "4", "--sh-degree", "0"]) == EXIT_OK
        grid = read_probe_grid(probes / "part_00.probes")
        assert grid.coeffs.shape[-1] == 1

    def test_render_requires_probes_or_flag(self, tmp_path):
        scene = write_scene(tmp_path, scene_doc(total=150))
        rc = main(["render", "--scene", scene, "--out", str(tmp_path / "x")])
        assert rc == EXIT_USAGE

    def test_render_no_ao_deterministic(self, tmp_path):
        scene = write_scene(tmp_path, scene_doc(total=150, cameras=[
            {"position": [0, 0.2, 2.0], "look_at": [0, 0, 0], "width": 32, "height": 32}
        ]))
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["render", "--scene", scene, "--no-ao", "--out", str(out)]) == EXIT_OK
            outs.append(out.with_suffix(".pfm").read_bytes())
        assert outs[0] == outs[1]

    def test_no_ao_equals_empty_probes_on_shadowless_pose(self, tmp_path):
        # AO == 1 everywhere when all probe grids come from empty parts
        from splat_relight.occlusion import bake_part_grids, write_probe_grid

        scene = write_scene(tmp_path, scene_doc(total=150, cameras=[
            {"position": [0, 0.2, 2.0], "look_at": [0, 0, 0], "width": 32, "height": 32}
        ]))
        probes = tmp_path / "empty_probes"
        probes.mkdir()
        grids = bake_part_grids([None] * 9, dims=2, degree=2)
        manifest = {"parts": []}
        for g in grids:
            write_probe_grid(probes / f"part_{g.part:02d}.probes", g)
            manifest["parts"].append({"part": g.part, "file": f"part_{g.part:02d}.probes",
                                      "dims": [2, 2, 2], "degree": 2})
        (probes / "manifest.json").write_text(json.dumps(manifest))
        a = tmp_path / "with_empty"
        b = tmp_path / "with_flag"
        assert main(["render", "--scene", scene, "--probes", str(probes), "--out", str(a)]) == EXIT_OK
        assert main(["render", "--scene", scene, "--no-ao", "--out", str(b)]) == EXIT_OK
        assert a.with_suffix(".pfm").read_bytes() == b.with_suffix(".pfm").read_bytes()

    def test_forward_deferred_identical_png_single_splat(self, tmp_path):
        doc = {
            "version": 1,
            "skeleton": {"bones": [{"name": "root", "parent": -1, "head": [0, 0, 0], "part": 0}]},
            "splats": {"list": [{"position": [0, 0, 0], "scale": [0.05, 0.05], "opacity": 0.9,
                                 "albedo": [0.4, 0.5, 0.6], "roughness": 0.8, "weights": {"0": 1.0}}]},
            "environment": {"type": "constant", "value": [1.0, 1.0, 1.0]},
            "cameras": [{"position": [0, 0, 1.5], "look_at": [0, 0, 0], "width": 33, "height": 33}],
        }
        scene = write_scene(tmp_path, doc)
        pngs = []
        for mode in ("forward", "deferred"):
            out = tmp_path / mode
            assert main(["render", "--scene", scene, "--no-ao", "--shading", mode, "--out", str(out)]) == EXIT_OK
            pngs.append(out.with_suffix(".png").read_bytes())
        assert pngs[0] == pngs[1]

    def test_validate_compositing_passes(self, tmp_path, capsys):
        rc = main(["validate", "--scene", "unused.json", "--suite", "compositing",
                   "--out", str(tmp_path / "c.csv")])
        assert rc == EXIT_OK
        text = (tmp_path / "c.csv").read_text()
        assert "aggregate:max_abs" in text

    def test_validate_csv_deterministic(self, tmp_path):
        texts = []
        for name in ("v1.csv", "v2.csv"):
            rc = main(["validate", "--scene", "unused.json", "--suite", "compositing",
                       "--seed", "5", "--out", str(tmp_path / name)])
            assert rc == EXIT_OK
            texts.append((tmp_path / name).read_text())
        assert texts[0] == texts[1]

    def test_validate_losses_passes(self, tmp_path):
        rc = main(["validate", "--scene", "unused.json", "--suite", "losses",
                   "--out", str(tmp_path / "l.csv")])
        assert rc == EXIT_OK

    def test_unknown_suite_is_usage_error(self):
        assert main(["validate", "--scene", "x.json", "--suite", "nonsense"]) == EXIT_USAGE

    def test_bench_rejects_small_scene(self, tmp_path):
        scene = write_scene(tmp_path, scene_doc(total=200))
        rc = main(["bench", "--scene", scene, "--width", "64", "--height", "64"])
        assert rc == EXIT_USAGE

    def test_missing_scene_is_io_or_usage(self, tmp_path):
        rc = main(["render", "--scene", str(tmp_path / "absent.json"), "--no-ao",
                   "--out", str(tmp_path / "x")])
        assert rc == EXIT_USAGE

    def test_distill_demo_cli(self, tmp_path):
        doc = scene_doc(total=0)
        doc["splats"]["counts_per_part"] = [6, 2, 2, 2, 2, 2, 2, 2, 2]
        doc["distill"] = {"steps": 2, "lr": 0.01, "rays_per_pose": 48, "grid_resolution": 12}
        scene = write_scene(tmp_path, doc)
        out = tmp_path / "traj.csv"
        rc = main(["distill-demo", "--scene", scene, "--out", str(out)])
        assert rc == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("step,")
        assert len(lines) == 4  # header + 2 steps + final

    def test_attribute_render(self, tmp_path):
        scene = write_scene(tmp_path, scene_doc(total=150, cameras=[
            {"position": [0, 0.2, 2.0], "look_at": [0, 0, 0], "width": 24, "height": 24}
        ]))
        out = tmp_path / "mask"
        rc = main(["render", "--scene", scene, "--no-ao", "--attribute", "mask", "--out", str(out)])
        assert rc == EXIT_OK
