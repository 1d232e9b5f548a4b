import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from splat_relight.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def scene_doc(total=200):
    return {
        "version": 1,
        "splats": {"generator": "capsule_person", "total": total, "seed": 2},
        "environment": {"type": "gradient", "resolution": 32},
        "cameras": [{"position": [0, 0.2, 2.0], "look_at": [0, 0, 0], "width": 32, "height": 32}],
    }


@pytest.fixture(scope="module")
def scene_id(client):
    r = client.post("/scenes", json={"scene": scene_doc()})
    assert r.status_code == 200
    return r.json()["scene_id"]


class TestSessions:
    def test_health(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_create_returns_summary(self, client):
        r = client.post("/scenes", json={"scene": scene_doc(total=120)})
        assert r.status_code == 200
        body = r.json()
        assert body["splat_count"] > 50
        assert body["num_parts"] == 9
        assert "arm_lowered" in body["poses"]
        assert not body["probes_baked"]

    def test_invalid_scene_422(self, client):
        r = client.post("/scenes", json={"scene": {"version": 7, "splats": {}}})
        assert r.status_code == 422

    def test_unknown_scene_404(self, client):
        assert client.get("/scenes/deadbeef").status_code == 404

    def test_delete(self, client):
        sid = client.post("/scenes", json={"scene": scene_doc(total=100)}).json()["scene_id"]
        assert client.delete(f"/scenes/{sid}").status_code == 200
        assert client.get(f"/scenes/{sid}").status_code == 404


class TestRender:
    def test_render_without_probes_conflicts(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/render", json={"pose": "rest"})
        assert r.status_code == 409

    def test_render_no_ao_png(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/render", json={"pose": "rest", "no_ao": True})
        assert r.status_code == 200
        body = r.json()
        assert body["covered_pixels"] > 10
        png = base64.b64decode(body["image_base64"])
        assert png[:8] == b"\x89PNG\r\n\x1a\n"

    def test_render_pfm_format(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/render", json={"pose": "rest", "no_ao": True, "format": "pfm"})
        assert r.status_code == 200
        pfm = base64.b64decode(r.json()["image_base64"])
        assert pfm.startswith(b"PF\n")

    def test_attribute_render(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/render", json={"pose": "rest", "no_ao": True, "attribute": "mask"})
        assert r.status_code == 200

    def test_unknown_pose_422(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/render", json={"pose": "cartwheel", "no_ao": True})
        assert r.status_code == 422

    def test_bake_then_render(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/bake-probes", json={"dims": 5, "degree": 1})
        assert r.status_code == 200
        body = r.json()
        assert body["parts"] == 9
        assert body["coefficients_per_point"] == 4
        r = client.post(f"/scenes/{scene_id}/render", json={"pose": "arm_lowered", "shading": "deferred"})
        assert r.status_code == 200
        assert client.get(f"/scenes/{scene_id}").json()["probes_baked"]


class TestValidateAndDistill:
    def test_validate_compositing(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/validate", json={"suite": "compositing", "seed": 3})
        assert r.status_code == 200
        body = r.json()
        assert body["passed"] is True
        assert "aggregate:max_abs" in body["csv"]

    def test_validate_rejects_bad_suite(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/validate", json={"suite": "nope"})
        assert r.status_code == 422

    def test_bench_rejects_small_scene(self, client, scene_id):
        r = client.post(f"/scenes/{scene_id}/bench", json={"frames": 20})
        assert r.status_code == 422

    def test_distill_runs(self, client):
        doc = scene_doc()
        doc["splats"] = {"generator": "capsule_person",
                         "counts_per_part": [6, 2, 2, 2, 2, 2, 2, 2, 2], "seed": 4}
        sid = client.post("/scenes", json={"scene": doc}).json()["scene_id"]
        r = client.post(f"/scenes/{sid}/distill", json={"steps": 2, "rays_per_pose": 48})
        assert r.status_code == 200
        body = r.json()
        assert len(body["trajectory"]) == 3
        assert np.isfinite(body["final_total"])
