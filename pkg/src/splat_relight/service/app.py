"""FastAPI service wrapping the relighting engine.

Sessions hold a loaded scene plus its baked assets (shading tables, probe
grids) in memory, so expensive bakes happen once and renders are cheap
repeated calls — the natural shape for an engine that loads an avatar and
then serves many frames.
"""

from __future__ import annotations

import base64
import secrets
import threading

import numpy as np
from fastapi import FastAPI, HTTPException

from ..bench import run_bench
from ..core.io import pfm_bytes, png_bytes
from ..core.types import Camera
from ..ibl import build_environment, precompute_brdf_lut
from ..rasterizer.render import render_attribute, render_deferred, render_forward
from ..scene import SceneError, build_base_cubemap, load_scene
from ..validate import run_ao_suite, run_compositing_suite, run_losses_suite, run_shading_suite
from .schemas import (
    BakeRequest,
    BakeResponse,
    BenchRequest,
    BenchResponse,
    DistillRequest,
    DistillResponse,
    RenderRequest,
    RenderResponse,
    SceneCreateRequest,
    SceneSummary,
    ValidateRequest,
    ValidateResponse,
)


class EngineSession:
    """One loaded scene and its lazily-baked assets."""

    def __init__(self, scene):
        self.scene = scene
        self.lock = threading.Lock()
        self.grids = None
        self._env = None
        self._env_base = None
        self._lut = None

    def tables(self, env_res=64, prefilter_samples=128):
        with self.lock:
            if self._env is None:
                self._env_base = build_base_cubemap(self.scene.env_spec, env_res)
                self._env = build_environment(self._env_base, prefilter_samples=prefilter_samples)
                self._lut = precompute_brdf_lut(1024, (64, 64))
            return self._env_base, self._env, self._lut

    def summary(self, scene_id):
        return SceneSummary(
            scene_id=scene_id,
            splat_count=len(self.scene.cloud),
            num_parts=self.scene.num_parts,
            poses=sorted(self.scene.poses),
            cameras=len(self.scene.cameras),
            probes_baked=self.grids is not None,
        )


def create_app():
    app = FastAPI(title="splat-relight", version="0.1.0")
    sessions: dict[str, EngineSession] = {}
    registry_lock = threading.Lock()

    def get_session(scene_id) -> EngineSession:
        with registry_lock:
            if scene_id not in sessions:
                raise HTTPException(status_code=404, detail=f"unknown scene {scene_id}")
            return sessions[scene_id]

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/scenes", response_model=SceneSummary)
    def create_scene(req: SceneCreateRequest):
        try:
            scene = load_scene(req.scene)
        except SceneError as e:
            raise HTTPException(status_code=422, detail=str(e))
        scene_id = secrets.token_hex(8)
        with registry_lock:
            sessions[scene_id] = EngineSession(scene)
        return sessions[scene_id].summary(scene_id)

    @app.get("/scenes/{scene_id}", response_model=SceneSummary)
    def get_scene(scene_id: str):
        return get_session(scene_id).summary(scene_id)

    @app.delete("/scenes/{scene_id}")
    def delete_scene(scene_id: str):
        with registry_lock:
            if sessions.pop(scene_id, None) is None:
                raise HTTPException(status_code=404, detail=f"unknown scene {scene_id}")
        return {"deleted": scene_id}

    @app.post("/scenes/{scene_id}/bake-probes", response_model=BakeResponse)
    def bake(scene_id: str, req: BakeRequest):
        from ..cli import _bake_grids

        session = get_session(scene_id)
        try:
            grids = _bake_grids(session.scene, req.dims, req.degree, req.face_res, req.backend)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        with session.lock:
            session.grids = grids
        return BakeResponse(
            scene_id=scene_id, parts=len(grids), dims=req.dims, degree=req.degree,
            coefficients_per_point=(req.degree + 1) ** 2,
        )

    @app.post("/scenes/{scene_id}/render", response_model=RenderResponse)
    def render(scene_id: str, req: RenderRequest):
        session = get_session(scene_id)
        scene = session.scene
        try:
            pose = scene.pose(req.pose)
            camera = scene.camera(req.camera)
        except SceneError as e:
            raise HTTPException(status_code=422, detail=str(e))
        grids = session.grids
        if grids is None and not req.no_ao:
            raise HTTPException(status_code=409, detail="probes not baked; call bake-probes or set no_ao")
        try:
            if req.attribute:
                img = render_attribute(scene.cloud, pose, camera, req.attribute, grids, no_ao=req.no_ao)
            else:
                _, env, lut = session.tables()
                fn = render_forward if req.shading == "forward" else render_deferred
                img = fn(scene.cloud, pose, camera, env, lut, grids, no_ao=req.no_ao)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        arr = img.to_array()
        if req.format == "png":
            payload = png_bytes(arr if arr.shape[-1] in (3, 4) else arr[..., :1])
        else:
            payload = pfm_bytes(arr[..., :3] if arr.shape[-1] >= 3 else arr[..., :1])
        return RenderResponse(
            scene_id=scene_id, pose=req.pose, shading=req.shading,
            width=camera.width, height=camera.height,
            covered_pixels=int((arr[..., -1] > 1e-3).sum()),
            image_base64=base64.b64encode(payload).decode(),
            format=req.format,
        )

    @app.post("/scenes/{scene_id}/validate", response_model=ValidateResponse)
    def validate(scene_id: str, req: ValidateRequest):
        session = get_session(scene_id)
        scene = session.scene
        try:
            if req.suite == "compositing":
                result = run_compositing_suite(seed=req.seed)
            elif req.suite == "losses":
                result = run_losses_suite(seed=req.seed)
            elif req.suite == "shading":
                base, env, lut = session.tables()
                result = run_shading_suite(base, env, lut, samples=req.samples, seed=req.seed)
            else:
                from ..cli import _bake_grids

                grids = session.grids or _bake_grids(scene, 16, 2, 16, "auto")
                result = run_ao_suite(scene, grids, samples=req.samples, seed=req.seed, count=25)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return ValidateResponse(
            scene_id=scene_id, suite=result.suite, passed=result.passed,
            aggregate=result.aggregate, csv=result.to_csv(),
        )

    @app.post("/scenes/{scene_id}/bench", response_model=BenchResponse)
    def bench(scene_id: str, req: BenchRequest):
        session = get_session(scene_id)
        scene = session.scene
        if len(scene.cloud) < 1000:
            raise HTTPException(status_code=422, detail="bench needs at least 1000 splats")
        try:
            pose = scene.pose(req.pose)
        except SceneError as e:
            raise HTTPException(status_code=422, detail=str(e))
        camera = Camera.look_at((0.0, 0.05, 1.0), (0.0, -0.1, 0.0), fov_deg=55.0,
                                width=req.width, height=req.height)
        _, env, lut = session.tables()
        grids = session.grids if not req.no_ao else None
        if grids is None and not req.no_ao:
            raise HTTPException(status_code=409, detail="probes not baked; call bake-probes or set no_ao")
        report = run_bench(scene.cloud, pose, camera, env, lut, grids,
                           shading=req.shading, frames=req.frames, no_ao=req.no_ao)
        return BenchResponse(scene_id=scene_id, report=report.to_dict())

    @app.post("/scenes/{scene_id}/distill", response_model=DistillResponse)
    def distill(scene_id: str, req: DistillRequest):
        from ..distill import build_context, distill_demo

        session = get_session(scene_id)
        scene = session.scene
        if scene.teacher is None:
            raise HTTPException(status_code=422, detail="distillation needs a procedural scene with a teacher")
        if len(scene.cloud) > 200:
            raise HTTPException(status_code=422, detail="distillation demo handles at most 200 splats")
        base = build_base_cubemap(scene.env_spec, 32)
        env = build_environment(base, prefilter_samples=64)
        lut = precompute_brdf_lut(512, (32, 32))
        ctx = build_context(scene.teacher, scene.skeleton, scene.cloud, env, lut,
                            rays_per_pose=req.rays_per_pose, seed=req.seed)
        rng = np.random.default_rng(req.seed + 1)
        q = scene.cloud.quat + rng.normal(scale=0.12, size=(len(scene.cloud), 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        perturbed = scene.cloud.replace(quat=q)
        traj, _ = distill_demo(perturbed, ctx, steps=req.steps, lr=req.lr)
        return DistillResponse(
            scene_id=scene_id, steps=req.steps,
            initial_total=traj[0].total, final_total=traj[-1].total,
            trajectory=[r.row() for r in traj],
        )

    return app


app = create_app()
