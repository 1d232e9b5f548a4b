"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class SceneCreateRequest(BaseModel):
    scene: dict = Field(description="scene document (same schema as the JSON scene files)")


class SceneSummary(BaseModel):
    scene_id: str
    splat_count: int
    num_parts: int
    poses: list[str]
    cameras: int
    probes_baked: bool = False


class BakeRequest(BaseModel):
    dims: int = 32
    degree: int = Field(default=2, ge=0, le=4)
    face_res: int = Field(default=16, ge=16)
    backend: str = Field(default="auto", pattern="^(auto|analytic|splats)$")


class BakeResponse(BaseModel):
    scene_id: str
    parts: int
    dims: int
    degree: int
    coefficients_per_point: int


class RenderRequest(BaseModel):
    pose: str = "rest"
    camera: int = 0
    shading: str = Field(default="forward", pattern="^(forward|deferred)$")
    no_ao: bool = False
    attribute: Optional[str] = None
    format: str = Field(default="png", pattern="^(png|pfm)$")


class RenderResponse(BaseModel):
    scene_id: str
    pose: str
    shading: str
    width: int
    height: int
    covered_pixels: int
    image_base64: str
    format: str


class ValidateRequest(BaseModel):
    suite: str = Field(pattern="^(ao|shading|compositing|losses)$")
    samples: int = Field(default=2048, ge=1)
    seed: int = 0


class ValidateResponse(BaseModel):
    scene_id: str
    suite: str
    passed: bool
    aggregate: dict
    csv: str


class BenchRequest(BaseModel):
    width: int = Field(default=540, ge=16)
    height: int = Field(default=540, ge=16)
    frames: int = Field(default=20, ge=20)
    shading: str = Field(default="forward", pattern="^(forward|deferred)$")
    pose: str = "arms_lowered"
    no_ao: bool = True


class BenchResponse(BaseModel):
    scene_id: str
    report: dict


class DistillRequest(BaseModel):
    steps: int = Field(default=20, ge=1)
    lr: float = Field(default=0.02, gt=0)
    seed: int = 0
    rays_per_pose: int = Field(default=96, ge=16)


class DistillResponse(BaseModel):
    scene_id: str
    steps: int
    initial_total: float
    final_total: float
    trajectory: list[dict]
