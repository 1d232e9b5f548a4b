"""Per-stage frame timing harness.

Reports median wall-times over warm frames for the four pipeline stages
(LBS, occlusion query, shading, rasterization) plus the frame total, in the
same column layout as the forward/deferred comparison it mirrors.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .rasterizer.render import render_deferred, render_forward

STAGES = ("lbs", "occlusion", "shading", "raster")
MIN_WARM_FRAMES = 20


@dataclass
class BenchReport:
    """Median per-stage milliseconds over warm frames."""

    stage_ms: dict
    total_ms: float
    resolution: tuple
    splat_count: int
    shading_mode: str
    frames: int
    raw_totals_ms: list = field(default_factory=list)

    def __post_init__(self):
        if self.frames < MIN_WARM_FRAMES:
            raise ValueError(f"bench needs at least {MIN_WARM_FRAMES} warm frames, got {self.frames}")

    def to_dict(self):
        return {
            "stage_ms": {k: round(v, 3) for k, v in self.stage_ms.items()},
            "total_ms": round(self.total_ms, 3),
            "resolution": list(self.resolution),
            "splat_count": self.splat_count,
            "shading_mode": self.shading_mode,
            "frames": self.frames,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def table_row(self):
        s = self.stage_ms
        return (
            f"{self.shading_mode:>8} | {s['lbs']:7.1f} | {s['occlusion']:7.1f} | "
            f"{s['shading']:7.1f} | {s['raster']:7.1f} | {self.total_ms:7.1f}"
        )

    @staticmethod
    def table_header():
        return (
            f"{'mode':>8} | {'LBS':>7} | {'Occ.':>7} | {'Shading':>7} | {'Rast.':>7} | {'Total':>7}\n"
            + "-" * 58
        )


def run_bench(cloud, pose, camera, env, lut, grids, shading="forward", frames=MIN_WARM_FRAMES, warmup=2, no_ao=False):
    """Render `frames` warm frames and report per-stage medians."""
    render = render_forward if shading == "forward" else render_deferred
    if shading not in ("forward", "deferred"):
        raise ValueError(f"shading mode must be forward or deferred, got {shading!r}")
    for _ in range(warmup):
        render(cloud, pose, camera, env, lut, grids, no_ao=no_ao)
    per_stage = {k: [] for k in STAGES}
    totals = []
    for _ in range(frames):
        timings = {}
        t0 = time.perf_counter()
        render(cloud, pose, camera, env, lut, grids, no_ao=no_ao, timings=timings)
        totals.append((time.perf_counter() - t0) * 1e3)
        for k in STAGES:
            per_stage[k].append(timings.get(k, 0.0) * 1e3)
    return BenchReport(
        stage_ms={k: float(np.median(v)) for k, v in per_stage.items()},
        total_ms=float(np.median(totals)),
        resolution=(camera.width, camera.height),
        splat_count=len(cloud),
        shading_mode=shading,
        frames=frames,
        raw_totals_ms=totals,
    )
