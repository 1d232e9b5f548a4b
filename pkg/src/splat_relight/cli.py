"""Command-line entry point.

Subcommands: bake-probes, render, validate, bench, distill-demo, serve.
Exit codes: 0 ok, 1 usage error, 2 validation-threshold failure, 3 I/O
error. The env var SPLAT_RELIGHT_THREADS caps worker threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_THRESHOLD = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="splat-relight", description="Real-time splat avatar relighting engine.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--scene", required=True, help="scene JSON file")
        sp.add_argument("--seed", type=int, default=0)

    bake = sub.add_parser("bake-probes", help="bake per-part occlusion probe grids")
    add_common(bake)
    bake.add_argument("--out", default="probes", help="output directory")
    bake.add_argument("--probe-dims", type=int, default=32)
    bake.add_argument("--sh-degree", type=int, default=2)
    bake.add_argument("--face-res", type=int, default=16)
    bake.add_argument("--backend", choices=("analytic", "splats", "auto"), default="auto")

    render = sub.add_parser("render", help="render one frame")
    add_common(render)
    render.add_argument("--pose", default="rest")
    render.add_argument("--camera", type=int, default=0)
    render.add_argument("--shading", choices=("forward", "deferred"), default="forward")
    render.add_argument("--probes", default=None, help="probe directory from bake-probes")
    render.add_argument("--no-ao", action="store_true", help="skip occlusion (AO = 1)")
    render.add_argument("--out", default="render", help="output path prefix (.pfm/.png)")
    render.add_argument("--attribute", default=None, help="render an attribute map instead of shading")

    val = sub.add_parser("validate", help="run an oracle validation suite")
    add_common(val)
    val.add_argument("--suite", required=True, choices=("ao", "shading", "compositing", "losses"))
    val.add_argument("--samples", type=int, default=4096)
    val.add_argument("--out", default=None, help="CSV output path (default stdout)")
    val.add_argument("--probes", default=None)
    val.add_argument("--probe-dims", type=int, default=32)

    bench = sub.add_parser("bench", help="time pipeline stages over warm frames")
    add_common(bench)
    bench.add_argument("--width", type=int, default=540)
    bench.add_argument("--height", type=int, default=540)
    bench.add_argument("--frames", type=int, default=20)
    bench.add_argument("--shading", choices=("forward", "deferred", "both"), default="both")
    bench.add_argument("--pose", default="arms_lowered")
    bench.add_argument("--no-ao", action="store_true")
    bench.add_argument("--probe-dims", type=int, default=16)
    bench.add_argument("--out", default=None, help="JSON output path")

    dd = sub.add_parser("distill-demo", help="toy teacher-to-splat distillation run")
    add_common(dd)
    dd.add_argument("--steps", type=int, default=100)
    dd.add_argument("--lr", type=float, default=0.012)
    dd.add_argument("--out", default="distill_trajectory.csv")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return p


def _load_scene_or_exit(path):
    from .scene import SceneError, load_scene

    try:
        return load_scene(path)
    except SceneError as e:
        print(f"scene error: {e}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    except OSError as e:
        print(f"cannot read scene: {e}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _build_tables(scene, env_res=None, lut_res=64, lut_samples=1024, prefilter_samples=192):
    from .ibl import build_environment, precompute_brdf_lut
    from .scene import build_base_cubemap

    base = build_base_cubemap(scene.env_spec, env_res or int(scene.env_spec.get("resolution", 128)))
    env = build_environment(base, prefilter_samples=prefilter_samples)
    lut = precompute_brdf_lut(lut_samples, (lut_res, lut_res))
    return base, env, lut


def _bake_grids(scene, dims, degree, face_res, backend="auto"):
    from .occlusion.probes import bake_part_grids
    from .scene import part_occluder_scenes, part_splat_occluders

    if backend == "auto":
        backend = "analytic" if scene.teacher is not None else "splats"
    if backend == "analytic":
        if scene.teacher is None:
            raise ValueError("analytic probe backend needs a procedural scene")
        parts = part_occluder_scenes(scene.teacher)
        sdfs = [p.sdf if p is not None else None for p in parts]
        return bake_part_grids(parts, part_sdfs=sdfs, dims=dims, degree=degree, face_res=face_res)
    occluders = part_splat_occluders(scene.cloud, scene.skeleton)
    return bake_part_grids(occluders, dims=dims, degree=degree, face_res=face_res)


def cmd_bake_probes(args):
    from .occlusion.probes import write_probe_grid

    scene = _load_scene_or_exit(args.scene)
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"cannot create output directory: {e}", file=sys.stderr)
        return EXIT_IO
    grids = _bake_grids(scene, args.probe_dims, args.sh_degree, args.face_res, args.backend)
    manifest = {"parts": []}
    for grid in grids:
        path = out_dir / f"part_{grid.part:02d}.probes"
        write_probe_grid(path, grid)
        manifest["parts"].append(
            {"part": grid.part, "file": path.name, "dims": list(grid.dims), "degree": grid.degree}
        )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"baked {len(grids)} probe grids into {out_dir}")
    return EXIT_OK


def _load_grids(probes_dir, num_parts):
    from .occlusion.probes import read_probe_grid

    d = Path(probes_dir)
    manifest = d / "manifest.json"
    if not manifest.exists():
        raise OSError(f"no probe manifest at {manifest}")
    doc = json.loads(manifest.read_text())
    grids = [None] * num_parts
    for entry in doc["parts"]:
        grids[entry["part"]] = read_probe_grid(d / entry["file"])
    return grids


def cmd_render(args):
    from .core.io import write_pfm, write_png
    from .rasterizer.render import render_attribute, render_deferred, render_forward

    scene = _load_scene_or_exit(args.scene)
    try:
        pose = scene.pose(args.pose)
        camera = scene.camera(args.camera)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    grids = None
    if not args.no_ao:
        if args.probes is None:
            print("error: probes not baked; pass --probes DIR or --no-ao", file=sys.stderr)
            return EXIT_USAGE
        try:
            grids = _load_grids(args.probes, scene.num_parts)
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO
    if args.attribute:
        img = render_attribute(scene.cloud, pose, camera, args.attribute, grids, no_ao=args.no_ao)
    else:
        base, env, lut = _build_tables(scene)
        render = render_forward if args.shading == "forward" else render_deferred
        img = render(scene.cloud, pose, camera, env, lut, grids, no_ao=args.no_ao)
    arr = img.to_array()
    color = arr[..., :3] if arr.shape[-1] >= 4 else arr[..., :1]  # scalar attributes are grayscale
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_pfm(out.with_suffix(".pfm"), color)
        write_png(out.with_suffix(".png"), arr if arr.shape[-1] >= 4 else color)
    except OSError as e:
        print(f"cannot write output: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out.with_suffix('.pfm')} and {out.with_suffix('.png')}")
    return EXIT_OK


def cmd_validate(args):
    from .validate import run_ao_suite, run_compositing_suite, run_losses_suite, run_shading_suite

    if args.suite == "compositing":
        result = run_compositing_suite(seed=args.seed)
    elif args.suite == "losses":
        result = run_losses_suite(seed=args.seed)
    elif args.suite == "shading":
        scene = _load_scene_or_exit(args.scene)
        base, env, lut = _build_tables(scene, env_res=64)
        result = run_shading_suite(base, env, lut, samples=args.samples, seed=args.seed)
    else:
        scene = _load_scene_or_exit(args.scene)
        if args.probes:
            try:
                grids = _load_grids(args.probes, scene.num_parts)
            except OSError as e:
                print(f"error: {e}", file=sys.stderr)
                return EXIT_IO
        else:
            grids = _bake_grids(scene, args.probe_dims, 2, 16)
        result = run_ao_suite(scene, grids, samples=args.samples, seed=args.seed)
    text = result.to_csv()
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as e:
            print(f"cannot write CSV: {e}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    print(f"suite {result.suite}: {'PASS' if result.passed else 'FAIL'} {result.aggregate}", file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_THRESHOLD


def cmd_bench(args):
    from .bench import BenchReport, run_bench
    from .core.types import Camera

    scene = _load_scene_or_exit(args.scene)
    if len(scene.cloud) < 1000:
        print("error: bench needs a scene with at least 1000 splats", file=sys.stderr)
        return EXIT_USAGE
    try:
        pose = scene.pose(args.pose)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    camera = Camera.look_at((0.0, 0.05, 1.0), (0.0, -0.1, 0.0), fov_deg=55.0,
                            width=args.width, height=args.height)
    base, env, lut = _build_tables(scene, env_res=64, prefilter_samples=128)
    grids = None if args.no_ao else _bake_grids(scene, args.probe_dims, 2, 16)
    modes = ("forward", "deferred") if args.shading == "both" else (args.shading,)
    reports = [
        run_bench(scene.cloud, pose, camera, env, lut, grids, shading=m,
                  frames=args.frames, no_ao=args.no_ao)
        for m in modes
    ]
    print(BenchReport.table_header())
    for r in reports:
        print(r.table_row())
    payload = [r.to_dict() for r in reports]
    if args.out:
        try:
            Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
        except OSError as e:
            print(f"cannot write JSON: {e}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_distill_demo(args):
    from .distill import build_context, distill_demo
    from .ibl import build_environment, precompute_brdf_lut
    from .scene import build_base_cubemap

    scene = _load_scene_or_exit(args.scene)
    if scene.teacher is None:
        print("error: distill-demo needs a procedural scene with an analytic teacher", file=sys.stderr)
        return EXIT_USAGE
    cfg = scene.distill
    base = build_base_cubemap(scene.env_spec, 32)
    env = build_environment(base, prefilter_samples=64)
    lut = precompute_brdf_lut(512, (32, 32))
    ctx = build_context(
        scene.teacher, scene.skeleton, scene.cloud, env, lut,
        rays_per_pose=int(cfg.get("rays_per_pose", 96)),
        grid_resolution=int(cfg.get("grid_resolution", 20)),
        pose_names=tuple(cfg.get("poses", ("rest", "arm_lowered", "walk"))),
        seed=args.seed,
    )
    # perturb the generator output so the demo has something to recover
    rng = np.random.default_rng(args.seed + 1)
    cloud = scene.cloud
    q = cloud.quat + rng.normal(scale=0.15, size=(len(cloud), 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    perturbed = cloud.replace(
        quat=q,
        roughness=np.clip(cloud.roughness + rng.normal(scale=0.1, size=len(cloud)), 0, 1),
        albedo=np.clip(cloud.albedo + rng.normal(scale=0.08, size=(len(cloud), 3)), 0.03, 0.8),
    )
    steps = int(cfg.get("steps", args.steps))
    lr = float(cfg.get("lr", args.lr))
    weights = cfg.get("weights")
    traj, final = distill_demo(perturbed, ctx, steps=steps, lr=lr, weights=weights)
    try:
        write_trajectory_csv(args.out, traj)
    except OSError as e:
        print(f"cannot write trajectory: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"distilled {len(scene.cloud)} splats for {steps} steps: "
          f"total {traj[0].total:.6f} -> {traj[-1].total:.6f}; trajectory in {args.out}")
    return EXIT_OK


def write_trajectory_csv(path, trajectory):
    keys = sorted(trajectory[0].terms)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["step", *keys, "total"])
        for i, rep in enumerate(trajectory):
            writer.writerow([i, *[f"{rep.terms[k]:.12g}" for k in keys], f"{rep.total:.12g}"])


def cmd_serve(args):
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    handlers = {
        "bake-probes": cmd_bake_probes,
        "render": cmd_render,
        "validate": cmd_validate,
        "bench": cmd_bench,
        "distill-demo": cmd_distill_demo,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
