"""Validation suites: drive the approximations against their Monte Carlo
oracles and emit per-case CSV rows plus aggregate pass/fail.

Suites: ao (probe queries vs brute-force hemisphere MC), shading (split-sum
vs MC rendering-equation integral), compositing (kernel weights vs the
closed-form product sum), losses (zero configurations and weight
linearity). Each case row carries the approximate value, the reference, and
absolute/relative errors; thresholds follow the acceptance criteria.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

SUITES = ("ao", "shading", "compositing", "losses")

THRESHOLDS = {
    "ao": 0.05,  # MAE vs brute force
    "shading": 0.10,  # max relative error vs mc_shade
    "compositing": 1e-6,  # max abs error vs closed form
    "losses": 1e-7,  # max abs error at zero configs / linearity
}


@dataclass
class SuiteResult:
    suite: str
    rows: list  # dicts: case, value, reference, abs_err, rel_err
    aggregate: dict
    passed: bool

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["suite", "case", "value", "reference", "abs_err", "rel_err"])
        for r in self.rows:
            writer.writerow(
                [self.suite, r["case"], f"{r['value']:.9g}", f"{r['reference']:.9g}",
                 f"{r['abs_err']:.9g}", f"{r['rel_err']:.9g}"]
            )
        for k, v in self.aggregate.items():
            writer.writerow([self.suite, f"aggregate:{k}", f"{v:.9g}", "", "", ""])
        writer.writerow([self.suite, "passed", int(self.passed), "", "", ""])
        return buf.getvalue()


def _row(case, value, reference):
    value = float(value)
    reference = float(reference)
    abs_err = abs(value - reference)
    rel_err = abs_err / max(abs(reference), 1e-12)
    return {"case": case, "value": value, "reference": reference, "abs_err": abs_err, "rel_err": rel_err}


def run_ao_suite(scene, grids, samples=1024, seed=0, count=50):
    """Probe AO vs brute-force MC at random posed surface samples."""
    from .oracle.mc import brute_force_ao
    from .occlusion.probes import combined_ao_batch

    teacher = scene.teacher
    if teacher is None:
        raise ValueError("ao suite needs a procedural scene with an analytic teacher")
    pose = scene.pose("arm_lowered" if "arm_lowered" in scene.poses else "rest")
    posed = teacher.posed(pose)
    rng = np.random.default_rng(seed)
    pts, nrm = sample_posed_surface(teacher, pose, count, rng)
    approx = combined_ao_batch(pts, nrm, pose, grids)
    rows = []
    for i, (p, n) in enumerate(zip(pts, nrm)):
        ref = brute_force_ao(p, n, posed, samples=samples, seed=seed * 1000 + i)
        rows.append(_row(f"point_{i}", approx[i], ref))
    mae = float(np.mean([r["abs_err"] for r in rows]))
    return SuiteResult("ao", rows, {"mae": mae}, mae <= THRESHOLDS["ao"])


def sample_posed_surface(teacher, pose, count, rng):
    """Surface points + outward normals on the posed analytic geometry,
    area-weighted across primitives.

    Per-primitive samples that fall strictly inside ANOTHER primitive (the
    capsule overlap zones at joints) are not on the avatar surface and are
    rejected."""
    from .oracle.analytic import Capsule, Sphere

    posed = teacher.posed(pose)
    prims = teacher.primitives
    areas = []
    for p in prims:
        if isinstance(p, Capsule):
            length = np.linalg.norm(p.p1 - p.p0)
            areas.append(2 * np.pi * p.radius * length + 4 * np.pi * p.radius**2)
        elif isinstance(p, Sphere):
            areas.append(4 * np.pi * p.radius**2)
        else:
            areas.append(0.0)
    areas = np.array(areas)
    pts = []
    nrm = []
    while len(pts) < count:
        k = rng.choice(len(prims), p=areas / areas.sum())
        p = prims[k]
        if isinstance(p, Capsule):
            from .scene import _sample_capsule_surface

            pt, nr = _sample_capsule_surface(p.p0, p.p1, p.radius, 1, rng)
            pt, nr = pt[0], nr[0]
        else:
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            pt, nr = p.center + p.radius * v, v
        b = pose.part_transforms[p.part]
        pt_o = b[:3, :3] @ pt + b[:3, 3]
        if posed.sdf(pt_o[None])[0] < -1e-4:
            continue
        pts.append(pt_o)
        nrm.append(b[:3, :3] @ nr)
    return np.array(pts), np.array(nrm)


def run_shading_suite(env_base, env, lut, samples=8192, seed=0, count=50, nv_floor=0.15):
    """Split-sum shade vs mc_shade over random material/view configurations."""
    from .ibl.shade import ShadingSample, shade
    from .oracle.mc import mc_shade

    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        cosv = nv_floor + (1 - nv_floor) * rng.random()
        sinv = np.sqrt(1 - cosv * cosv)
        phi = 2 * np.pi * rng.random()
        ref_axis = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.999 else np.array([1.0, 0.0, 0.0])
        t = np.cross(ref_axis, n)
        t /= np.linalg.norm(t)
        b = np.cross(n, t)
        omega_o = sinv * np.cos(phi) * t + sinv * np.sin(phi) * b + cosv * n
        albedo = 0.03 + 0.77 * rng.random(3)
        rough = 0.3 + 0.7 * rng.random()
        metal = rng.random()
        approx = shade(ShadingSample(n=n, omega_o=omega_o, a=albedo, r=rough, m=metal, ao=1.0), env, lut)
        ref = mc_shade((0.0, 0.0, 0.0), n, (albedo, rough, metal), env_base, None, omega_o,
                       samples=samples, seed=seed * 1000 + i)
        rel = float(np.linalg.norm(approx - ref) / max(np.linalg.norm(ref), 1e-12))
        rows.append({"case": f"config_{i}", "value": float(np.linalg.norm(approx)),
                     "reference": float(np.linalg.norm(ref)),
                     "abs_err": float(np.linalg.norm(approx - ref)), "rel_err": rel})
    max_rel = max(r["rel_err"] for r in rows)
    return SuiteResult(
        "shading", rows, {"mean_rel": float(np.mean([r["rel_err"] for r in rows])), "max_rel": max_rel},
        max_rel <= THRESHOLDS["shading"],
    )


def run_compositing_suite(seed=0, count=50):
    """Random sorted fragment lists vs the closed-form product sum."""
    from .rasterizer.geometry import SplatFragment, composite

    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        n = rng.integers(1, 9)
        depths = np.sort(rng.random(n) * 5)
        ghat = rng.random(n)
        opac = rng.random(n)
        colors = rng.random((n, 3))
        frags = [SplatFragment(k, np.zeros(2), float(depths[k]), float(ghat[k])) for k in range(n)]
        out, weight = composite(frags, colors, opacities=opac)
        # closed form, evaluated independently
        ref = np.zeros(3)
        ref_w = 0.0
        for k in range(n):
            alpha_k = opac[k] * ghat[k]
            trans = np.prod([1 - opac[j] * ghat[j] for j in range(k)]) if k else 1.0
            ref += colors[k] * alpha_k * trans
            ref_w += alpha_k * trans
        err = float(max(np.abs(out - ref).max(), abs(weight - ref_w)))
        rows.append({"case": f"list_{i}_n{n}", "value": float(weight), "reference": float(ref_w),
                     "abs_err": err, "rel_err": err / max(ref_w, 1e-12)})
    max_err = max(r["abs_err"] for r in rows)
    return SuiteResult("compositing", rows, {"max_abs": max_err}, max_err <= THRESHOLDS["compositing"])


def run_losses_suite(seed=0):
    """Zero configurations and weight linearity of the loss suite."""
    from .distill.losses import (
        anisotropy_loss, depth_distortion, env_distill_loss,
        image_distill_loss, material_smoothness_loss, make_report,
        normal_orientation_loss, rendering_loss, sdf_distill_loss,
    )
    from .scene import generate_capsule_person

    rng = np.random.default_rng(seed)
    cloud, skeleton, teacher = generate_capsule_person(
        counts_per_part=[8, 3, 3, 3, 3, 3, 3, 3, 3], seed=seed
    )
    rows = []
    # zero configurations; the sdf check uses a single-primitive teacher so
    # every sampled center lies exactly on the union surface
    from .oracle.analytic import AnalyticScene, Sphere

    sphere = AnalyticScene([Sphere((0.0, 0.0, 0.0), 0.5)])
    dirs = rng.normal(size=(16, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    on_sphere = cloud.replace(mu_c=0.5 * dirs, quat=np.tile([1.0, 0, 0, 0], (16, 1)),
                              s=np.full((16, 2), 0.01), opacity=np.ones(16),
                              color=np.full((16, 3), 0.5), albedo=np.full((16, 3), 0.5),
                              roughness=np.full(16, 0.5), metallic=np.zeros(16),
                              weights=np.tile(np.eye(9)[0], (16, 1)))
    rows.append(_row("sdf_zero_on_surface", sdf_distill_loss(on_sphere, sphere), 0.0))
    img = rng.random((12, 12, 3))
    rows.append(_row("rendering_zero_identical", rendering_loss(img, img, img[..., :1], img[..., :1]), 0.0))
    rows.append(_row("smooth_zero_constant", material_smoothness_loss(np.full((8, 8, 1), 0.3), img[:8, :8]), 0.0))
    rows.append(_row("aniso_zero_isotropic", anisotropy_loss(np.full((5, 2), 0.02)), 0.0))
    rows.append(_row("orient_zero_facing", normal_orientation_loss(np.tile([0, 0, 1.0], (4, 1)), np.tile([0, 0, -1.0], (4, 1))), 0.0))
    rows.append(_row("dist_zero_single", depth_distortion(np.array([[0.7]]), np.array([[2.0]])), 0.0))
    rows.append(_row("env_zero_identical", env_distill_loss(lambda d: np.ones((d.shape[0], 3)), lambda d: np.ones((d.shape[0], 3))), 0.0))
    attrs = {"albedo": rng.random((6, 3))}
    rows.append(_row("image_zero_identical", image_distill_loss(attrs, {"albedo": attrs["albedo"].copy()}, np.ones(6, dtype=bool)), 0.0))
    # weight linearity of the report
    terms = {k: float(v) for k, v in zip("abcdef", rng.random(6))}
    w1 = {k: float(v) for k, v in zip("abcdef", rng.random(6))}
    w2 = {k: float(v) for k, v in zip("abcdef", rng.random(6))}
    lam = 0.37
    mixed = {k: lam * w1[k] + (1 - lam) * w2[k] for k in w1}
    lin_err = abs(
        make_report(terms, mixed).total
        - (lam * make_report(terms, w1).total + (1 - lam) * make_report(terms, w2).total)
    )
    rows.append(_row("weight_linearity", lin_err, 0.0))
    max_err = max(r["abs_err"] for r in rows)
    return SuiteResult("losses", rows, {"max_abs": max_err}, max_err <= THRESHOLDS["losses"])
