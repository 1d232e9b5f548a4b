"""Part-wise ambient-occlusion probes.

Per body part, a lattice over the part's canonical-frame bounding box stores
SH coefficients of the pre-convolved directional AO. Baking renders a binary
visibility cubemap at each lattice point (against that part's geometry
only), convolves it with the clamped cosine lobe, and projects to SH; at
render time a single trilinear+SH query per part recovers AO, and the final
value is the product over parts.

Two visibility backends exist: splat-opacity ray casting (accumulated alpha
thresholded at 0.5) and analytic ray casting against SDF primitives. Lattice
points that fall inside the part geometry are virtually offset to just
outside the surface before baking so surface-adjacent trilinear queries
interpolate meaningful values rather than fully-enclosed zeros.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..core.cubemap import Cubemap
from ..core.types import Pose
from ..skinning import part_canonicalize_batch
from .sh import cosine_lobe_zonal_factors, eval_sh_basis, num_coeffs

OPACITY_THRESHOLD = 0.5
_GAUSSIAN_CUTOFF = 3.0


class SplatOccluders:
    """Ray-castable occluder set built from splat geometry (one frame of it).

    centers [N,3], rotations [N,3,3] (normal = third column), scales [N,2],
    opacities [N]. A ray is blocked when its accumulated splat opacity
    1 - prod(1 - o_i * ghat_i) reaches OPACITY_THRESHOLD.
    """

    def __init__(self, centers, rotations, scales, opacities):
        self.centers = np.asarray(centers, dtype=np.float64)
        self.rotations = np.asarray(rotations, dtype=np.float64)
        self.scales = np.asarray(scales, dtype=np.float64)
        self.opacities = np.asarray(opacities, dtype=np.float64)

    def __len__(self):
        return self.centers.shape[0]

    def ray_hits(self, o, d, t_min=1e-6, t_max=np.inf, exclude=None):
        """Boolean blocked-test for rays from a single origin o, dirs d [R,3]."""
        o = np.asarray(o, dtype=np.float64)
        d = np.atleast_2d(np.asarray(d, dtype=np.float64))
        keep = np.ones(len(self), dtype=bool) if exclude is None else ~exclude
        mu = self.centers[keep]
        rot = self.rotations[keep]
        s = self.scales[keep]
        op = self.opacities[keep]
        if mu.shape[0] == 0:
            return np.zeros(d.shape[0], dtype=bool)
        n = rot[:, :, 2]
        denom = d @ n.T  # [R, N]
        numer = ((mu - o) * n).sum(axis=1)  # [N]
        t = numer[None, :] / np.where(np.abs(denom) > 1e-9, denom, 1.0)
        valid = (np.abs(denom) > 1e-9) & (t > t_min) & (t < t_max)
        hit = o + t[..., None] * d[:, None, :] - mu[None, :, :]  # [R,N,3]
        u = np.einsum("rnk,nk->rn", hit, rot[:, :, 0]) / s[None, :, 0]
        v = np.einsum("rnk,nk->rn", hit, rot[:, :, 1]) / s[None, :, 1]
        g2 = u * u + v * v
        ghat = np.where(valid & (g2 <= _GAUSSIAN_CUTOFF**2), np.exp(-0.5 * g2), 0.0)
        alpha = np.clip(op[None, :] * ghat, 0.0, 1.0 - 1e-9)
        trans = np.exp(np.log1p(-alpha).sum(axis=1))
        return (1.0 - trans) >= OPACITY_THRESHOLD

    def exclusion_mask(self, mu, radius_scale=_GAUSSIAN_CUTOFF):
        """Splats whose center lies within one splat-radius (3 sigma of their
        own scale) of mu; excluded during self-part baking to avoid acne."""
        dist = np.linalg.norm(self.centers - np.asarray(mu, dtype=np.float64), axis=1)
        return dist <= radius_scale * self.scales.max(axis=1)

    def pseudo_sdf(self, x, k=8):
        """Signed distance estimate from the k nearest splat tangent planes."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        diff = x[:, None, :] - self.centers[None, :, :]
        d2 = (diff * diff).sum(-1)
        kk = min(k, len(self))
        idx = np.argpartition(d2, kk - 1, axis=1)[:, :kk]
        rows = np.arange(x.shape[0])[:, None]
        n = self.rotations[:, :, 2]
        plane = np.einsum("pkj,pkj->pk", diff[rows, idx], n[idx])
        w = 1.0 / (np.sqrt(d2[rows, idx]) + 1e-6)
        return (plane * w).sum(1) / w.sum(1)

    def pseudo_normal(self, x, k=8):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        diff = x[:, None, :] - self.centers[None, :, :]
        d2 = (diff * diff).sum(-1)
        kk = min(k, len(self))
        idx = np.argpartition(d2, kk - 1, axis=1)[:, :kk]
        rows = np.arange(x.shape[0])[:, None]
        n = self.rotations[:, :, 2]
        w = (1.0 / (np.sqrt(d2[rows, idx]) + 1e-6))[..., None]
        g = (n[idx] * w).sum(1)
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        return g / np.where(norm > 1e-12, norm, 1.0)


@dataclass(frozen=True)
class DirectionalAO:
    """Pre-convolved ambient occlusion over normal directions (one cubemap)."""

    cubemap: Cubemap

    def __post_init__(self):
        f = self.cubemap.faces
        if np.any(f < -1e-6) or np.any(f > 1 + 1e-6):
            raise ValueError("directional AO values must lie in [0, 1]")


@dataclass(frozen=True)
class OcclusionProbeGrid:
    """SH-coefficient lattice for one body part, in that part's canonical frame."""

    part: int
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    dims: tuple
    degree: int
    coeffs: np.ndarray  # [nx, ny, nz, num_coeffs]

    def __post_init__(self):
        lo = np.asarray(self.bounds_lo, dtype=np.float64)
        hi = np.asarray(self.bounds_hi, dtype=np.float64)
        if np.any(hi <= lo):
            raise ValueError("probe grid bounds are empty")
        c = np.asarray(self.coeffs, dtype=np.float32)
        expect = tuple(self.dims) + (num_coeffs(self.degree),)
        if c.shape != expect:
            raise ValueError(f"coefficient array shape {c.shape} != {expect}")
        object.__setattr__(self, "bounds_lo", lo)
        object.__setattr__(self, "bounds_hi", hi)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "coeffs", c)

    def lattice_points(self):
        axes = [np.linspace(self.bounds_lo[k], self.bounds_hi[k], self.dims[k]) for k in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)

    def truncated(self, degree):
        """Copy with the SH bands above `degree` dropped (no rebake needed)."""
        if degree > self.degree:
            raise ValueError(f"cannot extend degree {self.degree} grid to {degree}")
        return OcclusionProbeGrid(
            self.part, self.bounds_lo, self.bounds_hi, self.dims, degree,
            self.coeffs[..., : num_coeffs(degree)],
        )


def bake_visibility_cubemap(mu, occluders, face_res=16, t_min=1e-6, t_max=np.inf, exclude=None):
    """Binary visibility cubemap at point mu: texel = 1 where the ray escapes.

    `occluders` is anything with ray_hits(o, dirs, t_min, t_max) — an
    AnalyticScene, a PosedAnalyticScene, or a SplatOccluders set (which also
    honors an exclusion mask).
    """
    if face_res < 16:
        raise ValueError(f"face_res must be >= 16, got {face_res}")
    mu = np.asarray(mu, dtype=np.float64)
    if not np.all(np.isfinite(mu)):
        raise ValueError("bake point must be finite")
    dirs = Cubemap.texel_directions(face_res).reshape(-1, 3)
    if isinstance(occluders, SplatOccluders):
        blocked = occluders.ray_hits(mu, dirs, t_min=t_min, t_max=t_max, exclude=exclude)
    else:
        blocked = occluders.ray_hits(np.broadcast_to(mu, dirs.shape), dirs, t_min=t_min, t_max=t_max)
    vis = (~blocked).astype(np.float32).reshape(6, face_res, face_res, 1)
    return Cubemap(vis)


def convolve_cosine(vis: Cubemap):
    """Pre-convolve binary visibility with the clamped cosine lobe:
    AO(n) = (1/pi) sum_w V(w) max(n.w, 0) dOmega(w)."""
    res = vis.resolution
    dirs = Cubemap.texel_directions(res).reshape(-1, 3)
    sa = np.broadcast_to(Cubemap.texel_solid_angles(res), (6, res, res)).reshape(-1)
    v = vis.faces.reshape(-1, vis.channels).astype(np.float64)[:, 0]
    weighted = v * sa
    cos = np.clip(dirs @ dirs.T, 0.0, None)  # output normals on the same texel grid
    ao = (cos @ weighted) / np.pi
    return DirectionalAO(Cubemap(np.clip(ao, 0.0, 1.0).astype(np.float32).reshape(6, res, res, 1)))


def project_ao_to_sh(ao: DirectionalAO, degree=2):
    """SH coefficients of the directional AO via texel quadrature over S^2."""
    res = ao.cubemap.resolution
    dirs = Cubemap.texel_directions(res).reshape(-1, 3)
    sa = np.broadcast_to(Cubemap.texel_solid_angles(res), (6, res, res)).reshape(-1)
    basis = eval_sh_basis(degree, dirs)
    vals = ao.cubemap.faces.reshape(-1, ao.cubemap.channels).astype(np.float64)[:, 0]
    return basis.T @ (vals * sa)


def project_visibility_to_ao_sh(vis_values, basis_times_sa, zonal):
    """Spectral shortcut: SH(AO) = zonal * SH(V). `vis_values` [P, T] rows of
    binary visibility over the texel grid, `basis_times_sa` [T, C] the basis
    weighted by texel solid angles, `zonal` the cosine-lobe factors [C]."""
    return (vis_values @ basis_times_sa) * zonal[None, :]


def query_probe(grid: OcclusionProbeGrid, x, n):
    """Trilinear coefficient interpolation + SH evaluation at n, clamped to
    [0, 1]; points outside the grid bounds return 1 (unoccluded)."""
    return float(query_probe_batch(grid, np.asarray(x)[None, :], np.asarray(n)[None, :])[0])


def query_probe_batch(grid: OcclusionProbeGrid, x, n):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = np.atleast_2d(np.asarray(n, dtype=np.float64))
    dims = np.array(grid.dims)
    span = grid.bounds_hi - grid.bounds_lo
    rel = (x - grid.bounds_lo) / span * (dims - 1)
    inside = np.all((x >= grid.bounds_lo) & (x <= grid.bounds_hi), axis=1)
    out = np.ones(x.shape[0])
    if not np.any(inside):
        return out
    rel = rel[inside]
    i0 = np.clip(np.floor(rel).astype(np.int64), 0, dims - 2)
    frac = np.clip(rel - i0, 0.0, 1.0)
    c = grid.coeffs.astype(np.float64)
    acc = np.zeros((rel.shape[0], c.shape[-1]))
    for dx in (0, 1):
        wx = frac[:, 0] if dx else 1 - frac[:, 0]
        for dy in (0, 1):
            wy = frac[:, 1] if dy else 1 - frac[:, 1]
            for dz in (0, 1):
                wz = frac[:, 2] if dz else 1 - frac[:, 2]
                w = (wx * wy * wz)[:, None]
                acc += w * c[i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz]
    basis = eval_sh_basis(grid.degree, n[inside])
    out[inside] = np.clip((acc * basis).sum(axis=1), 0.0, 1.0)
    return out


def combined_ao(posed_splat, pose: Pose, grids):
    """Product over parts of the probe queries at the part-canonicalized
    splat position/normal (single query per part)."""
    return float(
        combined_ao_batch(posed_splat.mu_o[None, :], posed_splat.n_o[None, :], pose, grids)[0]
    )


def combined_ao_batch(positions, normals, pose: Pose, grids):
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    if len(grids) != pose.num_parts:
        raise ValueError(f"need {pose.num_parts} probe grids, got {len(grids)}")
    ao = np.ones(positions.shape[0])
    for part, grid in enumerate(grids):
        if grid is None:
            continue
        xc, nc = part_canonicalize_batch(positions, normals, part, pose)
        ao *= query_probe_batch(grid, xc, nc)
    return ao


def bake_part_grids(
    part_occluders,
    part_sdfs=None,
    dims=32,
    degree=2,
    face_res=16,
    padding=0.15,
    bounds=None,
    offset_margin=None,
    progress=None,
):
    """Bake one OcclusionProbeGrid per part.

    part_occluders: list over parts; each entry a SplatOccluders, an analytic
    scene restricted to the part, or None (empty part -> constant-1 grid with
    a warning flag). part_sdfs: optional list of callables x[P,3]->sdf used
    for the interior virtual offset (defaults to splat pseudo-SDF when the
    backend is SplatOccluders). bounds: optional per-part (lo, hi) overrides;
    otherwise the part geometry bbox padded by `padding` per axis.

    Coefficients are computed spectrally: project the binary visibility
    cubemap onto the SH basis and scale per band by the clamped-cosine zonal
    factors — identical to convolve_cosine + project_ao_to_sh up to texel
    quadrature, at a small fraction of the cost.
    """
    if isinstance(dims, int):
        dims = (dims, dims, dims)
    n_coeff = num_coeffs(degree)
    dirs = Cubemap.texel_directions(face_res).reshape(-1, 3)
    sa = np.broadcast_to(Cubemap.texel_solid_angles(face_res), (6, face_res, face_res)).reshape(-1)
    basis_sa = eval_sh_basis(degree, dirs) * sa[:, None]
    zonal = cosine_lobe_zonal_factors(degree)
    const_one = np.zeros(n_coeff)
    const_one[0] = 2.0 * np.sqrt(np.pi)

    grids = []
    for part, occ in enumerate(part_occluders):
        if bounds is not None and bounds[part] is not None:
            lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds[part])
        else:
            lo, hi = _part_bounds(occ, padding)
        if occ is None or (isinstance(occ, SplatOccluders) and len(occ) == 0):
            coeffs = np.broadcast_to(const_one, tuple(dims) + (n_coeff,)).astype(np.float32).copy()
            grids.append(OcclusionProbeGrid(part, lo, hi, dims, degree, coeffs))
            continue
        grid = OcclusionProbeGrid(part, lo, hi, dims, degree, np.zeros(tuple(dims) + (n_coeff,), np.float32))
        pts = grid.lattice_points()
        cell = (hi - lo) / (np.array(dims) - 1)
        # half a mean cell: enough to lift interior lattice points out of the
        # surface without biasing occlusion in nearby contact zones
        margin = offset_margin if offset_margin is not None else 0.5 * float(cell.mean())
        pts = _virtual_offset(pts, occ, part_sdfs[part] if part_sdfs else None, margin)
        radius = 0.5 * float(np.linalg.norm(hi - lo)) + 4.0 * margin
        coeffs = np.empty((pts.shape[0], n_coeff))
        chunk = max(1, 400_000 // dirs.shape[0])  # keeps ray intermediates cache-friendly
        for s in range(0, pts.shape[0], chunk):
            e = min(s + chunk, pts.shape[0])
            vis = _visibility_rows(pts[s:e], occ, dirs, radius)
            coeffs[s:e] = project_visibility_to_ao_sh(vis, basis_sa, zonal)
            if progress:
                progress(part, e, pts.shape[0])
        coeffs = coeffs.reshape(tuple(dims) + (n_coeff,)).astype(np.float32)
        grids.append(OcclusionProbeGrid(part, lo, hi, dims, degree, coeffs))
    return grids


def _part_bounds(occ, padding):
    if occ is None:
        return np.full(3, -0.5), np.full(3, 0.5)
    if isinstance(occ, SplatOccluders):
        if len(occ) == 0:
            return np.full(3, -0.5), np.full(3, 0.5)
        lo = occ.centers.min(axis=0)
        hi = occ.centers.max(axis=0)
    else:
        los, his = zip(*(p.bounds() for p in occ.primitives))
        lo = np.min(np.stack(los), axis=0)
        hi = np.max(np.stack(his), axis=0)
    # isotropic padding from the bbox diagonal: thin parts (limbs) must reach
    # far enough sideways to shadow adjacent geometry queried in their frame
    pad = padding * max(float(np.linalg.norm(hi - lo)), 1e-3)
    return lo - pad, hi + pad


def _virtual_offset(pts, occ, sdf_fn, margin):
    """Push lattice points that sit inside (or within `margin` of) the part
    surface out to sdf = margin along the surface gradient."""
    if sdf_fn is not None:
        sdf = np.asarray(sdf_fn(pts), dtype=np.float64)
        inside = sdf < margin
        if np.any(inside):
            h = 1e-4
            g = np.empty((int(inside.sum()), 3))
            xi = pts[inside]
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                g[:, k] = (np.asarray(sdf_fn(xi + e)) - np.asarray(sdf_fn(xi - e))) / (2 * h)
            norm = np.linalg.norm(g, axis=1, keepdims=True)
            g = g / np.where(norm > 1e-9, norm, 1.0)
            pts = pts.copy()
            pts[inside] = xi + g * (margin - sdf[inside, None])
        return pts
    if isinstance(occ, SplatOccluders):
        sdf = occ.pseudo_sdf(pts)
        inside = sdf < margin
        if np.any(inside):
            n = occ.pseudo_normal(pts[inside])
            pts = pts.copy()
            pts[inside] = pts[inside] + n * (margin - sdf[inside, None])
        return pts
    return pts


def _visibility_rows(pts, occ, dirs, radius):
    """Binary visibility [P, T] for lattice points pts against one part."""
    if isinstance(occ, SplatOccluders):
        out = np.empty((pts.shape[0], dirs.shape[0]))
        for i, mu in enumerate(pts):
            excl = occ.exclusion_mask(mu)
            out[i] = ~occ.ray_hits(mu, dirs, t_min=1e-6, t_max=radius, exclude=excl)
        return out
    caps = None
    if hasattr(occ, "primitives"):
        from .visibility_fast import capsule_any_hit, capsule_arrays

        caps = capsule_arrays(occ.primitives)
    p, t = pts.shape[0], dirs.shape[0]
    if caps is not None:
        o = np.ascontiguousarray(np.broadcast_to(pts[:, None, :], (p, t, 3)).reshape(-1, 3))
        d = np.ascontiguousarray(np.broadcast_to(dirs[None, :, :], (p, t, 3)).reshape(-1, 3))
        blocked = capsule_any_hit(o, d, *caps, 1e-6, radius)
        return (~blocked).astype(np.float64).reshape(p, t)
    # general analytic backends broadcast over [P, T] origins/directions
    o = np.broadcast_to(pts[:, None, :], (p, t, 3))
    d = np.broadcast_to(dirs[None, :, :], o.shape)
    return (~occ.ray_hits(o, d, t_min=1e-6, t_max=radius)).astype(np.float64)


# ---------------------------------------------------------------------------
# probe grid file format
#
#   magic   4 bytes  b"SRPG"
#   version u32      1
#   part    i32
#   degree  i32
#   dims    3 x i32
#   bounds  6 x f64  (lo.xyz, hi.xyz)
#   coeffs  nx*ny*nz*(degree+1)^2 x f32, C order [x][y][z][coeff]
#
# All fields little-endian.
# ---------------------------------------------------------------------------

_MAGIC = b"SRPG"
_HEADER = "<4sIii3i6d"


def write_probe_grid(path, grid: OcclusionProbeGrid):
    with open(path, "wb") as f:
        f.write(
            struct.pack(
                _HEADER,
                _MAGIC,
                1,
                grid.part,
                grid.degree,
                *grid.dims,
                *grid.bounds_lo,
                *grid.bounds_hi,
            )
        )
        f.write(grid.coeffs.astype("<f4").tobytes())


def read_probe_grid(path):
    with open(path, "rb") as f:
        header = f.read(struct.calcsize(_HEADER))
        magic, version, part, degree, nx, ny, nz, *b = struct.unpack(_HEADER, header)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a probe grid file")
        if version != 1:
            raise ValueError(f"{path}: unsupported probe grid version {version}")
        count = nx * ny * nz * num_coeffs(degree)
        coeffs = np.frombuffer(f.read(count * 4), dtype="<f4").reshape(nx, ny, nz, -1)
    return OcclusionProbeGrid(part, b[:3], b[3:], (nx, ny, nz), degree, coeffs.copy())
