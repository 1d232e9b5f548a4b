"""Real spherical harmonics basis up to degree 4, plus the clamped-cosine
zonal factors used to convolve visibility into pre-convolved AO directly in
the SH domain.

Basis functions are orthonormal over the sphere (integral of Y^2 = 1); the
constant band integrates a unit signal to 2*sqrt(pi).
"""

from __future__ import annotations

import numpy as np

MAX_DEGREE = 4


def num_coeffs(degree):
    return (degree + 1) ** 2


def eval_sh_basis(degree, dirs):
    """Evaluate the real SH basis at unit directions: [N, (degree+1)^2]."""
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"SH degree must be in [0, {MAX_DEGREE}], got {degree}")
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    out = np.empty((d.shape[0], num_coeffs(degree)))
    out[:, 0] = 0.28209479177387814  # 1/(2 sqrt(pi))
    if degree >= 1:
        c1 = 0.4886025119029199
        out[:, 1] = c1 * y
        out[:, 2] = c1 * z
        out[:, 3] = c1 * x
    if degree >= 2:
        out[:, 4] = 1.0925484305920792 * x * y
        out[:, 5] = 1.0925484305920792 * y * z
        out[:, 6] = 0.31539156525252005 * (3.0 * z * z - 1.0)
        out[:, 7] = 1.0925484305920792 * x * z
        out[:, 8] = 0.5462742152960396 * (x * x - y * y)
    if degree >= 3:
        out[:, 9] = 0.5900435899266435 * y * (3.0 * x * x - y * y)
        out[:, 10] = 2.890611442640554 * x * y * z
        out[:, 11] = 0.4570457994644658 * y * (5.0 * z * z - 1.0)
        out[:, 12] = 0.3731763325901154 * z * (5.0 * z * z - 3.0)
        out[:, 13] = 0.4570457994644658 * x * (5.0 * z * z - 1.0)
        out[:, 14] = 1.445305721320277 * z * (x * x - y * y)
        out[:, 15] = 0.5900435899266435 * x * (x * x - 3.0 * y * y)
    if degree >= 4:
        out[:, 16] = 2.5033429417967046 * x * y * (x * x - y * y)
        out[:, 17] = 1.7701307697799304 * y * z * (3.0 * x * x - y * y)
        out[:, 18] = 0.9461746957575601 * x * y * (7.0 * z * z - 1.0)
        out[:, 19] = 0.6690465435572892 * y * z * (7.0 * z * z - 3.0)
        out[:, 20] = 0.10578554691520431 * (z * z * (35.0 * z * z - 30.0) + 3.0)
        out[:, 21] = 0.6690465435572892 * x * z * (7.0 * z * z - 3.0)
        out[:, 22] = 0.47308734787878004 * (x * x - y * y) * (7.0 * z * z - 1.0)
        out[:, 23] = 1.7701307697799304 * x * z * (x * x - 3.0 * y * y)
        out[:, 24] = 0.6258357354491761 * (x * x * (x * x - 3.0 * y * y) - y * y * (3.0 * x * x - y * y))
    return out


def cosine_lobe_zonal_factors(degree):
    """Per-coefficient factors lambda_l such that projecting the clamped-cosine
    convolution (1/pi) int V(w) max(n.w, 0) dw equals lambda_l * V_lm.

    These are the Lambertian zonal coefficients A_l divided by pi:
    1, 2/3, 1/4, 0, -1/24 for l = 0..4 (odd bands above 1 vanish).
    """
    per_l = [1.0, 2.0 / 3.0, 0.25, 0.0, -1.0 / 24.0]
    out = np.empty(num_coeffs(degree))
    k = 0
    for l in range(degree + 1):
        for _ in range(2 * l + 1):
            out[k] = per_l[l]
            k += 1
    return out
