# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled rasterizer core: per-pixel front-to-back compositing.

Operates on float64 arrays of splats already sorted front to back. The
backward pass recomputes footprints and walks the splat list twice per pixel
(once accumulating transmittance, once back to front accumulating the
composite behind each splat), so no per-pixel state is saved at forward time.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

# Must match rasterizer.pure.ALPHA_CAP.
cdef double ALPHA_CAP = 1.0 - 1e-6
cdef double MIN_SIGMA_SQ = 1e-12


def rasterize_forward(
    double[:, ::1] means2d,
    double[::1] radii,
    double[:, ::1] colors,
    double[::1] opacities,
    double[::1] background,
    int height,
    int width,
):
    cdef int n = means2d.shape[0]
    out_arr = np.empty((height, width, 3), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef int px, py, k, c
    cdef double dx, dy, sigma_sq, g, a, t
    cdef double acc0, acc1, acc2
    with nogil:
        for py in range(height):
            for px in range(width):
                t = 1.0
                acc0 = 0.0
                acc1 = 0.0
                acc2 = 0.0
                for k in range(n):
                    dx = px - means2d[k, 0]
                    dy = py - means2d[k, 1]
                    sigma_sq = radii[k] * radii[k]
                    if sigma_sq < MIN_SIGMA_SQ:
                        sigma_sq = MIN_SIGMA_SQ
                    g = exp(-(dx * dx + dy * dy) / (2.0 * sigma_sq))
                    a = opacities[k] * g
                    if a > ALPHA_CAP:
                        a = ALPHA_CAP
                    acc0 += t * a * colors[k, 0]
                    acc1 += t * a * colors[k, 1]
                    acc2 += t * a * colors[k, 2]
                    t *= 1.0 - a
                out[py, px, 0] = acc0 + t * background[0]
                out[py, px, 1] = acc1 + t * background[1]
                out[py, px, 2] = acc2 + t * background[2]
    return out_arr


def rasterize_backward(
    double[:, ::1] means2d,
    double[::1] radii,
    double[:, ::1] colors,
    double[::1] opacities,
    double[::1] background,
    double[:, :, ::1] grad_out,
):
    cdef int n = means2d.shape[0]
    cdef int height = grad_out.shape[0]
    cdef int width = grad_out.shape[1]

    grad_means_arr = np.zeros((n, 2), dtype=np.float64)
    grad_radii_arr = np.zeros(n, dtype=np.float64)
    grad_colors_arr = np.zeros((n, 3), dtype=np.float64)
    grad_opac_arr = np.zeros(n, dtype=np.float64)
    grad_bg_arr = np.zeros(3, dtype=np.float64)

    cdef double[:, ::1] grad_means = grad_means_arr
    cdef double[::1] grad_radii = grad_radii_arr
    cdef double[:, ::1] grad_colors = grad_colors_arr
    cdef double[::1] grad_opac = grad_opac_arr
    cdef double[::1] grad_bg = grad_bg_arr

    # Per-pixel scratch, reused across pixels.
    alpha_arr = np.empty(n, dtype=np.float64)
    g_arr = np.empty(n, dtype=np.float64)
    t_arr = np.empty(n, dtype=np.float64)
    capped_arr = np.empty(n, dtype=np.uint8)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] gval = g_arr
    cdef double[::1] tbefore = t_arr
    cdef unsigned char[::1] capped = capped_arr

    cdef int px, py, k, c
    cdef double dx, dy, sigma_sq, g, a, t
    cdef double b0, b1, b2, ga, go0, go1, go2, grad_a, grad_g, radius
    with nogil:
        for py in range(height):
            for px in range(width):
                go0 = grad_out[py, px, 0]
                go1 = grad_out[py, px, 1]
                go2 = grad_out[py, px, 2]
                t = 1.0
                for k in range(n):
                    dx = px - means2d[k, 0]
                    dy = py - means2d[k, 1]
                    sigma_sq = radii[k] * radii[k]
                    if sigma_sq < MIN_SIGMA_SQ:
                        sigma_sq = MIN_SIGMA_SQ
                    g = exp(-(dx * dx + dy * dy) / (2.0 * sigma_sq))
                    a = opacities[k] * g
                    if a > ALPHA_CAP:
                        a = ALPHA_CAP
                        capped[k] = 1
                    else:
                        capped[k] = 0
                    alpha[k] = a
                    gval[k] = g
                    tbefore[k] = t
                    t *= 1.0 - a
                grad_bg[0] += go0 * t
                grad_bg[1] += go1 * t
                grad_bg[2] += go2 * t
                # Walk back to front; b = composite of everything behind k.
                b0 = background[0]
                b1 = background[1]
                b2 = background[2]
                for k in range(n - 1, -1, -1):
                    a = alpha[k]
                    t = tbefore[k]
                    grad_colors[k, 0] += go0 * t * a
                    grad_colors[k, 1] += go1 * t * a
                    grad_colors[k, 2] += go2 * t * a
                    grad_a = (
                        go0 * t * (colors[k, 0] - b0)
                        + go1 * t * (colors[k, 1] - b1)
                        + go2 * t * (colors[k, 2] - b2)
                    )
                    if not capped[k]:
                        g = gval[k]
                        grad_opac[k] += grad_a * g
                        grad_g = grad_a * opacities[k]
                        dx = px - means2d[k, 0]
                        dy = py - means2d[k, 1]
                        sigma_sq = radii[k] * radii[k]
                        if sigma_sq < MIN_SIGMA_SQ:
                            sigma_sq = MIN_SIGMA_SQ
                        # d g / d u = g * dx / sigma^2 (dx = px - u)
                        grad_means[k, 0] += grad_g * g * dx / sigma_sq
                        grad_means[k, 1] += grad_g * g * dy / sigma_sq
                        radius = radii[k]
                        if radius * radius > MIN_SIGMA_SQ:
                            grad_radii[k] += (
                                grad_g * g * (dx * dx + dy * dy) / (sigma_sq * radius)
                            )
                    b0 = a * colors[k, 0] + (1.0 - a) * b0
                    b1 = a * colors[k, 1] + (1.0 - a) * b1
                    b2 = a * colors[k, 2] + (1.0 - a) * b2
    return grad_means_arr, grad_radii_arr, grad_colors_arr, grad_opac_arr, grad_bg_arr
