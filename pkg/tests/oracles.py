"""Independent reference implementations used only to cross-check results."""

import math

import numpy as np


def dense_matrix(op):
    """Assemble an operator column by column into an explicit matrix."""
    cols = []
    for i in range(op.in_dim):
        e = np.zeros(op.in_dim)
        e[i] = 1.0
        cols.append(op.apply(e))
    return np.array(cols).T


def direct_gaussian(img, sigma, truncate=3.0, c_map=1.0):
    """Brute-force 2-D convolution with an outer-product Gaussian kernel."""
    std = c_map * sigma * max(img.width, img.height)
    radius = max(1, int(math.ceil(truncate * std)))
    offs = np.arange(-radius, radius + 1, dtype=float)
    k1 = np.exp(-0.5 * (offs / std) ** 2)
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    a = img.pixels.reshape(img.height, img.width)
    padded = np.pad(a, radius, mode="symmetric")
    out = np.zeros_like(a)
    for i in range(img.height):
        for j in range(img.width):
            patch = padded[i : i + 2 * radius + 1, j : j + 2 * radius + 1]
            out[i, j] = np.sum(patch * k2)
    return out


def straight_line_step(op, b, rho, sigma, x, v, u, c_map=1.0, truncate=3.0):
    """One plug-and-play iteration written out directly.

    Dense solve for the data update, brute-force Gaussian convolution for
    the denoising update, then the running-sum correction.
    """
    from pnpadmm.denoisers import ImageGrid

    H = dense_matrix(op)
    A = H.T @ H + rho * np.eye(op.in_dim)
    x_new = np.linalg.solve(A, H.T @ b + rho * (v - u))
    h, w = op.in_shape
    img = ImageGrid(width=w, height=h, pixels=x_new + u)
    v_new = direct_gaussian(img, sigma, truncate=truncate, c_map=c_map).reshape(-1)
    u_new = u + x_new - v_new
    return x_new, v_new, u_new
