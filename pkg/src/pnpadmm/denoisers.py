"""Sigma-parameterized denoisers and empirical checks of the residue bound.

Every denoiser maps an image to an image of the same size and acts as the
identity at sigma = 0 (enforced centrally in :func:`denoise`).  The residue
bound under test is ``||D_sigma(x) - x||^2 <= K * d * sigma^2``; since it is
hard to establish analytically even for simple filters, the constant K is
estimated from samples and re-checked on held-out samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import as_vector


@dataclass(frozen=True)
class ImageGrid:
    """A width x height image stored as a flat row-major float64 vector."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        arr = as_vector(self.pixels, "pixels").copy()
        if arr.size != self.width * self.height:
            raise ValueError(
                f"pixel count {arr.size} != width*height "
                f"{self.width * self.height}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def dim(self) -> int:
        return self.width * self.height

    def to_array(self) -> np.ndarray:
        """Return a writable (height, width) copy."""
        return self.pixels.reshape(self.height, self.width).copy()

    @classmethod
    def from_array(cls, arr) -> "ImageGrid":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
        h, w = arr.shape
        return cls(width=w, height=h, pixels=arr.reshape(-1))


def _window_half_width(sigma: float, img: ImageGrid, c_map: float) -> int:
    # sigma is mapped to pixels through the larger image side so the residue
    # ratio stays comparable across image sizes
    return int(math.floor(c_map * sigma * max(img.width, img.height) + 0.5))


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = kernel.size // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="symmetric")
    windows = np.lib.stride_tricks.sliding_window_view(
        padded, kernel.size, axis=axis
    )
    return windows @ kernel


class Denoiser:
    """Base class: a family of denoising maps indexed by sigma >= 0."""

    name = "base"

    def apply(self, sigma: float, img: ImageGrid) -> ImageGrid:
        raise NotImplementedError


class IdentityDenoiser(Denoiser):
    """Returns its input unchanged at every sigma; useful as a null prior."""

    name = "identity"

    def apply(self, sigma: float, img: ImageGrid) -> ImageGrid:
        return img


class GaussianSmoothing(Denoiser):
    """Separable Gaussian blur with symmetric boundary padding.

    The kernel standard deviation in pixels is c_map * sigma * max(width,
    height), truncated at ``truncate`` standard deviations.
    """

    name = "gaussian"

    def __init__(self, truncate: float = 3.0, c_map: float = 1.0):
        if truncate <= 0 or c_map <= 0:
            raise ValueError("truncate and c_map must be positive")
        self.truncate = truncate
        self.c_map = c_map

    def kernel(self, sigma: float, img: ImageGrid) -> np.ndarray:
        std = self.c_map * sigma * max(img.width, img.height)
        radius = max(1, int(math.ceil(self.truncate * std)))
        offsets = np.arange(-radius, radius + 1, dtype=np.float64)
        k = np.exp(-0.5 * (offsets / std) ** 2)
        return k / k.sum()

    def apply(self, sigma: float, img: ImageGrid) -> ImageGrid:
        k = self.kernel(sigma, img)
        a = img.pixels.reshape(img.height, img.width)
        a = _convolve_axis(a, k, axis=1)
        a = _convolve_axis(a, k, axis=0)
        return ImageGrid.from_array(a)


class MedianFilter(Denoiser):
    """Square-window median with symmetric padding.

    The window half-width is round(c_map * sigma * max(width, height));
    a zero half-width leaves the image untouched, which gives the required
    identity behavior for small sigma.
    """

    name = "median"

    def __init__(self, c_map: float = 1.0):
        if c_map <= 0:
            raise ValueError("c_map must be positive")
        self.c_map = c_map

    def apply(self, sigma: float, img: ImageGrid) -> ImageGrid:
        half = _window_half_width(sigma, img, self.c_map)
        if half == 0:
            return img
        a = img.pixels.reshape(img.height, img.width)
        padded = np.pad(a, half, mode="symmetric")
        win = 2 * half + 1
        windows = np.lib.stride_tricks.sliding_window_view(padded, (win, win))
        return ImageGrid.from_array(np.median(windows, axis=(2, 3)))


class BoxAverage(Denoiser):
    """Square-window mean filter, same sigma-to-window map as MedianFilter."""

    name = "box"

    def __init__(self, c_map: float = 1.0):
        if c_map <= 0:
            raise ValueError("c_map must be positive")
        self.c_map = c_map

    def apply(self, sigma: float, img: ImageGrid) -> ImageGrid:
        half = _window_half_width(sigma, img, self.c_map)
        if half == 0:
            return img
        win = 2 * half + 1
        k = np.full(win, 1.0 / win)
        a = img.pixels.reshape(img.height, img.width)
        a = _convolve_axis(a, k, axis=1)
        a = _convolve_axis(a, k, axis=0)
        return ImageGrid.from_array(a)


def denoise(kind: Denoiser, sigma: float, img: ImageGrid) -> ImageGrid:
    """Apply ``kind`` at strength ``sigma``.

    sigma = 0 returns the input bit-exactly for every kind; the output always
    has the input dimensions and finite entries.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return img
    out = kind.apply(sigma, img)
    if (out.width, out.height) != (img.width, img.height):
        raise ValueError(
            f"denoiser {kind.name} changed image size: "
            f"{(img.width, img.height)} -> {(out.width, out.height)}"
        )
    return out


@dataclass(frozen=True)
class DenoiserBoundEstimate:
    """Sampled estimate of K in ||D_sigma(x) - x||^2 <= K * d * sigma^2.

    k_hat is the max of the observed ratios; it is 0 for an identity-like
    denoiser (the bound is then vacuously satisfied).
    """

    k_hat: float
    sample_count: int
    sigma_grid: tuple[float, ...]
    width: int
    height: int


@dataclass(frozen=True)
class BoundCheckReport:
    violations: int
    worst_ratio: float
    threshold: float


def _sample_image(width: int, height: int, seed: int, index: int) -> ImageGrid:
    # substream derived from (seed, index) so sampling is order-independent
    rng = np.random.default_rng((seed, index))
    return ImageGrid(width, height, rng.uniform(0.0, 1.0, width * height))


def residue_ratio(kind: Denoiser, sigma: float, img: ImageGrid) -> float:
    """||D_sigma(x) - x||^2 / (d * sigma^2) for one image and one sigma."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    out = denoise(kind, sigma, img)
    res = float(np.sum((out.pixels - img.pixels) ** 2))
    return res / (img.dim * sigma * sigma)


def estimate_denoiser_bound_constant(
    kind: Denoiser,
    width: int,
    height: int,
    sigma_grid: Sequence[float],
    n_samples: int,
    seed: int,
) -> DenoiserBoundEstimate:
    """Estimate K as the max residue ratio over sampled (image, sigma) pairs.

    Samples are uniform-noise images in [0, 1]; the estimate is deterministic
    given (seed, width, height, sigma_grid, n_samples).
    """
    grid = tuple(float(s) for s in sigma_grid)
    if not grid or any(s <= 0 for s in grid):
        raise ValueError("sigma_grid must be non-empty with positive entries")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    worst = 0.0
    for i in range(n_samples):
        img = _sample_image(width, height, seed, i)
        for s in grid:
            worst = max(worst, residue_ratio(kind, s, img))
    return DenoiserBoundEstimate(
        k_hat=worst,
        sample_count=n_samples,
        sigma_grid=grid,
        width=width,
        height=height,
    )


def verify_denoiser_bound(
    kind: Denoiser,
    estimate: DenoiserBoundEstimate,
    n_holdout: int,
    seed: int,
    margin: float = 0.5,
) -> BoundCheckReport:
    """Count held-out samples whose ratio exceeds k_hat * (1 + margin).

    The estimate is a sample maximum, so the multiplicative margin guards
    against false alarms; pass a seed different from the estimation seed.
    """
    if n_holdout < 1:
        raise ValueError("n_holdout must be >= 1")
    threshold = estimate.k_hat * (1.0 + margin)
    violations = 0
    worst = 0.0
    for i in range(n_holdout):
        img = _sample_image(estimate.width, estimate.height, seed, i)
        for s in estimate.sigma_grid:
            ratio = residue_ratio(kind, s, img)
            worst = max(worst, ratio)
            if ratio > threshold:
                violations += 1
    return BoundCheckReport(
        violations=violations, worst_ratio=worst, threshold=threshold
    )
