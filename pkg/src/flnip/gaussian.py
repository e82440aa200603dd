"""Isotropic Gaussian kernels and the multi-resolution filter bank."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from flnip.errors import NonPositiveSigma
from flnip.pixelgrid import GrayImage

DEFAULT_SIGMAS = (0.5, 0.8, 1.0)


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    sigma: float
    radius: int
    weights: np.ndarray  # (2r+1, 2r+1), sums to 1

    @property
    def size(self) -> int:
        return 2 * self.radius + 1


@dataclass(frozen=True)
class ScaleBank:
    """Ordered, strictly increasing list of Gaussian standard deviations."""

    sigmas: tuple[float, ...] = DEFAULT_SIGMAS

    def __post_init__(self):
        sigmas = tuple(float(s) for s in self.sigmas)
        if not sigmas:
            raise ValueError("scale bank needs at least one sigma")
        if any(not s > 0 for s in sigmas):
            raise NonPositiveSigma(f"sigmas must be positive: {sigmas}")
        if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
            raise ValueError(f"sigmas must be strictly increasing: {sigmas}")
        object.__setattr__(self, "sigmas", sigmas)

    @classmethod
    def parse(cls, text: str) -> ScaleBank:
        """Parse a comma-separated list such as ``"0.5,0.8,1"``."""
        try:
            return cls(tuple(float(t) for t in text.split(",") if t.strip()))
        except ValueError as exc:
            raise ValueError(f"bad sigma list {text!r}: {exc}") from None

    def __len__(self):
        return len(self.sigmas)

    def __iter__(self):
        return iter(self.sigmas)


def kernel_radius(sigma: float) -> int:
    # guard against 3*0.1 = 0.30000000000000004 style overshoot
    return math.ceil(round(3.0 * sigma, 12))


def build_kernel(sigma: float) -> GaussianKernel:
    """Sample exp(-(x^2+y^2)/(2 sigma^2)) on integer offsets within ceil(3 sigma)
    and normalize to unit sum."""
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    sigma = float(sigma)
    radius = kernel_radius(sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    sq = offsets[:, None] ** 2 + offsets[None, :] ** 2
    raw = np.exp(-sq / (2.0 * sigma * sigma))
    weights = raw / raw.sum()
    weights.setflags(write=False)
    return GaussianKernel(sigma=sigma, radius=radius, weights=weights)


def convolve(pixels: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Direct 2-D convolution with replicate padding, returning float64."""
    r = kernel.radius
    h, w = pixels.shape
    padded = np.pad(pixels.astype(np.float64), r, mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    weights = kernel.weights
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            out += weights[dy, dx] * padded[dy : dy + h, dx : dx + w]
    return out


def quantize(values: np.ndarray) -> np.ndarray:
    """Round half-to-even and clamp to [0, 255]."""
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def filter(image: GrayImage, kernel: GaussianKernel) -> GrayImage:  # noqa: A001
    return GrayImage(quantize(convolve(image.pixels, kernel)))


def scale_stack(image: GrayImage, bank: ScaleBank) -> list[GrayImage]:
    return [filter(image, build_kernel(s)) for s in bank.sigmas]
