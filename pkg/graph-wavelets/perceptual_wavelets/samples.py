"""Deterministic synthetic images and masks for experiments and tests."""

from __future__ import annotations

from typing import Tuple

import numpy as np
from numpy.typing import NDArray


Color = Tuple[int, int, int]


def constant_image(height: int, width: int, color: Color = (120, 80, 200)) -> NDArray[np.float64]:
    image = np.empty((height, width, 3), dtype=np.float64)
    image[...] = color
    return image


def cartoon_image(height: int = 32, width: int = 32) -> NDArray[np.float64]:
    """Piecewise-constant scene: a sky/ground split, a disc, a box and a stripe."""

    ys, xs = np.mgrid[0:height, 0:width]
    image = constant_image(height, width, (70, 130, 200))
    image[ys >= height // 2] = (60, 150, 60)
    disc = (xs - 0.7 * width) ** 2 + (ys - 0.3 * height) ** 2 <= (0.18 * min(height, width)) ** 2
    image[disc] = (240, 200, 40)
    box = (xs >= width // 8) & (xs < width // 2) & (ys >= height // 3) & (ys < (5 * height) // 6)
    image[box] = (200, 40, 40)
    stripe = (xs >= (5 * width) // 8) & (xs < (3 * width) // 4) & (ys >= height // 2)
    image[stripe] = (30, 30, 90)
    return image


def gradient_image(height: int = 32, width: int = 32) -> NDArray[np.float64]:
    """Smoothly varying image with several hues and one sharp edge."""

    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    u = xs / max(width - 1, 1)
    v = ys / max(height - 1, 1)
    red = 40.0 + 180.0 * u
    green = 60.0 + 150.0 * v
    blue = 128.0 + 90.0 * np.sin(2.0 * np.pi * (u + v) / 2.0)
    image = np.stack([red, green, blue], axis=-1)
    image[(u + 0.5 * v) > 0.9] = (230, 70, 150)
    return np.clip(np.rint(image), 0.0, 255.0)


def block_mask(height: int, width: int, top: int, left: int, size: int) -> NDArray[np.bool_]:
    """Known everywhere except a size x size square."""

    known = np.ones((height, width), dtype=bool)
    known[top : top + size, left : left + size] = False
    return known


def random_mask(height: int, width: int, missing_fraction: float, seed: int = 0) -> NDArray[np.bool_]:
    if not 0.0 <= missing_fraction < 1.0:
        raise ValueError(f"missing fraction must lie in [0, 1), got {missing_fraction}")
    rng = np.random.default_rng(seed)
    n = height * width
    missing = rng.permutation(n)[: int(round(missing_fraction * n))]
    known = np.ones(n, dtype=bool)
    known[missing] = False
    return known.reshape(height, width)


def scratch_mask(height: int, width: int, thickness: int = 1) -> NDArray[np.bool_]:
    """Two crossing diagonal scratches."""

    ys, xs = np.mgrid[0:height, 0:width]
    scale = width / max(height, 1)
    first = np.abs(xs - scale * ys) < thickness
    second = np.abs(xs - (width - 1 - scale * ys)) < thickness
    return ~(first | second)


__all__ = [
    "block_mask",
    "cartoon_image",
    "constant_image",
    "gradient_image",
    "random_mask",
    "scratch_mask",
]
