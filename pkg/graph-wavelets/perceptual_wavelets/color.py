"""Colorimetry: sRGB and CIELab conversion, CIEDE2000 and RGB distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from skimage import color as skcolor


# CIELab is taken under the D65 white point and the 2 degree observer.
ILLUMINANT = "D65"
OBSERVER = "2"


@dataclass(frozen=True)
class RgbColor:
    """An sRGB color with channels on the 8-bit scale."""

    r: float
    g: float
    b: float

    def __post_init__(self) -> None:
        for name in ("r", "g", "b"):
            value = getattr(self, name)
            if not 0.0 <= value <= 255.0:
                raise ValueError(f"RGB channel {name}={value} outside [0, 255]")

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.r, self.g, self.b], dtype=np.float64)


@dataclass(frozen=True)
class LabColor:
    """A CIELab color; only lightness is bounded."""

    L: float
    a: float
    b: float

    def __post_init__(self) -> None:
        if not -1e-6 <= self.L <= 100.0 + 1e-6:
            raise ValueError(f"Lightness L={self.L} outside [0, 100]")

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.L, self.a, self.b], dtype=np.float64)


def srgb_to_lab_array(rgb: ArrayLike) -> NDArray[np.float64]:
    """Convert an array of 8-bit-scale sRGB triples (last axis) to CIELab."""

    values = np.asarray(rgb, dtype=np.float64)
    if values.shape[-1] != 3:
        raise ValueError(f"expected RGB triples on the last axis, got shape {values.shape}")
    flat = np.clip(values.reshape(1, -1, 3) / 255.0, 0.0, 1.0)
    lab = skcolor.rgb2lab(flat, illuminant=ILLUMINANT, observer=OBSERVER)
    return lab.reshape(values.shape)


def lab_to_srgb_array(lab: ArrayLike) -> NDArray[np.float64]:
    """Inverse of :func:`srgb_to_lab_array`; out-of-gamut values are clipped."""

    values = np.asarray(lab, dtype=np.float64)
    if values.shape[-1] != 3:
        raise ValueError(f"expected Lab triples on the last axis, got shape {values.shape}")
    rgb = skcolor.lab2rgb(values.reshape(1, -1, 3), illuminant=ILLUMINANT, observer=OBSERVER)
    return np.clip(rgb.reshape(values.shape) * 255.0, 0.0, 255.0)


def srgb_to_lab(c: RgbColor) -> LabColor:
    L, a, b = srgb_to_lab_array(c.as_array())
    return LabColor(float(L), float(a), float(b))


def lab_to_srgb(c: LabColor) -> RgbColor:
    r, g, b = lab_to_srgb_array(c.as_array())
    return RgbColor(float(r), float(g), float(b))


def delta_e2000_array(
    lab1: ArrayLike,
    lab2: ArrayLike,
    kL: float = 1.0,
    kC: float = 1.0,
    kH: float = 1.0,
) -> NDArray[np.float64]:
    """CIEDE2000 difference between broadcastable arrays of Lab triples.

    Args:
        lab1: Lab values with the three coordinates on the last axis.
        lab2: Lab values broadcastable against ``lab1``.
        kL, kC, kH: Parametric weighting factors.

    Returns:
        Array of nonnegative differences with the broadcast leading shape.
    """
    p, q = np.broadcast_arrays(np.asarray(lab1, dtype=np.float64), np.asarray(lab2, dtype=np.float64))
    if p.shape[-1] != 3:
        raise ValueError(f"expected Lab triples on the last axis, got shape {p.shape}")
    return np.asarray(skcolor.deltaE_ciede2000(p, q, kL=kL, kC=kC, kH=kH), dtype=np.float64)


def delta_e2000(p: LabColor, q: LabColor) -> float:
    """Symmetric CIEDE2000 difference with kL = kC = kH = 1."""

    return float(delta_e2000_array(p.as_array(), q.as_array()))


def delta_e_rgb_array(rgb1: ArrayLike, rgb2: ArrayLike) -> NDArray[np.float64]:
    diff = np.asarray(rgb1, dtype=np.float64) - np.asarray(rgb2, dtype=np.float64)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def delta_e_rgb(p: RgbColor, q: RgbColor) -> float:
    """Euclidean distance between two colors in RGB space."""

    return float(delta_e_rgb_array(p.as_array(), q.as_array()))


def rgb_to_value(c: RgbColor) -> float:
    """HSV Value of a color, in [0, 1]."""

    return max(c.r, c.g, c.b) / 255.0


def value_plane(image: ArrayLike) -> NDArray[np.float64]:
    """HSV Value plane of an (H, W, 3) image on the 8-bit scale."""

    pixels = np.asarray(image, dtype=np.float64)
    return pixels.max(axis=-1) / 255.0


__all__ = [
    "LabColor",
    "RgbColor",
    "delta_e2000",
    "delta_e2000_array",
    "delta_e_rgb",
    "delta_e_rgb_array",
    "lab_to_srgb",
    "lab_to_srgb_array",
    "rgb_to_value",
    "srgb_to_lab",
    "srgb_to_lab_array",
    "value_plane",
]
