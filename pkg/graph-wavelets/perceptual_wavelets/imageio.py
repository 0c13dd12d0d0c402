"""Reading and writing images, masks and coefficient dumps."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from PIL import Image, UnidentifiedImageError

from perceptual_wavelets.sgwt import WaveletCoefficients


LOGGER = logging.getLogger("perceptual_wavelets.imageio")

SUPPORTED_FORMATS = {"PNG", "PPM"}
MASK_THRESHOLD = 128
CHANNEL_NAMES = ("R", "G", "B")


class ImageReadError(OSError):
    """Raised when an image file cannot be read or has an unsupported format."""


def read_image(path: Path) -> NDArray[np.float64]:
    """Load a PNG or binary PPM as an (H, W, 3) float array on the 8-bit scale."""

    path = Path(path)
    try:
        with Image.open(path) as handle:
            if handle.format not in SUPPORTED_FORMATS:
                raise ImageReadError(f"{path}: unsupported image format {handle.format!r}")
            rgb = handle.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.float64)
    except (FileNotFoundError, UnidentifiedImageError) as exc:
        raise ImageReadError(f"cannot read image {path}: {exc}") from exc
    LOGGER.info("read %s (%dx%d)", path, pixels.shape[1], pixels.shape[0])
    return pixels


def to_uint8(image: ArrayLike) -> NDArray[np.uint8]:
    pixels = np.asarray(image, dtype=np.float64)
    return np.clip(np.rint(pixels), 0, 255).astype(np.uint8)


def write_image(path: Path, image: ArrayLike) -> None:
    """Write an (H, W, 3) or (H, W) image as PNG, rounding to 8 bits."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(image)).save(path, format="PNG")


def read_mask(path: Path) -> NDArray[np.bool_]:
    """Grayscale mask image; values >= 128 mark known pixels."""

    path = Path(path)
    try:
        with Image.open(path) as handle:
            gray = np.asarray(handle.convert("L"))
    except (FileNotFoundError, UnidentifiedImageError) as exc:
        raise ImageReadError(f"cannot read mask {path}: {exc}") from exc
    return gray >= MASK_THRESHOLD


def write_mask(path: Path, known: ArrayLike) -> None:
    flags = np.asarray(known, dtype=bool)
    write_image(path, np.where(flags, 255, 0))


def add_gaussian_noise(image: ArrayLike, std: float, seed: int = 0) -> NDArray[np.float64]:
    """Add i.i.d. Gaussian noise of the given std and clip to [0, 255]."""

    if std < 0:
        raise ValueError(f"noise std must be non-negative, got {std}")
    pixels = np.asarray(image, dtype=np.float64)
    rng = np.random.default_rng(seed)
    return np.clip(pixels + rng.normal(0.0, std, size=pixels.shape), 0.0, 255.0)


def plane_names(n_scales: int) -> List[str]:
    return ["scaling"] + [f"wavelet{j}" for j in range(1, n_scales + 1)]


def _plane_to_gray(plane: NDArray[np.float64]) -> NDArray[np.float64]:
    low, high = float(plane.min()), float(plane.max())
    if high - low <= 0.0:
        return np.zeros_like(plane)
    return (plane - low) * (255.0 / (high - low))


def write_coefficient_dump(
    stem: Path,
    channels: Sequence[WaveletCoefficients],
    shape: Tuple[int, int],
    plane_images: bool = True,
) -> List[Path]:
    """Write ``<stem>_coeffs.bin`` / ``.json`` and optionally one PNG per plane.

    The binary file holds little-endian float64 values of shape
    (J + 1, channels, H, W), plane-major.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    height, width = shape
    cube = np.stack([c.planes for c in channels], axis=1).reshape(
        channels[0].planes.shape[0], len(channels), height, width
    )
    names = plane_names(channels[0].n_scales)
    channel_names = [c.channel or CHANNEL_NAMES[i] for i, c in enumerate(channels)]

    written: List[Path] = []
    binary = stem.parent / f"{stem.name}_coeffs.bin"
    binary.write_bytes(cube.astype("<f8").tobytes())
    written.append(binary)

    meta: Dict[str, object] = {
        "shape": list(cube.shape),
        "dtype": "<f8",
        "order": ["plane", "channel", "row", "column"],
        "planes": names,
        "channels": channel_names,
    }
    sidecar = stem.parent / f"{stem.name}_coeffs.json"
    sidecar.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    written.append(sidecar)

    if plane_images:
        for p, plane_name in enumerate(names):
            for c, channel_name in enumerate(channel_names):
                target = stem.parent / f"{stem.name}_{plane_name}_{channel_name}.png"
                write_image(target, _plane_to_gray(cube[p, c]))
                written.append(target)
    LOGGER.info("wrote %d coefficient files under %s", len(written), stem.parent)
    return written


def read_coefficient_dump(stem: Path) -> Tuple[NDArray[np.float64], Dict[str, object]]:
    stem = Path(stem)
    sidecar = stem.parent / f"{stem.name}_coeffs.json"
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    raw = (stem.parent / f"{stem.name}_coeffs.bin").read_bytes()
    cube = np.frombuffer(raw, dtype=meta["dtype"]).reshape(meta["shape"]).astype(np.float64)
    return cube, meta


def dump_stem(out: Path, stem: Optional[str] = None) -> Path:
    """Dump prefix for ``--out``: the path without its suffix."""

    out = Path(out)
    return out.parent / (stem or out.stem)


__all__ = [
    "CHANNEL_NAMES",
    "ImageReadError",
    "add_gaussian_noise",
    "dump_stem",
    "plane_names",
    "read_coefficient_dump",
    "read_image",
    "read_mask",
    "to_uint8",
    "write_coefficient_dump",
    "write_image",
    "write_mask",
]
