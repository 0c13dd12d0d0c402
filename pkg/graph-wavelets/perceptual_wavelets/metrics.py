"""Image quality metrics: per-channel SNR and SSIM on the HSV Value plane."""

from __future__ import annotations

import math
from typing import Annotated, List, Literal, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, BeforeValidator, Field, PlainSerializer, WithJsonSchema
from skimage.metrics import structural_similarity

from perceptual_wavelets.color import value_plane


SNR_DEFINITION = "power-ratio"
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _decode_infinite(value):
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in {"inf", "+inf"}:
            return math.inf
        if lowered == "-inf":
            return -math.inf
    return value


def _encode_infinite(value: float) -> Union[float, str]:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


# SNR in dB; infinities travel through JSON as the strings "inf" / "-inf".
SnrDb = Annotated[
    float,
    BeforeValidator(_decode_infinite),
    PlainSerializer(_encode_infinite, return_type=Union[float, str], when_used="always"),
    WithJsonSchema(
        {
            "description": "SNR in dB; infinite values are the strings \"inf\" or \"-inf\".",
            "anyOf": [{"type": "number"}, {"type": "string", "enum": ["inf", "-inf"]}],
        }
    ),
]


class QualityReport(BaseModel):
    """SNR per RGB band and SSIM of the Value component."""

    snr_rgb: List[SnrDb] = Field(min_length=3, max_length=3)
    ssim: float = Field(ge=-1.0, le=1.0)
    snr_definition: Literal["power-ratio"] = SNR_DEFINITION


def _image_pair(reference: ArrayLike, test: ArrayLike) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ref.shape != tst.shape:
        raise ValueError(f"image dimensions differ: {ref.shape} vs {tst.shape}")
    if ref.ndim != 3 or ref.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) color images, got shape {ref.shape}")
    return ref, tst


def snr_per_channel(reference: ArrayLike, test: ArrayLike) -> Tuple[float, float, float]:
    """Signal-to-noise ratio of each RGB band in dB.

    Args:
        reference: Clean (H, W, 3) image on the 8-bit scale.
        test: Image to evaluate, same shape as ``reference``.

    Returns:
        10 * log10(sum ref^2 / sum (ref - test)^2) per channel. A channel
        without error yields ``math.inf``; a black reference channel with
        error yields ``-math.inf``.
    """
    ref, tst = _image_pair(reference, test)
    signal = np.sum(ref * ref, axis=(0, 1))
    error = np.sum((ref - tst) ** 2, axis=(0, 1))
    values = []
    for s, e in zip(signal, error):
        if e == 0.0:
            values.append(math.inf)
        elif s == 0.0:
            values.append(-math.inf)
        else:
            values.append(10.0 * math.log10(s / e))
    return values[0], values[1], values[2]


def ssim_value(reference: ArrayLike, test: ArrayLike) -> float:
    """Mean SSIM of the HSV Value planes with an 11x11 Gaussian window."""

    ref, tst = _image_pair(reference, test)
    if min(ref.shape[:2]) < SSIM_WINDOW:
        raise ValueError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {ref.shape[:2]}"
        )
    return float(
        structural_similarity(
            value_plane(ref),
            value_plane(tst),
            data_range=1.0,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
        )
    )


def quality_report(reference: ArrayLike, test: ArrayLike) -> QualityReport:
    return QualityReport(
        snr_rgb=list(snr_per_channel(reference, test)),
        ssim=min(ssim_value(reference, test), 1.0),
    )


__all__ = [
    "QualityReport",
    "SNR_DEFINITION",
    "SnrDb",
    "quality_report",
    "snr_per_channel",
    "ssim_value",
]
