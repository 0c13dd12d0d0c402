"""Configuration helpers and parameter models for the graph wavelet tooling."""

from __future__ import annotations

import os
from enum import Enum
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


THREADS_ENV_VAR = "PERCEPTUAL_WAVELETS_THREADS"


def default_threads() -> int:
    """Worker count from the environment, falling back to the CPU count."""

    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ValueError(f"{THREADS_ENV_VAR} must be at least 1, got {value}")
        return value
    return os.cpu_count() or 1


class DistanceMode(str, Enum):
    """Color term used in the k-NN distance."""

    EUCLIDEAN_RGB = "ed"
    DELTA_E2000 = "de2000"


class GraphParams(BaseModel):
    """Parameters of the geodesic k-NN image graph."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(default=8, ge=1, description="Number of nearest neighbors per pixel")
    sigma: float = Field(default=10.0, gt=0.0, description="Gaussian width of the edge weights")
    geodesic_budget: Optional[int] = Field(
        default=None,
        ge=1,
        description="Geodesic neighbors kept per vertex (defaults to 4k)",
    )
    mode: DistanceMode = DistanceMode.EUCLIDEAN_RGB

    @model_validator(mode="after")
    def budget_covers_knn(self) -> "GraphParams":
        if self.geodesic_budget is not None and self.geodesic_budget < self.k:
            raise ValueError(
                f"geodesic_budget ({self.geodesic_budget}) must be at least k ({self.k})"
            )
        return self

    @property
    def budget(self) -> int:
        return self.geodesic_budget if self.geodesic_budget is not None else 4 * self.k


class TransformParams(BaseModel):
    """Kernel design and computation path of the wavelet transform."""

    model_config = ConfigDict(frozen=True)

    scales: int = Field(default=3, ge=1, description="Number of wavelet scales J")
    design_k: float = Field(default=20.0, gt=1.0, description="Ratio lambda_max / lambda_min")
    chebyshev_order: int = Field(default=50, ge=3)
    exact: bool = False
    exact_cap: int = Field(default=5000, ge=1)
    cg_tolerance: float = Field(default=1e-8, gt=0.0)
    cg_max_iterations: int = Field(default=2000, ge=1)


class DenoiseParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    graph: GraphParams = Field(default_factory=GraphParams)
    transform: TransformParams = Field(default_factory=TransformParams)
    threshold_multiplier: float = Field(default=3.0, gt=0.0)
    smooth_sigma: float = Field(default=2.0, gt=0.0)
    smooth: bool = Field(
        default=True,
        description="Build the graph on the smoothed image (False uses the noisy image directly)",
    )


class InpaintParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    graph: GraphParams = Field(default_factory=GraphParams)
    transform: TransformParams = Field(default_factory=TransformParams)
    iterations: int = Field(default=30, ge=1)
    schedule: Literal["decay", "fixed"] = "decay"
    threshold_multiplier: float = Field(default=3.0, gt=0.0)
    alpha: Optional[float] = Field(
        default=None,
        ge=0.0,
        description="Explicit fixed threshold; overrides the estimated one",
    )
    alpha_max: Optional[float] = Field(default=None, ge=0.0)
    alpha_min: Optional[float] = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def decay_is_ordered(self) -> "InpaintParams":
        if (
            self.alpha_max is not None
            and self.alpha_min is not None
            and self.alpha_min > self.alpha_max
        ):
            raise ValueError("alpha_min must not exceed alpha_max")
        return self


class RunConfig(BaseModel):
    """Everything a CLI command needs, validated once at parse time."""

    model_config = ConfigDict(frozen=True)

    command: Literal["decompose", "analyze", "denoise", "inpaint", "sweep"]
    input_path: Path
    out_path: Optional[Path] = None
    report_path: Optional[Path] = None
    graph: GraphParams = Field(default_factory=GraphParams)
    transform: TransformParams = Field(default_factory=TransformParams)
    smooth_sigma: float = Field(default=2.0, gt=0.0)
    no_smooth: bool = False
    threshold_multiplier: float = Field(default=3.0, gt=0.0)
    iterations: int = Field(default=30, ge=1)
    schedule: Literal["decay", "fixed"] = "decay"
    mask_path: Optional[Path] = None
    reference_path: Optional[Path] = None
    graph_image_path: Optional[Path] = None
    graph_dump_path: Optional[Path] = None
    add_noise: Optional[float] = Field(default=None, ge=0.0)
    noise_levels: tuple[float, ...] = (2.0, 5.0, 10.0, 20.0)
    seed: int = 0
    threads: int = Field(default_factory=default_threads, ge=1)

    @model_validator(mode="after")
    def paths_are_nonempty(self) -> "RunConfig":
        for name in ("input_path", "out_path", "report_path", "mask_path", "reference_path"):
            value = getattr(self, name)
            if value is not None and not str(value).strip():
                raise ValueError(f"{name} must not be empty")
        if self.command == "inpaint" and self.mask_path is None:
            raise ValueError("inpaint requires --mask")
        if self.command in {"denoise", "inpaint", "decompose"} and self.out_path is None:
            raise ValueError(f"{self.command} requires --out")
        return self

    def denoise_params(self) -> DenoiseParams:
        return DenoiseParams(
            graph=self.graph,
            transform=self.transform,
            threshold_multiplier=self.threshold_multiplier,
            smooth_sigma=self.smooth_sigma,
            smooth=not self.no_smooth,
        )

    def inpaint_params(self) -> InpaintParams:
        return InpaintParams(
            graph=self.graph,
            transform=self.transform,
            iterations=self.iterations,
            schedule=self.schedule,
            threshold_multiplier=self.threshold_multiplier,
        )


__all__ = [
    "DenoiseParams",
    "DistanceMode",
    "GraphParams",
    "InpaintParams",
    "RunConfig",
    "TransformParams",
    "default_threads",
]
