"""JSON report emitted by every command."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from perceptual_wavelets.metrics import QualityReport, SnrDb


class ImageInfo(BaseModel):
    width: int = Field(ge=1)
    height: int = Field(ge=1)


class GraphInfo(BaseModel):
    """Size and spectral bound of the graph the transform ran on."""

    vertices: int = Field(ge=1)
    edges: int = Field(ge=0)
    components: int = Field(ge=1)
    lambda_max: float = Field(ge=0.0, description="Exact largest eigenvalue or its upper bound")
    path: Literal["exact", "chebyshev"]
    mode: Literal["ed", "de2000"]
    source: Optional[str] = Field(default=None, description="Image the graph was built from")


class ChannelReport(BaseModel):
    name: str
    q: float = Field(ge=0.0, description="sqrt(f^T L f) of the channel signal")
    q_tau: List[float] = Field(description="Quadratic form of each plane, scaling plane first")
    tau: Optional[float] = Field(default=None, ge=0.0)
    alpha: Optional[float] = Field(default=None, ge=0.0)
    snr_db: Optional[SnrDb] = None


class SweepEntry(BaseModel):
    noise_std: float = Field(ge=0.0)
    noisy: QualityReport
    smoothed: QualityReport
    restored: QualityReport


class RestorationReport(BaseModel):
    """Report of a decompose, analyze, denoise, inpaint or sweep run.

    Optional sections that do not apply are left out of the JSON entirely.
    """

    command: Literal["decompose", "analyze", "denoise", "inpaint", "sweep"]
    parameters: Dict[str, Any] = Field(default_factory=dict)
    image: ImageInfo
    graph: Optional[GraphInfo] = None
    channels: Optional[List[ChannelReport]] = None
    q_tau_mean: Optional[List[float]] = None
    q_mean: Optional[float] = None
    quality: Optional[QualityReport] = None
    baselines: Optional[Dict[str, QualityReport]] = None
    sweep: Optional[List[SweepEntry]] = None
    iterations: Optional[int] = Field(default=None, ge=0)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", exclude_none=True), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RestorationReport":
        return cls.model_validate(json.loads(text))

    def write(self, path: Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def load_report(path: Path) -> RestorationReport:
    return RestorationReport.from_json(Path(path).read_text(encoding="utf-8"))


JSON_SCHEMA_DIALECT = "https://json-schema.org/draft/2020-12/schema"


def report_json_schema() -> Dict[str, Any]:
    """JSON Schema of the report, generated from the models."""

    return {"$schema": JSON_SCHEMA_DIALECT, **RestorationReport.model_json_schema()}


def report_json_schema_text() -> str:
    return json.dumps(report_json_schema(), indent=2) + "\n"


__all__ = [
    "ChannelReport",
    "GraphInfo",
    "ImageInfo",
    "RestorationReport",
    "SweepEntry",
    "load_report",
    "report_json_schema",
    "report_json_schema_text",
]
