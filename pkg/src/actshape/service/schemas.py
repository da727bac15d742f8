from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnumerateRequest(Strict):
    config: dict[str, Any]


class EnumerateResponse(BaseModel):
    name: str
    original: dict[str, Any]
    shaped: dict[str, Any]
    original_cardinality: int | str
    shaped_cardinality: int | str
    combinations: Optional[list[list[Any]]] = None
    truncated: bool = False


class TrainRequest(Strict):
    config: dict[str, Any]
    seed: Optional[int] = None
    out: Optional[str] = None


class SweepRequest(Strict):
    preset: Optional[str] = None
    config: Optional[dict[str, Any]] = None
    out: Optional[str] = None
    seeds: Optional[list[int]] = None
    budget: Optional[int] = Field(default=None, gt=0)


class CurveSummary(BaseModel):
    seed: int
    auc: float
    final_return: float
    points: int


class ExperimentSummary(BaseModel):
    name: str
    curves: list[CurveSummary]
    aggregate_auc: Optional[float]
    failures: dict[str, str]
    files: list[str]


class Job(BaseModel):
    id: str
    kind: Literal["train", "sweep"]
    status: Literal["queued", "running", "done", "failed"]
    error: Optional[str] = None
    results: list[ExperimentSummary] = []


class PlotRequest(Strict):
    curves: dict[str, str] = Field(description="label -> per-seed curve CSV text")
    title: str = ""


class CompareRequest(Strict):
    a: list[str] = Field(description="per-seed curve CSV texts; seed order defines pairing")
    b: list[str]
    metric: Literal["auc", "final_return"] = "auc"


class CompareResponse(BaseModel):
    metric: str
    a_mean: float
    a_std: float
    b_mean: float
    b_std: float
    difference: float
    preserved_fraction: float
