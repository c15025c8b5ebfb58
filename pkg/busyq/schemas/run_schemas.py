from __future__ import annotations
import math
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from busyq.analysis.laplace_inversion import InversionConfig
from busyq.errors import ModelValidationError

Command = Literal[
    "transform", "moments", "busy-law", "tail recover", "tail check",
    "network solve", "sim queue", "sim network", "verify",
]
OutputFormat = Literal["csv", "json"]

MAX_GRID_POINTS = 1_000_000


class GridSpec(BaseModel):
    """Closed grid start:stop:step (stop included when it lands on the lattice)."""

    model_config = ConfigDict(frozen=True)

    start: float
    stop: float
    step: float

    @model_validator(mode="after")
    def _valid(self) -> "GridSpec":
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ModelValidationError(f"grid step must be > 0, got {self.step}", code="INVALID_GRID", path="/grid")
        if self.stop < self.start:
            raise ModelValidationError("grid stop is below start", code="INVALID_GRID", path="/grid")
        if (self.stop - self.start) / self.step > MAX_GRID_POINTS:
            raise ModelValidationError("grid has too many points", code="INVALID_GRID", path="/grid")
        return self

    @classmethod
    def parse(cls, text: str, *, path: str = "/grid") -> "GridSpec":
        parts = (text or "").split(":")
        if len(parts) != 3:
            raise ModelValidationError(f"grid must look like start:stop:step, got {text!r}",
                                       code="INVALID_GRID", path=path)
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as e:
            raise ModelValidationError(f"grid {text!r} has a non-numeric part", code="INVALID_GRID", path=path) from e
        return cls(start=start, stop=stop, step=step)

    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


class RunSpec(BaseModel):
    model_config = ConfigDict(extra="ignore")

    command: Command
    model: Optional[str] = None
    net: Optional[str] = None
    grid: Optional[GridSpec] = None
    s_grid: Optional[GridSpec] = None
    out: OutputFormat = "csv"
    inversion: InversionConfig = Field(default_factory=InversionConfig)
    seed: int = 0
    options: Dict[str, Any] = Field(default_factory=dict)


class ResultTable(BaseModel):
    """Rows in a stable column order; floats are formatted by the writer."""

    columns: List[str]
    rows: List[List[Any]]
    meta: Dict[str, Any] = Field(default_factory=dict)


class ErrorReport(BaseModel):
    error: str
    message: str
    path: str = ""
