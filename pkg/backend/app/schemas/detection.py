"""
Detection Schemas - JSONL records for frame-level detections
"""
import math
from typing import List

from pydantic import BaseModel, Field, field_validator


def _check_box(v: List[float]) -> List[float]:
    if len(v) != 4:
        raise ValueError(f"box needs 4 coordinates, got {len(v)}")
    if not all(math.isfinite(c) for c in v):
        raise ValueError(f"box coordinates must be finite: {v}")
    x1, y1, x2, y2 = v
    if x1 > x2 or y1 > y2:
        raise ValueError(f"box corners out of order: {v}")
    return v


def _check_scores(v: List[float]) -> List[float]:
    # NaN fails the chained comparison
    if not all(0.0 <= s <= 1.0 for s in v):
        raise ValueError("scores must lie in [0, 1]")
    return v


class DetectionRecord(BaseModel):
    """One detection: box [x1, y1, x2, y2] and a class-score vector"""
    box: List[float]
    scores: List[float] = Field(..., min_length=1)

    @field_validator("box")
    @classmethod
    def validate_box(cls, v: List[float]) -> List[float]:
        return _check_box(v)

    @field_validator("scores")
    @classmethod
    def validate_scores(cls, v: List[float]) -> List[float]:
        return _check_scores(v)


class FrameDetectionsRecord(BaseModel):
    """One JSONL line: all detections of a frame"""
    frame: int = Field(..., ge=0)
    dets: List[DetectionRecord] = []
    video: str = ""
