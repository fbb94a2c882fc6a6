"""
Tube Schemas - JSONL records for linked tubes and ground-truth annotations
"""
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.schemas.detection import _check_box, _check_scores


class TubeFrameRecord(BaseModel):
    t: int = Field(..., ge=0)
    box: List[float]
    extrapolated: bool = False
    scores: Optional[List[float]] = None

    @field_validator("box")
    @classmethod
    def validate_box(cls, v: List[float]) -> List[float]:
        return _check_box(v)

    @field_validator("scores")
    @classmethod
    def validate_scores(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        return None if v is None else _check_scores(v)


class TubeRecord(BaseModel):
    """One JSONL line of linker output"""
    id: int
    class_id: int = Field(..., alias="class", ge=0)
    score: float = Field(..., allow_inf_nan=False)
    frames: List[TubeFrameRecord] = Field(..., min_length=1)
    video: str = ""

    model_config = ConfigDict(populate_by_name=True)


class GroundTruthRecord(BaseModel):
    """One annotated tube; same layout as TubeRecord plus the video name"""
    video: str = ""
    id: Optional[int] = None
    class_id: int = Field(..., alias="class", ge=0)
    score: Optional[float] = None
    frames: List[TubeFrameRecord] = Field(..., min_length=1)
    # inclusive [start, end] windows hidden from the simulated detector
    occlusions: List[List[int]] = []

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("occlusions")
    @classmethod
    def validate_occlusions(cls, v: List[List[int]]) -> List[List[int]]:
        for window in v:
            if len(window) != 2 or window[0] > window[1]:
                raise ValueError(f"occlusion window must be [start, end], got {window}")
        return v
