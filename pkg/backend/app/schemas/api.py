"""
API Schemas - Request and response bodies of the HTTP service
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.schemas.detection import FrameDetectionsRecord
from app.schemas.tube import GroundTruthRecord, TubeRecord


class LinkRequest(BaseModel):
    detections: List[FrameDetectionsRecord]
    config: Dict[str, Any] = Field(default={}, description="Dotted-key overrides, e.g. {\"link.k\": 3}")


class LinkResponse(BaseModel):
    tubes: List[TubeRecord]


class EvalRequest(BaseModel):
    tubes: List[TubeRecord]
    ground_truth: List[GroundTruthRecord]
    detections: Optional[List[FrameDetectionsRecord]] = None
    num_classes: Optional[int] = Field(default=None, ge=1)
    config: Dict[str, Any] = {}


class SimulateResponse(BaseModel):
    ground_truth: List[GroundTruthRecord]
    detections: List[FrameDetectionsRecord]
