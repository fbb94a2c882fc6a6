from .frame import CascadedInput, Frame, ShiftDirection, TemporalMap
from .detection import Box, Detection, HeatmapSet
from .tube import ActionTube, TubeEntry
from .ground_truth import GroundTruth, GroundTruthTube, PRCurve, ScoredTube, VideoAnnotation

__all__ = [
    "CascadedInput",
    "Frame",
    "ShiftDirection",
    "TemporalMap",
    "Box",
    "Detection",
    "HeatmapSet",
    "ActionTube",
    "TubeEntry",
    "GroundTruth",
    "GroundTruthTube",
    "PRCurve",
    "ScoredTube",
    "VideoAnnotation",
]
