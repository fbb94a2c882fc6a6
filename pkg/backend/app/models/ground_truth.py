"""
Ground Truth Models - Annotated tubes and evaluation curves
"""
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from app.core.errors import InputError
from app.models.detection import Box


@dataclass(frozen=True)
class GroundTruthTube:
    """An annotated tube over a contiguous frame range"""

    label: int
    boxes: Dict[int, Box]
    video: str = ""
    # (start, end) inclusive frame windows in which the actor is hidden from the detector
    occlusions: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if not self.boxes:
            raise InputError("A ground-truth tube needs at least one frame")
        frames = sorted(self.boxes)
        if frames[-1] - frames[0] + 1 != len(frames):
            raise InputError(f"Ground-truth tube frames are not contiguous: {frames[0]}..{frames[-1]}")

    @property
    def start(self) -> int:
        return min(self.boxes)

    @property
    def end(self) -> int:
        return max(self.boxes)

    def is_occluded(self, t: int) -> bool:
        return any(start <= t <= end for start, end in self.occlusions)


@dataclass
class VideoAnnotation:
    num_frames: int
    tubes: List[GroundTruthTube] = field(default_factory=list)
    width: int = 0
    height: int = 0


@dataclass
class GroundTruth:
    """Annotated tubes per video plus the class count"""

    num_classes: int
    videos: Dict[str, VideoAnnotation] = field(default_factory=dict)

    def tubes(self) -> List[GroundTruthTube]:
        return [tube for name in sorted(self.videos) for tube in self.videos[name].tubes]

    def classes_present(self) -> List[int]:
        return sorted({tube.label for tube in self.tubes()})

    def check_class(self, class_id: int) -> None:
        if not 0 <= class_id < self.num_classes:
            raise InputError(f"Unknown class {class_id} (class count {self.num_classes})")


@dataclass(frozen=True)
class ScoredTube:
    """A predicted tube reduced to what the video-level evaluator needs"""

    label: int
    score: float
    boxes: Dict[int, Box]
    video: str = ""


@dataclass
class PRCurve:
    """(recall, precision) points in ranking order and the all-point AP"""

    points: List[Tuple[float, float]]
    ap: float
    num_positives: int
