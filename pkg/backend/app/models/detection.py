"""
Detection Models - Boxes, frame-level detections and keypoint heatmaps
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from app.core.errors import InputError


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in pixels, x1 <= x2 and y1 <= y2"""

    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return max(0.0, self.x2 - self.x1) * max(0.0, self.y2 - self.y1)

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def is_valid(self) -> bool:
        coords = (self.x1, self.y1, self.x2, self.y2)
        return all(np.isfinite(c) for c in coords) and self.x1 <= self.x2 and self.y1 <= self.y2

    def clamp(self, width: float, height: float) -> "Box":
        return Box(
            min(max(self.x1, 0.0), width),
            min(max(self.y1, 0.0), height),
            min(max(self.x2, 0.0), width),
            min(max(self.y2, 0.0), height),
        )

    def as_list(self) -> List[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    @classmethod
    def from_sequence(cls, values) -> "Box":
        if len(values) != 4:
            raise InputError(f"A box needs 4 coordinates, got {len(values)}")
        box = cls(float(values[0]), float(values[1]), float(values[2]), float(values[3]))
        if not box.is_valid():
            raise InputError(f"Invalid box {list(values)}")
        return box


@dataclass(frozen=True)
class Detection:
    """A frame-level candidate: box plus one score per class"""

    box: Box
    scores: Tuple[float, ...]
    frame: int

    @property
    def num_classes(self) -> int:
        return len(self.scores)

    def score(self, class_id: int) -> float:
        return self.scores[class_id]

    @property
    def best_class(self) -> int:
        """Argmax class; ties go to the lowest index"""
        best = 0
        for c in range(1, len(self.scores)):
            if self.scores[c] > self.scores[best]:
                best = c
        return best


@dataclass(frozen=True, eq=False)
class HeatmapSet:
    """
    Keypoint-detector outputs for one frame.

    Arrays are row-major, channel-last: ``center`` is (grid_h, grid_w, N),
    ``size`` and ``offset`` are (grid_h, grid_w, 2) holding (width, height)
    in input pixels and (dx, dy) in cells.
    """

    center: np.ndarray
    size: np.ndarray
    offset: np.ndarray
    down_ratio: int
    width: int
    height: int
    frame: int = 0

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=np.float64)
        size = np.asarray(self.size, dtype=np.float64)
        offset = np.asarray(self.offset, dtype=np.float64)
        if center.ndim != 3:
            raise InputError(f"Center heatmap must be (grid_h, grid_w, N), got {center.shape}")
        grid_h, grid_w, _ = center.shape
        if size.shape != (grid_h, grid_w, 2) or offset.shape != (grid_h, grid_w, 2):
            raise InputError("Size and offset maps must be (grid_h, grid_w, 2)")
        if self.down_ratio <= 0:
            raise InputError("Down ratio must be positive")
        # grid = ceil(W / R) x ceil(H / R)
        if grid_w != -(-self.width // self.down_ratio) or grid_h != -(-self.height // self.down_ratio):
            raise InputError(
                f"Grid {grid_w}x{grid_h} is inconsistent with {self.width}x{self.height} at R={self.down_ratio}"
            )
        if center.size and (center.min() < 0 or center.max() > 1):
            raise InputError("Center scores must lie in [0, 1]")
        if size.size and size.min() < 0:
            raise InputError("Size values must be non-negative")
        if offset.size and (offset.min() < 0 or offset.max() >= 1):
            raise InputError("Offsets must lie in [0, 1)")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "offset", offset)

    @property
    def grid_h(self) -> int:
        return self.center.shape[0]

    @property
    def grid_w(self) -> int:
        return self.center.shape[1]

    @property
    def num_classes(self) -> int:
        return self.center.shape[2]
