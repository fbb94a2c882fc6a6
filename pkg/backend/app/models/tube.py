"""
Tube Models - Action tubes built by the online linker
"""
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from app.models.detection import Box


@dataclass(frozen=True)
class TubeEntry:
    """One frame of a tube; extrapolated entries hold the last detection's scores"""

    t: int
    box: Box
    extrapolated: bool
    scores: Tuple[float, ...]


@dataclass
class ActionTube:
    """
    A growing, class-labeled sequence of per-frame boxes.

    ``class_energy`` accumulates the score vectors of matched detections;
    ``label`` is its argmax and ``score`` the mean matched score of that class.
    ``tau`` counts consecutive extrapolated frames.
    """

    id: int
    label: int = 0
    score: float = 0.0
    class_energy: List[float] = field(default_factory=list)
    entries: List[TubeEntry] = field(default_factory=list)
    tau: int = 0
    matched_count: int = 0
    video: str = ""

    @property
    def start(self) -> int:
        return self.entries[0].t

    @property
    def end(self) -> int:
        return self.entries[-1].t

    @property
    def last_box(self) -> Box:
        return self.entries[-1].box

    @property
    def last_scores(self) -> Tuple[float, ...]:
        return self.entries[-1].scores

    def __len__(self) -> int:
        return len(self.entries)

    def boxes(self, include_extrapolated: bool = True) -> Dict[int, Box]:
        return {
            e.t: e.box for e in self.entries
            if include_extrapolated or not e.extrapolated
        }

    def copy(self) -> "ActionTube":
        return ActionTube(
            id=self.id,
            label=self.label,
            score=self.score,
            class_energy=list(self.class_energy),
            entries=list(self.entries),
            tau=self.tau,
            matched_count=self.matched_count,
            video=self.video,
        )
