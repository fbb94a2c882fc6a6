"""
Scenario Schemas - Synthetic scenario and detector-noise specification files
"""
from typing import List, Literal, Tuple

from pydantic import BaseModel, Field, model_validator

from app.core.errors import InputError


class Waypoint(BaseModel):
    """Top-left corner of an actor box at frame t"""
    t: int = Field(..., ge=0)
    x: float
    y: float


class Actor(BaseModel):
    label: int = Field(..., ge=0)
    start: int = Field(..., ge=0)
    end: int = Field(..., ge=0, description="Last frame (inclusive)")
    size: Tuple[float, float] = Field(..., description="Box (width, height) in pixels")
    motion: Literal["constant_velocity", "waypoints"] = "constant_velocity"
    origin: Tuple[float, float] = (0.0, 0.0)
    velocity: Tuple[float, float] = (0.0, 0.0)
    waypoints: List[Waypoint] = []

    @model_validator(mode="after")
    def check_lifetime(self) -> "Actor":
        if self.end < self.start:
            raise ValueError(f"actor ends ({self.end}) before it starts ({self.start})")
        if self.size[0] < 0 or self.size[1] < 0:
            raise ValueError("actor size must be non-negative")
        if self.motion == "waypoints":
            if not self.waypoints:
                raise ValueError("waypoint motion needs at least one waypoint")
            times = [w.t for w in self.waypoints]
            if times != sorted(set(times)):
                raise ValueError("waypoint frames must be strictly increasing")
        return self


class Occlusion(BaseModel):
    """Frames [start, end] of one actor hidden from the detector"""
    actor: int = Field(..., ge=0)
    start: int = Field(..., ge=0)
    end: int = Field(..., ge=0)


class Scenario(BaseModel):
    num_frames: int = Field(..., ge=1)
    width: int = Field(..., ge=1)
    height: int = Field(..., ge=1)
    num_classes: int = Field(..., ge=1)
    channels: Literal[1, 3] = 3
    actors: List[Actor] = []
    occlusions: List[Occlusion] = []
    camera_drift: Tuple[int, int] = Field(default=(0, 0), description="Global content shift per frame")
    video: str = ""


class NoiseParams(BaseModel):
    """Detector imperfections applied by the simulator"""
    p_miss: float = 0.0
    jitter_sigma: float = 0.0
    fp_rate: float = 0.0
    score_lo: float = 0.6
    score_hi: float = 0.95

    def validate_ranges(self) -> None:
        if not 0.0 <= self.p_miss <= 1.0:
            raise InputError(f"p_miss must be in [0, 1], got {self.p_miss}")
        if self.jitter_sigma < 0:
            raise InputError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if self.fp_rate < 0:
            raise InputError(f"fp_rate must be >= 0, got {self.fp_rate}")
        if not 0.0 <= self.score_lo <= self.score_hi <= 1.0:
            raise InputError(f"score range must satisfy 0 <= lo <= hi <= 1, got [{self.score_lo}, {self.score_hi}]")


class ScenarioFile(BaseModel):
    """The JSON document read by `simulate`, `sweep` and `bench`"""
    scenario: Scenario
    noise: NoiseParams = NoiseParams()
    seed: int = 0
