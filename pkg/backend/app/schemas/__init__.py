from .detection import DetectionRecord, FrameDetectionsRecord
from .tube import GroundTruthRecord, TubeFrameRecord, TubeRecord
from .scenario import Actor, NoiseParams, Occlusion, Scenario, ScenarioFile, Waypoint
from .report import BenchmarkReport, MapReport, StageTiming, SweepRow, SweepTable, TimingReport

__all__ = [
    "DetectionRecord",
    "FrameDetectionsRecord",
    "GroundTruthRecord",
    "TubeFrameRecord",
    "TubeRecord",
    "Actor",
    "NoiseParams",
    "Occlusion",
    "Scenario",
    "ScenarioFile",
    "Waypoint",
    "BenchmarkReport",
    "MapReport",
    "StageTiming",
    "SweepRow",
    "SweepTable",
    "TimingReport",
]
