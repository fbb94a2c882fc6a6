"""
Report Schemas - Metric, timing and sweep reports
"""
from typing import Dict, List, Optional

from pydantic import BaseModel

# Column order of the v-mAP report
VIDEO_MAP_COLUMNS = ["0.2", "0.5", "0.75", "0.5:0.95"]


class MapReport(BaseModel):
    """f-mAP@0.5 and v-mAP at the standard thresholds"""
    frame_map: float
    video_map: Dict[str, float]
    classes: List[int]
    frame_ap_per_class: Dict[int, float] = {}
    video_ap_per_class: Dict[str, Dict[int, float]] = {}

    def to_tsv(self) -> str:
        header = "\t".join([f"v-mAP@{c}" for c in VIDEO_MAP_COLUMNS] + ["f-mAP@0.5"])
        values = [self.video_map[c] for c in VIDEO_MAP_COLUMNS] + [self.frame_map]
        return header + "\n" + "\t".join(f"{100.0 * v:.1f}" for v in values) + "\n"


class StageTiming(BaseModel):
    mean_ms: float
    p50_ms: float
    p95_ms: float


class TimingReport(BaseModel):
    """Per-stage latency of one temporal mode"""
    mode: str
    frames: int
    stages: Dict[str, StageTiming]
    overall: StageTiming
    fps: float


class BenchmarkReport(BaseModel):
    width: int
    height: int
    channels: int
    reports: List[TimingReport]

    def to_tsv(self) -> str:
        stage_names = ["temporal", "decode", "link"]
        lines = ["mode\t" + "\t".join(f"{s}_ms" for s in stage_names) + "\toverall_ms\tfps"]
        for r in self.reports:
            cells = [f"{r.stages[s].mean_ms:.3f}" for s in stage_names]
            lines.append(f"{r.mode}\t" + "\t".join(cells) + f"\t{r.overall.mean_ms:.3f}\t{r.fps:.1f}")
        return "\n".join(lines) + "\n"


class SweepRow(BaseModel):
    value: str
    video_map: Dict[str, float]
    frame_map: float
    num_tubes: int
    motion_contrast: Optional[float] = None


class SweepTable(BaseModel):
    param: str
    rows: List[SweepRow]

    def to_tsv(self) -> str:
        with_contrast = any(r.motion_contrast is not None for r in self.rows)
        header = [self.param] + [f"v-mAP@{c}" for c in VIDEO_MAP_COLUMNS] + ["f-mAP@0.5", "tubes"]
        if with_contrast:
            header.append("motion_contrast")
        lines = ["\t".join(header)]
        for r in self.rows:
            cells = [r.value] + [f"{100.0 * r.video_map[c]:.1f}" for c in VIDEO_MAP_COLUMNS]
            cells += [f"{100.0 * r.frame_map:.1f}", str(r.num_tubes)]
            if with_contrast:
                cells.append("" if r.motion_contrast is None else f"{r.motion_contrast:.4f}")
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"
