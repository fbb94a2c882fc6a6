"""
Benchmark Service
Per-stage latency of the online pipeline: temporal extraction, heatmap
decoding and tube generation, for each temporal representation.

Frames and heatmaps are prepared before timing starts, so file I/O is never
measured.
"""
import dataclasses
import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import PipelineConfig, TemporalMode
from app.core.errors import InputError
from app.models.detection import HeatmapSet
from app.models.frame import Frame
from app.schemas.report import BenchmarkReport, StageTiming, TimingReport
from app.schemas.scenario import ScenarioFile
from app.services.detect import detect_frame
from app.services.imaging import TemporalPreprocessor
from app.services.simulation import render_frames, synth_detections, synth_heatmaps
from app.services.tubes import TubeLinker

logger = logging.getLogger(__name__)

STAGES = ("temporal", "decode", "link")
ALL_MODES: Sequence[str] = ("ssmap", "dsim", "raw_prev", "none")


def _stage_timing(samples_ms: np.ndarray) -> StageTiming:
    return StageTiming(
        mean_ms=float(np.mean(samples_ms)),
        p50_ms=float(np.percentile(samples_ms, 50)),
        p95_ms=float(np.percentile(samples_ms, 95)),
    )


def scenario_inputs(scenario_file: ScenarioFile, down_ratio: int = 4) -> Tuple[List[Frame], List[HeatmapSet]]:
    """Rendered frames and heatmaps synthesized from the simulated detections"""
    scenario = scenario_file.scenario
    frames = render_frames(scenario, scenario_file.seed)
    detections = synth_detections(scenario, scenario_file.noise, scenario_file.seed)
    heatmaps = [
        synth_heatmaps(detections[t], scenario.num_classes, scenario.width, scenario.height, down_ratio, frame=t)
        for t in range(scenario.num_frames)
    ]
    return frames, heatmaps


def empty_heatmaps(frames: Sequence[Frame], num_classes: int = 1, down_ratio: int = 4) -> List[HeatmapSet]:
    """Peak-free heatmaps for benchmarking a plain frame directory"""
    return [synth_heatmaps([], num_classes, f.width, f.height, down_ratio, frame=f.index) for f in frames]


def time_mode(
    mode: TemporalMode,
    frames: Sequence[Frame],
    heatmaps: Sequence[HeatmapSet],
    config: PipelineConfig,
    num_frames: int = 500,
    warmup: int = 20
) -> TimingReport:
    """
    Run ``warmup`` untimed then ``num_frames`` timed frames, cycling through
    the inputs. Mode ``none`` has no temporal stage and records 0 ms for it.
    """
    if not frames or len(frames) != len(heatmaps):
        raise InputError("Benchmark needs one heatmap set per frame")
    temporal_config = config.temporal.model_copy(update={"mode": mode})
    preprocessor = TemporalPreprocessor(config.ssim, temporal_config)
    linker = TubeLinker(config.link)
    samples = {stage: np.zeros(num_frames) for stage in STAGES}

    for i in range(warmup + num_frames):
        source = i % len(frames)
        frame = dataclasses.replace(frames[source], index=i)
        heatmap = dataclasses.replace(heatmaps[source], frame=i)

        t0 = time.perf_counter()
        if mode != "none":
            preprocessor.push(frame)
        t1 = time.perf_counter()
        detections = detect_frame(heatmap, config.detect)
        t2 = time.perf_counter()
        linker.step(i, detections)
        t3 = time.perf_counter()

        if i >= warmup:
            j = i - warmup
            samples["temporal"][j] = (t1 - t0) * 1000.0 if mode != "none" else 0.0
            samples["decode"][j] = (t2 - t1) * 1000.0
            samples["link"][j] = (t3 - t2) * 1000.0

    overall = samples["temporal"] + samples["decode"] + samples["link"]
    report = TimingReport(
        mode=mode,
        frames=num_frames,
        stages={stage: _stage_timing(samples[stage]) for stage in STAGES},
        overall=_stage_timing(overall),
        fps=1000.0 / float(np.mean(overall)) if np.mean(overall) > 0 else float("inf"),
    )
    logger.info("Mode %s: %.3f ms/frame (%.1f FPS)", mode, report.overall.mean_ms, report.fps)
    return report


def run_benchmark(
    frames: Sequence[Frame],
    heatmaps: Sequence[HeatmapSet],
    config: PipelineConfig,
    modes: Optional[Sequence[str]] = None,
    num_frames: int = 500,
    warmup: int = 20
) -> BenchmarkReport:
    modes = list(modes or ALL_MODES)
    for mode in modes:
        if mode not in ALL_MODES:
            raise InputError(f"Unknown temporal mode: {mode}")
    if num_frames < 1:
        raise InputError("Benchmark needs at least one timed frame")
    reports: List[TimingReport] = [
        time_mode(mode, frames, heatmaps, config, num_frames, warmup) for mode in modes  # type: ignore[arg-type]
    ]
    first = frames[0]
    return BenchmarkReport(width=first.width, height=first.height, channels=first.channels, reports=reports)

