"""
Sweep Service
Ablation harness: rerun the simulated pipeline once per parameter value and
tabulate v-mAP / f-mAP.
"""
import logging
from typing import Any, Dict, List, Sequence

import numpy as np

from app.core.config import PipelineConfig, SsimParams, build_pipeline_config
from app.core.errors import InputError
from app.schemas.report import SweepRow, SweepTable
from app.schemas.scenario import ScenarioFile
from app.services.evaluation import map_suite
from app.services.imaging import ssim_map
from app.services.simulation import render_frames, render_ground_truth, synth_detections
from app.services.tubes import run_stream

logger = logging.getLogger(__name__)

# sweep parameter -> (config section, key)
SWEEP_PARAMS: Dict[str, tuple] = {
    "lambda": ("link", "lambda"),
    "k": ("link", "k"),
    "explt": ("link", "explt"),
    "boxp": ("link", "boxp"),
    "frame_gap": ("temporal", "frame_gap"),
}

_TRUE = {"1", "true", "on", "yes"}
_FALSE = {"0", "false", "off", "no"}


# =============================================================================
# VALUE PARSING
# =============================================================================

def _parse_one(param: str, token: str) -> Any:
    token = token.strip().lower()
    try:
        if param in ("explt", "boxp"):
            if token in _TRUE:
                return True
            if token in _FALSE:
                return False
            raise ValueError(token)
        if param == "lambda":
            return float(token)
        return int(token)
    except ValueError:
        raise InputError(f"Invalid value {token!r} for sweep parameter {param}")


def parse_values(param: str, text: str) -> List[Any]:
    """
    Values from a comma list (``0.1,0.3``) or, for integer parameters, an
    inclusive range (``0:8``).
    """
    if param not in SWEEP_PARAMS:
        raise InputError(f"Unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    values: List[Any] = []
    for token in (t for t in text.split(",") if t.strip()):
        if ":" in token and param in ("k", "frame_gap"):
            lo, hi = (_parse_one(param, part) for part in token.split(":", 1))
            values.extend(range(lo, hi + 1))
        else:
            values.append(_parse_one(param, token))
    if not values:
        raise InputError(f"Empty range for sweep parameter {param}")
    return values


def _label(value: Any) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    return str(value)


# =============================================================================
# MOTION CONTRAST
# =============================================================================

def motion_contrast(scenario_file: ScenarioFile, frame_gap: int, ssim: SsimParams) -> float:
    """
    Mean structural dissimilarity inside actor boxes minus the background
    mean, between each rendered frame and the frame ``frame_gap`` earlier.
    """
    scenario = scenario_file.scenario
    frames = render_frames(scenario, scenario_file.seed)
    tubes = render_ground_truth(scenario).videos[scenario.video].tubes
    contrasts = []
    for t in range(frame_gap, len(frames)):
        dsim = ((1.0 - ssim_map(frames[t], frames[t - frame_gap], ssim).values) / 2.0).mean(axis=2)
        mask = np.zeros(dsim.shape, dtype=bool)
        for tube in tubes:
            box = tube.boxes.get(t)
            if box is not None and not tube.is_occluded(t):
                mask[int(box.y1):int(np.ceil(box.y2)), int(box.x1):int(np.ceil(box.x2))] = True
        if mask.any() and (~mask).any():
            contrasts.append(float(dsim[mask].mean() - dsim[~mask].mean()))
    return float(np.mean(contrasts)) if contrasts else 0.0


# =============================================================================
# SWEEP
# =============================================================================

def run_point(scenario_file: ScenarioFile, config: PipelineConfig, param: str, value: Any) -> SweepRow:
    """One table row: simulate, link and evaluate with ``param`` set to ``value``"""
    section, key = SWEEP_PARAMS[param]
    sections = config.model_dump(by_alias=True)
    sections[section][key] = value
    point_config = build_pipeline_config(sections)

    gt = render_ground_truth(scenario_file.scenario)
    detections = synth_detections(scenario_file.scenario, scenario_file.noise, scenario_file.seed)
    tubes = run_stream(detections, point_config.link, video=scenario_file.scenario.video)
    report = map_suite({scenario_file.scenario.video: detections}, tubes, gt, point_config.evaluation)

    contrast = None
    if param == "frame_gap":
        contrast = motion_contrast(scenario_file, point_config.temporal.frame_gap, point_config.ssim)
    return SweepRow(
        value=_label(value),
        video_map=report.video_map,
        frame_map=report.frame_map,
        num_tubes=len(tubes),
        motion_contrast=contrast,
    )


def run_sweep(scenario_file: ScenarioFile, config: PipelineConfig, param: str, values: Sequence[Any]) -> SweepTable:
    if param not in SWEEP_PARAMS:
        raise InputError(f"Unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    if not values:
        raise InputError(f"Empty range for sweep parameter {param}")
    rows = []
    for value in values:
        row = run_point(scenario_file, config, param, value)
        logger.info("%s=%s: v-mAP@0.5=%.4f tubes=%d", param, row.value, row.video_map["0.5"], row.num_tubes)
        rows.append(row)
    return SweepTable(param=param, rows=rows)
