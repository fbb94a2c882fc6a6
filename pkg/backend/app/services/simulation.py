"""
Simulation Service
Synthetic scenarios: ground-truth tubes from motion models, textured frames,
noisy detection streams and keypoint heatmaps.

Every random draw comes from ``numpy.random.default_rng(seed)`` (PCG64) in a
fixed order, so outputs are reproducible from (scenario, noise, seed).
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.errors import ConstructionError, InputError, ParseError
from app.models.detection import Box, Detection, HeatmapSet
from app.models.frame import Frame
from app.models.ground_truth import GroundTruth, GroundTruthTube, VideoAnnotation
from app.schemas.scenario import Actor, NoiseParams, Scenario, ScenarioFile

logger = logging.getLogger(__name__)

# Background and actor textures are drawn in these grey-level bands
BACKGROUND_RANGE = (40.0, 200.0)
ACTOR_RANGE = (0.0, 255.0)


# =============================================================================
# SCENARIO FILES
# =============================================================================

def load_scenario_file(path: Union[str, Path]) -> ScenarioFile:
    file_path = Path(path)
    if not file_path.is_file():
        raise InputError(f"Scenario file not found: {file_path}")
    try:
        scenario_file = ScenarioFile.model_validate_json(file_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ParseError(f"{where}: {first['msg']}", path=str(file_path)) from e
    scenario_file.noise.validate_ranges()
    return scenario_file


# =============================================================================
# GROUND TRUTH
# =============================================================================

def actor_box(actor: Actor, t: int) -> Box:
    """Box of ``actor`` at frame ``t`` from its motion model"""
    w, h = actor.size
    if actor.motion == "waypoints":
        times = [wp.t for wp in actor.waypoints]
        x = float(np.interp(t, times, [wp.x for wp in actor.waypoints]))
        y = float(np.interp(t, times, [wp.y for wp in actor.waypoints]))
    else:
        dt = t - actor.start
        x = actor.origin[0] + actor.velocity[0] * dt
        y = actor.origin[1] + actor.velocity[1] * dt
    return Box(x, y, x + w, y + h)


def _validate_scenario(scenario: Scenario) -> None:
    for i, actor in enumerate(scenario.actors):
        if actor.label >= scenario.num_classes:
            raise ConstructionError(f"Actor {i} has class {actor.label}, scenario has {scenario.num_classes}")
        if actor.end >= scenario.num_frames:
            raise ConstructionError(f"Actor {i} ends at frame {actor.end}, scenario has {scenario.num_frames} frames")
    for occ in scenario.occlusions:
        if occ.actor >= len(scenario.actors):
            raise ConstructionError(f"Occlusion refers to unknown actor {occ.actor}")
        actor = scenario.actors[occ.actor]
        if occ.start > occ.end or occ.start < actor.start or occ.end > actor.end:
            raise ConstructionError(
                f"Occlusion [{occ.start}, {occ.end}] is outside actor {occ.actor}'s lifetime "
                f"[{actor.start}, {actor.end}]"
            )


def render_ground_truth(scenario: Scenario) -> GroundTruth:
    """
    Expand motion models into per-frame boxes, one tube per actor.

    Raises ConstructionError when a box leaves the frame or the scenario is
    inconsistent.
    """
    _validate_scenario(scenario)
    video = VideoAnnotation(num_frames=scenario.num_frames, width=scenario.width, height=scenario.height)
    for i, actor in enumerate(scenario.actors):
        boxes: Dict[int, Box] = {}
        for t in range(actor.start, actor.end + 1):
            box = actor_box(actor, t)
            if box.x1 < 0 or box.y1 < 0 or box.x2 > scenario.width or box.y2 > scenario.height:
                raise ConstructionError(
                    f"Actor {i} leaves the {scenario.width}x{scenario.height} frame at t={t}: {box.as_list()}"
                )
            boxes[t] = box
        occlusions = tuple((o.start, o.end) for o in scenario.occlusions if o.actor == i)
        video.tubes.append(GroundTruthTube(label=actor.label, boxes=boxes, video=scenario.video, occlusions=occlusions))
    return GroundTruth(num_classes=scenario.num_classes, videos={scenario.video: video})


# =============================================================================
# FRAMES
# =============================================================================

def _paste(canvas: np.ndarray, texture: np.ndarray, box: Box) -> None:
    """Copy the part of ``texture`` anchored at the box's rounded corner that falls inside ``canvas``"""
    height, width = canvas.shape[:2]
    x0, y0 = int(round(box.x1)), int(round(box.y1))
    x1 = min(x0 + texture.shape[1], width, int(round(box.x2)))
    y1 = min(y0 + texture.shape[0], height, int(round(box.y2)))
    if x1 <= max(x0, 0) or y1 <= max(y0, 0):
        return
    tx0, ty0 = max(0, -x0), max(0, -y0)
    canvas[max(y0, 0):y1, max(x0, 0):x1] = texture[ty0:ty0 + y1 - max(y0, 0), tx0:tx0 + x1 - max(x0, 0)]


def render_frames(scenario: Scenario, seed: int = 0) -> List[Frame]:
    """
    Textured frames: a static seeded background seen through a window that
    moves by ``camera_drift`` per frame, plus a seeded texture per actor
    pasted at its box. Occluded actors are not drawn.

    Content drifts so that frame t at (x, y) equals frame t-1 at
    (x - dx, y - dy).
    """
    gt = render_ground_truth(scenario)
    rng = np.random.default_rng(seed)
    T, W, H, C = scenario.num_frames, scenario.width, scenario.height, scenario.channels
    dx, dy = scenario.camera_drift
    span_x, span_y = abs(dx) * (T - 1), abs(dy) * (T - 1)

    background = np.floor(rng.uniform(*BACKGROUND_RANGE, size=(H + span_y, W + span_x, C)))
    textures = []
    for actor in scenario.actors:
        tw, th = max(1, math.ceil(actor.size[0])), max(1, math.ceil(actor.size[1]))
        textures.append(np.floor(rng.uniform(*ACTOR_RANGE, size=(th, tw, C))))

    base_x, base_y = max(0, dx) * (T - 1), max(0, dy) * (T - 1)
    tubes = gt.videos[scenario.video].tubes
    frames = []
    for t in range(T):
        ox, oy = base_x - t * dx, base_y - t * dy
        pixels = background[oy:oy + H, ox:ox + W].copy()
        for texture, tube in zip(textures, tubes):
            if t in tube.boxes and not tube.is_occluded(t):
                _paste(pixels, texture, tube.boxes[t])
        frames.append(Frame(index=t, pixels=pixels))
    return frames


# =============================================================================
# DETECTIONS
# =============================================================================

def _score_vector(rng: np.random.Generator, label: int, num_classes: int, noise: NoiseParams) -> Tuple[float, ...]:
    """Peak score for ``label``; every other class stays below min(peak, 1 - peak)"""
    peak = float(rng.uniform(noise.score_lo, noise.score_hi))
    others = rng.uniform(0.0, min(peak, 1.0 - peak), size=num_classes)
    others[label] = peak
    return tuple(float(s) for s in others)


def _sorted_box(coords: np.ndarray, width: float, height: float) -> Box:
    x1, x2 = sorted((float(coords[0]), float(coords[2])))
    y1, y2 = sorted((float(coords[1]), float(coords[3])))
    return Box(x1, y1, x2, y2).clamp(width, height)


def synth_detections(scenario: Scenario, noise: NoiseParams, seed: int = 0) -> Dict[int, List[Detection]]:
    """
    Noisy detector output for every frame of the scenario.

    Per frame, actors in order: one uniform draw decides a miss (occluded
    actors are always missed); surviving boxes get Gaussian corner jitter and
    a score vector peaked at the actor's class. A Poisson number of false
    positives with random geometry and class follows.
    """
    noise.validate_ranges()
    gt = render_ground_truth(scenario)
    tubes = gt.videos[scenario.video].tubes
    rng = np.random.default_rng(seed)
    W, H, C = scenario.width, scenario.height, scenario.num_classes

    frames: Dict[int, List[Detection]] = {}
    for t in range(scenario.num_frames):
        dets: List[Detection] = []
        for tube in tubes:
            if t not in tube.boxes:
                continue
            missed = rng.random() < noise.p_miss
            if missed or tube.is_occluded(t):
                continue
            coords = np.asarray(tube.boxes[t].as_list())
            if noise.jitter_sigma > 0:
                coords = coords + rng.normal(0.0, noise.jitter_sigma, size=4)
            dets.append(Detection(box=_sorted_box(coords, W, H), scores=_score_vector(rng, tube.label, C, noise), frame=t))

        for _ in range(int(rng.poisson(noise.fp_rate))):
            w = rng.uniform(W / 16.0, W / 4.0)
            h = rng.uniform(H / 16.0, H / 4.0)
            x = rng.uniform(0.0, W - w)
            y = rng.uniform(0.0, H - h)
            label = int(rng.integers(C))
            box = _sorted_box(np.array([x, y, x + w, y + h]), W, H)
            dets.append(Detection(box=box, scores=_score_vector(rng, label, C, noise), frame=t))
        frames[t] = dets

    total = sum(len(d) for d in frames.values())
    logger.info("Simulated %d detections over %d frames (seed=%d)", total, scenario.num_frames, seed)
    return frames


# =============================================================================
# HEATMAPS
# =============================================================================

def synth_heatmaps(
    detections: Sequence[Detection],
    num_classes: int,
    width: int,
    height: int,
    down_ratio: int = 4,
    frame: int = 0
) -> HeatmapSet:
    """
    Render detections as keypoint-detector maps.

    Each detection draws a Gaussian bump for its best class peaking at its
    score in the cell holding the box center; size and offset maps at that
    cell encode the box. Overlapping bumps keep the maximum.
    """
    grid_w, grid_h = -(-width // down_ratio), -(-height // down_ratio)
    center = np.zeros((grid_h, grid_w, num_classes))
    size = np.zeros((grid_h, grid_w, 2))
    offset = np.zeros((grid_h, grid_w, 2))
    ys, xs = np.mgrid[0:grid_h, 0:grid_w]
    max_offset = np.nextafter(1.0, 0.0)

    for det in detections:
        c = det.best_class
        score = det.scores[c]
        cx, cy = det.box.center
        gx, gy = cx / down_ratio, cy / down_ratio
        i = min(int(math.floor(gx)), grid_w - 1)
        j = min(int(math.floor(gy)), grid_h - 1)
        sigma = max(det.box.width, det.box.height) / down_ratio / 6.0 + 0.5
        bump = score * np.exp(-((xs - i) ** 2 + (ys - j) ** 2) / (2.0 * sigma ** 2))
        center[:, :, c] = np.maximum(center[:, :, c], bump)
        size[j, i] = (det.box.width, det.box.height)
        offset[j, i] = (min(max(gx - i, 0.0), max_offset), min(max(gy - j, 0.0), max_offset))

    return HeatmapSet(
        center=np.clip(center, 0.0, 1.0), size=size, offset=offset,
        down_ratio=down_ratio, width=width, height=height, frame=frame,
    )
