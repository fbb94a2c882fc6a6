"""
Tube Service
Online action-tube generation: greedy matching of frame detections to live
tubes, spawning, k-frame extrapolation, box prediction and label update.
"""
import logging
from typing import Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from app.core.config import LinkerConfig
from app.core.errors import InputError
from app.models.detection import Box, Detection
from app.models.tube import ActionTube, TubeEntry
from app.services.detect import iou, nms

logger = logging.getLogger(__name__)

DetectionStream = Union[Mapping[int, Sequence[Detection]], Iterable[Tuple[int, Sequence[Detection]]]]


# =============================================================================
# TUBE PRIMITIVES
# =============================================================================

def predict_bbox(
    b_prev: Box,
    b_prev2: Optional[Box],
    frame_width: Optional[float] = None,
    frame_height: Optional[float] = None
) -> Box:
    """
    Constant-velocity extrapolation of each corner: b_prev + (b_prev - b_prev2).

    The result is clamped to the frame when its size is known. Without a
    second box, or when the prediction is degenerate, ``b_prev`` is held.
    """
    if b_prev2 is None:
        return b_prev
    box = Box(
        b_prev.x1 + (b_prev.x1 - b_prev2.x1),
        b_prev.y1 + (b_prev.y1 - b_prev2.y1),
        b_prev.x2 + (b_prev.x2 - b_prev2.x2),
        b_prev.y2 + (b_prev.y2 - b_prev2.y2),
    )
    if frame_width is not None and frame_height is not None:
        box = box.clamp(frame_width, frame_height)
    if box.x1 > box.x2 or box.y1 > box.y2:
        return b_prev
    return box


def update_label(tube: ActionTube, det_scores: Sequence[float]) -> Tuple[float, int]:
    """
    Accumulate a matched detection's scores into the tube's class energy.

    The label becomes the argmax of the energy (lowest index on ties) and the
    score the mean matched score of that class.
    """
    if not tube.class_energy:
        tube.class_energy = [0.0] * len(det_scores)
    if len(det_scores) != len(tube.class_energy):
        raise InputError(
            f"Tube {tube.id} has {len(tube.class_energy)} classes, detection has {len(det_scores)}"
        )
    for c, s in enumerate(det_scores):
        tube.class_energy[c] += s
    tube.matched_count += 1

    label = 0
    for c in range(1, len(tube.class_energy)):
        if tube.class_energy[c] > tube.class_energy[label]:
            label = c
    tube.label = label
    tube.score = tube.class_energy[label] / tube.matched_count
    return tube.score, tube.label


def trim_extrapolated(tube: ActionTube) -> ActionTube:
    """Drop trailing extrapolated entries so the tube ends on a matched frame"""
    while tube.entries and tube.entries[-1].extrapolated:
        tube.entries.pop()
    tube.tau = 0
    return tube


# =============================================================================
# LINKER
# =============================================================================

class TubeLinker:
    """
    Sequential linking state machine for one video.

    Feed frames in ascending order through ``step``; frames skipped between
    two calls are processed as frames without detections.
    """

    def __init__(self, config: LinkerConfig, video: str = ""):
        self.config = config
        self.video = video
        self.live: List[ActionTube] = []
        self.finished: List[ActionTube] = []
        self.last_frame: Optional[int] = None
        self.num_classes: Optional[int] = None
        self._next_id = 0

    def _check_detections(self, t: int, detections: Sequence[Detection]) -> None:
        for det in detections:
            if det.frame != t:
                raise InputError(f"Detection for frame {det.frame} passed to step at frame {t}")
            if self.num_classes is None:
                self.num_classes = det.num_classes
            elif det.num_classes != self.num_classes:
                raise InputError(
                    f"Frame {t}: detection has {det.num_classes} class scores, expected {self.num_classes}"
                )

    def step(self, t: int, detections: Sequence[Detection]) -> List[ActionTube]:
        """
        Advance all live tubes to frame ``t`` and return the live set.

        Tubes are visited by descending score, then ascending id. Each takes
        the unassigned detection with the highest score for its class among
        those overlapping its last box by at least lambda; a consumed
        detection is unavailable to later tubes. Unmatched tubes extrapolate
        while fewer than k consecutive boxes were extrapolated, otherwise
        they terminate. Leftover detections spawn new tubes.
        """
        if self.last_frame is not None and t <= self.last_frame:
            raise InputError(f"Frame {t} arrived after frame {self.last_frame}")
        self._check_detections(t, detections)
        if self.last_frame is not None:
            for missing in range(self.last_frame + 1, t):
                self._advance(missing, [])
        self._advance(t, detections)
        return self.live

    def _advance(self, t: int, detections: Sequence[Detection]) -> None:
        cfg = self.config
        assigned = [False] * len(detections)
        survivors: List[ActionTube] = []
        terminated = 0

        for tube in sorted(self.live, key=lambda tb: (-tb.score, tb.id)):
            c = tube.label
            last_box = tube.last_box
            best: Optional[int] = None
            best_score = 0.0
            for i, det in enumerate(detections):
                if assigned[i]:
                    continue
                if iou(det.box, last_box) >= cfg.lambda_ and det.scores[c] > best_score:
                    best = i
                    best_score = det.scores[c]

            if best is not None:
                det = detections[best]
                assigned[best] = True
                tube.entries.append(TubeEntry(t=t, box=det.box, extrapolated=False, scores=det.scores))
                tube.tau = 0
                update_label(tube, det.scores)
                survivors.append(tube)
            elif cfg.extrapolate and tube.tau < cfg.k:
                if cfg.box_pred and len(tube.entries) >= 2:
                    box = predict_bbox(last_box, tube.entries[-2].box, cfg.frame_width, cfg.frame_height)
                else:
                    box = last_box
                tube.entries.append(TubeEntry(t=t, box=box, extrapolated=True, scores=tube.last_scores))
                tube.tau += 1
                survivors.append(tube)
            else:
                self.finished.append(trim_extrapolated(tube))
                terminated += 1

        unassigned = [d for i, d in enumerate(detections) if not assigned[i]]
        spawned = self.spawn(t, unassigned)
        self.live = sorted(survivors + spawned, key=lambda tb: tb.id)
        self.last_frame = t
        if spawned or terminated:
            logger.debug("Frame %d: %d spawned, %d terminated, %d live", t, len(spawned), terminated, len(self.live))

    def spawn(self, t: int, unassigned: Sequence[Detection]) -> List[ActionTube]:
        """
        Start tubes from detections no tube claimed.

        Detections are grouped by their best class; each group goes through
        greedy NMS keeping at most n, and survivors scoring at least the
        spawn floor open a tube. Ids increase in spawn order.
        """
        if not unassigned:
            return []
        cfg = self.config
        tubes: List[ActionTube] = []
        for c in range(unassigned[0].num_classes):
            group = [d for d in unassigned if d.best_class == c]
            if not group:
                continue
            for det in nms(group, c, cfg.nms_iou, cfg.n):
                if det.scores[c] < cfg.spawn_floor:
                    continue
                tube = ActionTube(id=self._next_id, video=self.video)
                self._next_id += 1
                tube.entries.append(TubeEntry(t=t, box=det.box, extrapolated=False, scores=det.scores))
                update_label(tube, det.scores)
                tubes.append(tube)
        return tubes

    def snapshot(self, trim: bool = True) -> List[ActionTube]:
        """Copies of every tube seen so far, ordered by id"""
        tubes = [tb.copy() for tb in self.finished + self.live]
        if trim:
            tubes = [trim_extrapolated(tb) for tb in tubes]
        return sorted(tubes, key=lambda tb: tb.id)

    def finalize(self) -> List[ActionTube]:
        """Terminate all live tubes and return every tube ordered by id"""
        for tube in self.live:
            self.finished.append(trim_extrapolated(tube))
        self.live = []
        return sorted(self.finished, key=lambda tb: tb.id)


# =============================================================================
# STREAMS
# =============================================================================

def _frames(source: DetectionStream) -> Iterable[Tuple[int, Sequence[Detection]]]:
    if isinstance(source, Mapping):
        return source.items()
    return source


def iter_stream(
    source: DetectionStream,
    config: LinkerConfig,
    video: str = ""
) -> Iterator[Tuple[int, List[ActionTube]]]:
    """Yield (frame, tube snapshot) after each frame; snapshots use frames <= t only"""
    linker = TubeLinker(config, video=video)
    for t, detections in _frames(source):
        linker.step(t, detections)
        yield t, linker.snapshot()


def run_stream(source: DetectionStream, config: LinkerConfig, video: str = "") -> List[ActionTube]:
    """Link a whole detection stream; returns all tubes, live and terminated"""
    linker = TubeLinker(config, video=video)
    frames = 0
    for t, detections in _frames(source):
        linker.step(t, detections)
        frames += 1
    tubes = linker.finalize()
    logger.info("Linked %d frames of video %r into %d tubes", frames, video, len(tubes))
    return tubes


def link_videos(videos: Mapping[str, DetectionStream], config: LinkerConfig) -> List[ActionTube]:
    """Independent linking per video; tubes are ordered by video then id"""
    tubes: List[ActionTube] = []
    for video in sorted(videos):
        tubes.extend(run_stream(videos[video], config, video=video))
    return tubes
