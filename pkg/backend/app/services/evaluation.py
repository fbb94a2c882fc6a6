"""
Evaluation Service
Frame-level and video-level mean average precision with spatio-temporal tube IoU.
"""
import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.config import EvalConfig
from app.core.errors import InputError
from app.models.detection import Box, Detection
from app.models.ground_truth import GroundTruth, GroundTruthTube, PRCurve, ScoredTube
from app.models.tube import ActionTube
from app.schemas.report import VIDEO_MAP_COLUMNS, MapReport
from app.services.detect import iou

logger = logging.getLogger(__name__)

# video -> frame -> detections
VideoPredictions = Mapping[str, Mapping[int, Sequence[Detection]]]
TubeLike = Union[ScoredTube, GroundTruthTube, Mapping[int, Box]]

VIDEO_THRESHOLDS = {"0.2": 0.2, "0.5": 0.5, "0.75": 0.75}
# 0.5:0.05:0.95
SWEEP_THRESHOLDS = [round(0.5 + 0.05 * i, 2) for i in range(10)]


# =============================================================================
# PRECISION / RECALL
# =============================================================================

def compute_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """All-point interpolated AP: area under the precision envelope"""
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    i = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))


def pr_curve(is_tp: Sequence[bool], num_positives: int) -> PRCurve:
    """Precision/recall over a ranked TP/FP sequence"""
    if num_positives == 0 or not len(is_tp):
        return PRCurve(points=[], ap=0.0, num_positives=num_positives)
    flags = np.asarray(is_tp, dtype=bool)
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recall = tp / float(num_positives)
    precision = tp / (tp + fp)
    return PRCurve(
        points=list(zip(recall.tolist(), precision.tolist())),
        ap=compute_ap(recall, precision),
        num_positives=num_positives,
    )


# =============================================================================
# FRAME LEVEL
# =============================================================================

def _normalize_predictions(preds: Union[VideoPredictions, Mapping[int, Sequence[Detection]]]) -> VideoPredictions:
    """Accept a bare frame mapping as the single unnamed video"""
    if preds and all(isinstance(k, int) for k in preds):
        return {"": preds}  # type: ignore[dict-item]
    return preds  # type: ignore[return-value]


def frame_ap(
    preds: Union[VideoPredictions, Mapping[int, Sequence[Detection]]],
    gt: GroundTruth,
    class_id: int,
    iou_thresh: float = 0.5
) -> PRCurve:
    """
    Per-class frame AP.

    Class-c detections (score > 0 for c) are pooled over all frames and
    videos and ranked by score, then frame, then input order. Each is a true
    positive when its best-IoU unmatched ground-truth box in the same frame
    reaches ``iou_thresh``.
    """
    gt.check_class(class_id)
    if not 0.0 < iou_thresh <= 1.0:
        raise InputError(f"iou_thresh must be in (0, 1], got {iou_thresh}")
    videos = _normalize_predictions(preds)

    gt_boxes: Dict[Tuple[str, int], List[Box]] = {}
    num_positives = 0
    for tube in gt.tubes():
        if tube.label != class_id:
            continue
        for t, box in tube.boxes.items():
            gt_boxes.setdefault((tube.video, t), []).append(box)
            num_positives += 1

    pooled: List[Tuple[float, int, int, str, Box]] = []
    for video in sorted(videos):
        frames = videos[video]
        for t in sorted(frames):
            for det in frames[t]:
                s = det.scores[class_id]
                if s > 0:
                    pooled.append((s, t, len(pooled), video, det.box))
    pooled.sort(key=lambda p: (-p[0], p[1], p[2]))

    used = {key: [False] * len(boxes) for key, boxes in gt_boxes.items()}
    is_tp: List[bool] = []
    for _, t, _, video, box in pooled:
        candidates = gt_boxes.get((video, t), [])
        flags = used.get((video, t), [])
        best, best_iou = -1, iou_thresh
        for j, gt_box in enumerate(candidates):
            if flags[j]:
                continue
            overlap = iou(box, gt_box)
            if overlap >= best_iou and (best < 0 or overlap > best_iou):
                best, best_iou = j, overlap
        if best >= 0:
            flags[best] = True
        is_tp.append(best >= 0)
    return pr_curve(is_tp, num_positives)


# =============================================================================
# VIDEO LEVEL
# =============================================================================

def _boxes_of(tube: TubeLike) -> Mapping[int, Box]:
    if isinstance(tube, (ScoredTube, GroundTruthTube)):
        return tube.boxes
    return tube


def tube_iou(a: TubeLike, b: TubeLike) -> float:
    """
    Spatio-temporal overlap: temporal IoU of the inclusive frame ranges times
    the mean box IoU over the frames both ranges cover. A frame missing from
    either tube inside that intersection contributes 0.
    """
    boxes_a, boxes_b = _boxes_of(a), _boxes_of(b)
    if not boxes_a or not boxes_b:
        return 0.0
    start_a, end_a = min(boxes_a), max(boxes_a)
    start_b, end_b = min(boxes_b), max(boxes_b)
    inter_start, inter_end = max(start_a, start_b), min(end_a, end_b)
    if inter_end < inter_start:
        return 0.0
    temporal = (inter_end - inter_start + 1) / (max(end_a, end_b) - min(start_a, start_b) + 1)

    total = 0.0
    for t in range(inter_start, inter_end + 1):
        box_a, box_b = boxes_a.get(t), boxes_b.get(t)
        if box_a is not None and box_b is not None:
            total += iou(box_a, box_b)
    spatial = total / (inter_end - inter_start + 1)
    return temporal * spatial


def video_ap(
    pred_tubes: Sequence[ScoredTube],
    gt: GroundTruth,
    class_id: int,
    st_iou_thresh: float
) -> PRCurve:
    """
    Per-class video AP: class-c tubes ranked by score (ties keep input order)
    are greedily matched to the unmatched same-video ground-truth tube with
    the highest tube IoU at or above the threshold.
    """
    gt.check_class(class_id)
    if not 0.0 < st_iou_thresh <= 1.0:
        raise InputError(f"st_iou_thresh must be in (0, 1], got {st_iou_thresh}")

    gt_tubes: Dict[str, List[GroundTruthTube]] = {}
    num_positives = 0
    for tube in gt.tubes():
        if tube.label == class_id:
            gt_tubes.setdefault(tube.video, []).append(tube)
            num_positives += 1

    ranked = sorted(
        (p for p in pred_tubes if p.label == class_id),
        key=lambda p: -p.score,
    )
    used = {video: [False] * len(tubes) for video, tubes in gt_tubes.items()}
    is_tp: List[bool] = []
    for pred in ranked:
        candidates = gt_tubes.get(pred.video, [])
        flags = used.get(pred.video, [])
        best, best_iou = -1, st_iou_thresh
        for j, gt_tube in enumerate(candidates):
            if flags[j]:
                continue
            overlap = tube_iou(pred, gt_tube)
            if overlap >= best_iou and (best < 0 or overlap > best_iou):
                best, best_iou = j, overlap
        if best >= 0:
            flags[best] = True
        is_tp.append(best >= 0)
    return pr_curve(is_tp, num_positives)


# =============================================================================
# CONVERSIONS
# =============================================================================

def scored_tubes(tubes: Iterable[ActionTube], include_extrapolated: bool = True) -> List[ScoredTube]:
    """Reduce linker tubes to evaluator tubes; tubes left without boxes are dropped"""
    result = []
    for tube in tubes:
        boxes = tube.boxes(include_extrapolated=include_extrapolated)
        if boxes:
            result.append(ScoredTube(label=tube.label, score=tube.score, boxes=boxes, video=tube.video))
    return result


def tube_frame_detections(
    tubes: Iterable[ActionTube],
    num_classes: int,
    include_extrapolated: bool = False
) -> Dict[str, Dict[int, List[Detection]]]:
    """
    Per-frame detections carried by tubes.

    Entries without a stored score vector get the tube score at the tube's label.
    """
    videos: Dict[str, Dict[int, List[Detection]]] = {}
    for tube in sorted(tubes, key=lambda tb: (tb.video, tb.id)):
        frames = videos.setdefault(tube.video, {})
        for entry in tube.entries:
            if entry.extrapolated and not include_extrapolated:
                continue
            scores = entry.scores
            if not scores:
                vector = [0.0] * num_classes
                vector[tube.label] = tube.score
                scores = tuple(vector)
            frames.setdefault(entry.t, []).append(Detection(box=entry.box, scores=scores, frame=entry.t))
    return videos


# =============================================================================
# REPORT
# =============================================================================

def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def map_suite(
    preds: Optional[Union[VideoPredictions, Mapping[int, Sequence[Detection]]]],
    tubes: Sequence[ActionTube],
    gt: GroundTruth,
    config: Optional[EvalConfig] = None
) -> MapReport:
    """
    f-mAP at the configured IoU and v-mAP at 0.2, 0.5, 0.75 and averaged over
    0.5:0.05:0.95; each is the unweighted mean over classes present in the
    ground truth. Frame predictions default to the tubes' own boxes.
    """
    config = config or EvalConfig()
    for tube in tubes:
        gt.check_class(tube.label)
    if preds is None:
        preds = tube_frame_detections(tubes, gt.num_classes, config.include_extrapolated_frames)
    for frames in _normalize_predictions(preds).values():
        for dets in frames.values():
            for det in dets:
                if det.num_classes != gt.num_classes:
                    raise InputError(
                        f"Detection at frame {det.frame} has {det.num_classes} scores, "
                        f"ground truth has {gt.num_classes} classes"
                    )

    classes = gt.classes_present()
    pred_tubes = scored_tubes(tubes, config.include_extrapolated_tubes)

    frame_aps = {c: frame_ap(preds, gt, c, config.iou_thresh).ap for c in classes}

    video_aps: Dict[str, Dict[int, float]] = {}
    for label, thresh in VIDEO_THRESHOLDS.items():
        video_aps[label] = {c: video_ap(pred_tubes, gt, c, thresh).ap for c in classes}
    swept = {c: _mean([video_ap(pred_tubes, gt, c, th).ap for th in SWEEP_THRESHOLDS]) for c in classes}
    video_aps["0.5:0.95"] = swept

    report = MapReport(
        frame_map=_mean(list(frame_aps.values())),
        video_map={col: _mean(list(video_aps[col].values())) for col in VIDEO_MAP_COLUMNS},
        classes=classes,
        frame_ap_per_class=frame_aps,
        video_ap_per_class=video_aps,
    )
    logger.info(
        "f-mAP@%.2f=%.4f v-mAP@0.5=%.4f over %d classes",
        config.iou_thresh, report.frame_map, report.video_map["0.5"], len(classes),
    )
    return report
