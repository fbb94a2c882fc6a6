"""
Reference Oracles
Brute-force reimplementations of the linker, the evaluator, SSIM and heatmap
decoding. They use plain loops and share no code with the services they are
checked against; only the data models are common.
"""
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.core.config import EvalConfig, LinkerConfig
from app.core.errors import InputError
from app.models.detection import Box, Detection
from app.models.ground_truth import GroundTruth
from app.models.tube import ActionTube, TubeEntry


def _overlap(a: Box, b: Box) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def _argmax(values: Sequence[float]) -> int:
    best = 0
    for i in range(len(values)):
        if values[i] > values[best]:
            best = i
    return best


# =============================================================================
# LINKING
# =============================================================================

def _naive_nms(dets: List[Detection], c: int, thresh: float, top_n: int) -> List[Detection]:
    remaining = list(range(len(dets)))
    kept: List[Detection] = []
    while remaining and len(kept) < top_n:
        best = remaining[0]
        for i in remaining:
            if dets[i].scores[c] > dets[best].scores[c]:
                best = i
        kept.append(dets[best])
        remaining = [i for i in remaining if i != best and _overlap(dets[best].box, dets[i].box) <= thresh]
    return kept


def _relabel(tube: ActionTube, scores: Sequence[float]) -> None:
    if not tube.class_energy:
        tube.class_energy = [0.0 for _ in scores]
    for c in range(len(scores)):
        tube.class_energy[c] = tube.class_energy[c] + scores[c]
    tube.matched_count = tube.matched_count + 1
    tube.label = _argmax(tube.class_energy)
    tube.score = tube.class_energy[tube.label] / tube.matched_count


def _close(tube: ActionTube) -> ActionTube:
    while tube.entries[-1].extrapolated:
        tube.entries.pop()
    tube.tau = 0
    return tube


def oracle_link(frames: Mapping[int, Sequence[Detection]], config: LinkerConfig, video: str = "") -> List[ActionTube]:
    """Greedy online linking by exhaustive scan; returns all tubes ordered by id"""
    indices = list(frames.keys())
    for a, b in zip(indices, indices[1:]):
        if b <= a:
            raise InputError(f"Frame {b} arrived after frame {a}")
    if not indices:
        return []

    live: List[ActionTube] = []
    done: List[ActionTube] = []
    next_id = 0
    for t in range(indices[0], indices[-1] + 1):
        dets = list(frames.get(t, []))
        taken = [False for _ in dets]

        pending = list(live)
        kept: List[ActionTube] = []
        while pending:
            tube = pending[0]
            for other in pending:
                if other.score > tube.score or (other.score == tube.score and other.id < tube.id):
                    tube = other
            pending.remove(tube)

            c = tube.label
            match = -1
            s = 0.0
            for m in range(len(dets)):
                if not taken[m] and _overlap(dets[m].box, tube.entries[-1].box) >= config.lambda_ and s < dets[m].scores[c]:
                    match = m
                    s = dets[m].scores[c]

            if match >= 0:
                taken[match] = True
                tube.entries.append(TubeEntry(t, dets[match].box, False, dets[match].scores))
                tube.tau = 0
                _relabel(tube, dets[match].scores)
                kept.append(tube)
            elif config.extrapolate and tube.tau < config.k:
                prev = tube.entries[-1].box
                box = prev
                if config.box_pred and len(tube.entries) > 1:
                    prev2 = tube.entries[-2].box
                    x1 = prev.x1 + (prev.x1 - prev2.x1)
                    y1 = prev.y1 + (prev.y1 - prev2.y1)
                    x2 = prev.x2 + (prev.x2 - prev2.x2)
                    y2 = prev.y2 + (prev.y2 - prev2.y2)
                    if config.frame_width is not None and config.frame_height is not None:
                        x1 = min(max(x1, 0.0), config.frame_width)
                        x2 = min(max(x2, 0.0), config.frame_width)
                        y1 = min(max(y1, 0.0), config.frame_height)
                        y2 = min(max(y2, 0.0), config.frame_height)
                    if x1 <= x2 and y1 <= y2:
                        box = Box(x1, y1, x2, y2)
                tube.entries.append(TubeEntry(t, box, True, tube.entries[-1].scores))
                tube.tau = tube.tau + 1
                kept.append(tube)
            else:
                done.append(_close(tube))

        leftover = [dets[m] for m in range(len(dets)) if not taken[m]]
        num_classes = len(leftover[0].scores) if leftover else 0
        for c in range(num_classes):
            group = [d for d in leftover if _argmax(d.scores) == c]
            for det in _naive_nms(group, c, config.nms_iou, config.n):
                if det.scores[c] >= config.spawn_floor:
                    tube = ActionTube(id=next_id, video=video)
                    next_id += 1
                    tube.entries.append(TubeEntry(t, det.box, False, det.scores))
                    _relabel(tube, det.scores)
                    kept.append(tube)
        live = kept

    for tube in live:
        done.append(_close(tube))
    return sorted(done, key=lambda tb: tb.id)


# =============================================================================
# EVALUATION
# =============================================================================

def _integrate(is_tp: List[bool], num_positives: int) -> float:
    """Sum of recall steps times the best precision at or beyond each step"""
    if num_positives == 0:
        return 0.0
    precisions = []
    recalls = []
    hits = 0
    for n, hit in enumerate(is_tp, start=1):
        hits += 1 if hit else 0
        precisions.append(hits / n)
        recalls.append(hits / num_positives)
    ap = 0.0
    previous_recall = 0.0
    for i in range(len(recalls)):
        if recalls[i] > previous_recall:
            ap += (recalls[i] - previous_recall) * max(precisions[i:])
            previous_recall = recalls[i]
    return ap


def _greedy(ranked: List[Tuple[str, object]], targets: Dict[str, list], similarity, thresh: float) -> List[bool]:
    used = {key: [False] * len(items) for key, items in targets.items()}
    outcome = []
    for key, item in ranked:
        best, best_value = -1, -1.0
        for j, target in enumerate(targets.get(key, [])):
            if used[key][j]:
                continue
            value = similarity(item, target)
            if value >= thresh and value > best_value:
                best, best_value = j, value
        if best >= 0:
            used[key][best] = True
        outcome.append(best >= 0)
    return outcome


def oracle_ap(
    preds: Mapping[str, Mapping[int, Sequence[Detection]]],
    gt: GroundTruth,
    class_id: int,
    thresh: float = 0.5
) -> float:
    """Frame AP for one class by sort, match and direct integration"""
    pooled = []
    order = 0
    for video in sorted(preds):
        for t in sorted(preds[video]):
            for det in preds[video][t]:
                if det.scores[class_id] > 0:
                    pooled.append((det.scores[class_id], t, order, video, det.box))
                order += 1
    pooled.sort(key=lambda p: (-p[0], p[1], p[2]))

    targets: Dict[str, list] = {}
    total = 0
    for name in sorted(gt.videos):
        for tube in gt.videos[name].tubes:
            if tube.label == class_id:
                for t in sorted(tube.boxes):
                    targets.setdefault(f"{name}\0{t}", []).append(tube.boxes[t])
                    total += 1
    ranked = [(f"{video}\0{t}", box) for _, t, _, video, box in pooled]
    return _integrate(_greedy(ranked, targets, _overlap, thresh), total)


def oracle_tube_iou(a: Mapping[int, Box], b: Mapping[int, Box]) -> float:
    """Per-frame summation over the union of both frame ranges"""
    lo = min(min(a), min(b))
    hi = max(max(a), max(b))
    both = 0
    either = 0
    spatial = 0.0
    for t in range(lo, hi + 1):
        in_a = min(a) <= t <= max(a)
        in_b = min(b) <= t <= max(b)
        if in_a or in_b:
            either += 1
        if in_a and in_b:
            both += 1
            if t in a and t in b:
                spatial += _overlap(a[t], b[t])
    if both == 0:
        return 0.0
    return (both / either) * (spatial / both)


def oracle_video_ap(tubes: Sequence[ActionTube], gt: GroundTruth, class_id: int, thresh: float,
                    include_extrapolated: bool = True) -> float:
    candidates = []
    for tube in tubes:
        boxes = {e.t: e.box for e in tube.entries if include_extrapolated or not e.extrapolated}
        if tube.label == class_id and boxes:
            candidates.append((tube.score, tube.video, boxes))
    candidates.sort(key=lambda c: -c[0])
    targets: Dict[str, list] = {}
    total = 0
    for name in sorted(gt.videos):
        for tube in gt.videos[name].tubes:
            if tube.label == class_id:
                targets.setdefault(name, []).append(tube.boxes)
                total += 1
    ranked = [(video, boxes) for _, video, boxes in candidates]
    return _integrate(_greedy(ranked, targets, oracle_tube_iou, thresh), total)


def oracle_map_suite(
    preds: Mapping[str, Mapping[int, Sequence[Detection]]],
    tubes: Sequence[ActionTube],
    gt: GroundTruth,
    config: Optional[EvalConfig] = None
) -> Dict[str, float]:
    """Report entries keyed like the TSV columns"""
    config = config or EvalConfig()
    classes = sorted({tube.label for name in gt.videos for tube in gt.videos[name].tubes})
    if not classes:
        return {"f-mAP@0.5": 0.0, "v-mAP@0.2": 0.0, "v-mAP@0.5": 0.0, "v-mAP@0.75": 0.0, "v-mAP@0.5:0.95": 0.0}

    def mean(values: List[float]) -> float:
        return sum(values) / len(values)

    def video_map(thresh: float) -> float:
        return mean([oracle_video_ap(tubes, gt, c, thresh, config.include_extrapolated_tubes) for c in classes])

    sweep = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
    per_class_sweep = [
        mean([oracle_video_ap(tubes, gt, c, th, config.include_extrapolated_tubes) for th in sweep])
        for c in classes
    ]
    return {
        "f-mAP@0.5": mean([oracle_ap(preds, gt, c, config.iou_thresh) for c in classes]),
        "v-mAP@0.2": video_map(0.2),
        "v-mAP@0.5": video_map(0.5),
        "v-mAP@0.75": video_map(0.75),
        "v-mAP@0.5:0.95": mean(per_class_sweep),
    }


# =============================================================================
# IMAGING AND DECODING
# =============================================================================

def oracle_ssim(a: np.ndarray, b: np.ndarray, window: int, c1: float, c2: float) -> np.ndarray:
    """
    Per-pixel SSIM with explicit patch loops, edge-replicated borders and
    two-pass sample statistics. Inputs are (H, W, C) arrays.
    """
    height, width, channels = a.shape
    half = window // 2
    n = window * window
    out = np.zeros(a.shape)
    for ch in range(channels):
        for y in range(height):
            for x in range(width):
                pa = []
                pb = []
                for dy in range(-half, half + 1):
                    for dx in range(-half, half + 1):
                        yy = min(max(y + dy, 0), height - 1)
                        xx = min(max(x + dx, 0), width - 1)
                        pa.append(float(a[yy, xx, ch]))
                        pb.append(float(b[yy, xx, ch]))
                mu_a = sum(pa) / n
                mu_b = sum(pb) / n
                var_a = sum((v - mu_a) ** 2 for v in pa) / (n - 1)
                var_b = sum((v - mu_b) ** 2 for v in pb) / (n - 1)
                cov = sum((pa[i] - mu_a) * (pb[i] - mu_b) for i in range(n)) / (n - 1)
                value = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
                    (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
                )
                out[y, x, ch] = min(1.0, max(-1.0, value))
    return out


def oracle_decode(
    center: np.ndarray,
    size: np.ndarray,
    offset: np.ndarray,
    down_ratio: int,
    width: int,
    height: int,
    max_per_class: int = 20,
    score_floor: float = 0.05
) -> List[Tuple[int, Tuple[float, float, float, float], float]]:
    """(class, box, score) per decoded peak, grouped by class, best first"""
    grid_h, grid_w, num_classes = center.shape
    out = []
    for c in range(num_classes):
        peaks = []
        for j in range(grid_h):
            for i in range(grid_w):
                v = center[j, i, c]
                if v < score_floor:
                    continue
                is_peak = True
                for nj in range(j - 1, j + 2):
                    for ni in range(i - 1, i + 2):
                        if (nj, ni) == (j, i) or not (0 <= nj < grid_h and 0 <= ni < grid_w):
                            continue
                        earlier = nj < j or (nj == j and ni < i)
                        if (earlier and not v > center[nj, ni, c]) or (not earlier and v < center[nj, ni, c]):
                            is_peak = False
                if is_peak:
                    peaks.append((float(v), j, i))
        peaks.sort(key=lambda p: (-p[0], p[1], p[2]))
        for v, j, i in peaks[:max_per_class]:
            cx = (i + offset[j, i, 0]) * down_ratio
            cy = (j + offset[j, i, 1]) * down_ratio
            w, h = size[j, i, 0], size[j, i, 1]
            box = (
                min(max(float(cx - w / 2.0), 0.0), width),
                min(max(float(cy - h / 2.0), 0.0), height),
                min(max(float(cx + w / 2.0), 0.0), width),
                min(max(float(cy + h / 2.0), 0.0), height),
            )
            out.append((c, box, v))
    return out
