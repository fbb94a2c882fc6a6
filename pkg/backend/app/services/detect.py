"""
Detection Service
Keypoint heatmap decoding, box IoU and per-class non-maximum suppression.
"""
import logging
import re
import struct
from pathlib import Path
from typing import Iterator, List, Sequence, Union

import numpy as np

from app.core.config import DetectConfig
from app.core.errors import InputError, ParseError
from app.models.detection import Box, Detection, HeatmapSet

logger = logging.getLogger(__name__)

# grid_w, grid_h, N, R, W, H as u32-LE
HEATMAP_HEADER = struct.Struct("<6I")
HEATMAP_NAME_FORMAT = "{:06d}.bin"
HEATMAP_NAME_PATTERN = re.compile(r"^\d+\.bin$")


# =============================================================================
# GEOMETRY
# =============================================================================

def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 when the union is empty"""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


# =============================================================================
# HEATMAP DECODING
# =============================================================================

# (dy, dx) of the 8 neighbours; earlier-in-scan-order neighbours must be strictly lower
_EARLIER = [(-1, -1), (-1, 0), (-1, 1), (0, -1)]
_LATER = [(0, 1), (1, -1), (1, 0), (1, 1)]


def find_peaks(center: np.ndarray) -> np.ndarray:
    """
    Boolean mask of 3x3 local maxima per class.

    A cell is a peak when it exceeds every earlier neighbour in row-major scan
    order and is not exceeded by any later one, so on a plateau the first
    cell wins.
    """
    grid_h, grid_w, _ = center.shape
    padded = np.pad(center, ((1, 1), (1, 1), (0, 0)), mode="constant", constant_values=-np.inf)
    mask = np.ones(center.shape, dtype=bool)
    for dy, dx in _EARLIER:
        neighbour = padded[1 + dy:1 + dy + grid_h, 1 + dx:1 + dx + grid_w]
        mask &= center > neighbour
    for dy, dx in _LATER:
        neighbour = padded[1 + dy:1 + dy + grid_h, 1 + dx:1 + dx + grid_w]
        mask &= center >= neighbour
    return mask


def decode_heatmaps(
    heatmaps: HeatmapSet,
    max_per_class: int = 20,
    score_floor: float = 0.05,
    dense_scores: bool = False
) -> List[Detection]:
    """
    Turn center/size/offset maps into detections.

    Peak (i, j) gives center ((i + ox) * R, (j + oy) * R) and a box of the
    regressed size around it, clamped to the frame. Output is grouped by
    class; within a class peaks are ordered by score, ties by scan order.
    """
    if max_per_class < 1:
        raise InputError("max_per_class must be at least 1")
    center = heatmaps.center
    R = heatmaps.down_ratio
    peaks = find_peaks(center) & (center >= score_floor)

    detections: List[Detection] = []
    for c in range(heatmaps.num_classes):
        rows, cols = np.nonzero(peaks[:, :, c])  # row-major scan order
        if rows.size == 0:
            continue
        scores = center[rows, cols, c]
        order = np.argsort(-scores, kind="stable")[:max_per_class]
        for idx in order:
            j, i = int(rows[idx]), int(cols[idx])
            cx = (i + heatmaps.offset[j, i, 0]) * R
            cy = (j + heatmaps.offset[j, i, 1]) * R
            w, h = heatmaps.size[j, i, 0], heatmaps.size[j, i, 1]
            box = Box(
                float(cx - w / 2.0), float(cy - h / 2.0), float(cx + w / 2.0), float(cy + h / 2.0)
            ).clamp(heatmaps.width, heatmaps.height)
            if dense_scores:
                vector = tuple(float(s) for s in center[j, i, :])
            else:
                vector = tuple(float(scores[idx]) if k == c else 0.0 for k in range(heatmaps.num_classes))
            detections.append(Detection(box=box, scores=vector, frame=heatmaps.frame))
    return detections


def decode_with_config(heatmaps: HeatmapSet, config: DetectConfig) -> List[Detection]:
    return decode_heatmaps(
        heatmaps,
        max_per_class=config.max_per_class,
        score_floor=config.score_floor,
        dense_scores=config.dense_scores,
    )


# =============================================================================
# NON-MAXIMUM SUPPRESSION
# =============================================================================

def nms(
    detections: Sequence[Detection],
    class_id: int,
    iou_thresh: float,
    top_n: int
) -> List[Detection]:
    """
    Greedy per-class suppression.

    Keeps the best class score, drops every remaining detection overlapping
    it by more than ``iou_thresh``, and repeats. At most ``top_n`` survivors
    are returned in descending score; score ties keep input order.
    """
    if not 0.0 <= iou_thresh <= 1.0:
        raise InputError(f"iou_thresh must be in [0, 1], got {iou_thresh}")
    order = sorted(range(len(detections)), key=lambda i: -detections[i].scores[class_id])
    kept: List[Detection] = []
    suppressed = [False] * len(detections)
    for pos, i in enumerate(order):
        if suppressed[i]:
            continue
        kept.append(detections[i])
        if len(kept) >= top_n:
            break
        for j in order[pos + 1:]:
            if not suppressed[j] and iou(detections[i].box, detections[j].box) > iou_thresh:
                suppressed[j] = True
    return kept


def nms_all_classes(detections: Sequence[Detection], config: DetectConfig) -> List[Detection]:
    """
    Per-class NMS over each class's own detections (score > 0). A detection
    kept for several classes (dense scores) is returned once.
    """
    if not detections:
        return []
    kept: List[Detection] = []
    seen = set()
    for c in range(detections[0].num_classes):
        candidates = [d for d in detections if d.scores[c] > 0]
        for det in nms(candidates, c, config.nms_iou, config.top_n):
            if id(det) not in seen:
                seen.add(id(det))
                kept.append(det)
    return kept


def detect_frame(heatmaps: HeatmapSet, config: DetectConfig) -> List[Detection]:
    """Decode one frame's heatmaps, then suppress overlaps per class"""
    return nms_all_classes(decode_with_config(heatmaps, config), config)


# =============================================================================
# HEATMAP FILES
# =============================================================================

def read_heatmap_file(path: Union[str, Path], frame: int = 0) -> HeatmapSet:
    """Parse one binary heatmap file (u32 header, then f32 center/size/offset)"""
    if not Path(path).is_file():
        raise InputError(f"Heatmap file not found: {path}")
    data = Path(path).read_bytes()
    if len(data) < HEATMAP_HEADER.size:
        raise ParseError("Heatmap file is missing its header", path=str(path))
    grid_w, grid_h, num_classes, R, width, height = HEATMAP_HEADER.unpack_from(data)
    cells = grid_w * grid_h
    expected = HEATMAP_HEADER.size + 4 * cells * (num_classes + 4)
    if len(data) != expected:
        raise ParseError(f"Heatmap file has {len(data)} bytes, expected {expected}", path=str(path))

    values = np.frombuffer(data, dtype="<f4", offset=HEATMAP_HEADER.size).astype(np.float64)
    n_center = cells * num_classes
    center = values[:n_center].reshape(grid_h, grid_w, num_classes)
    size = values[n_center:n_center + 2 * cells].reshape(grid_h, grid_w, 2)
    offset = values[n_center + 2 * cells:].reshape(grid_h, grid_w, 2)
    # f32 rounding can push offsets just below 1 up to exactly 1
    offset = np.minimum(offset, np.nextafter(1.0, 0.0))
    return HeatmapSet(
        center=center, size=size, offset=offset,
        down_ratio=R, width=width, height=height, frame=frame,
    )


def write_heatmap_file(heatmaps: HeatmapSet, path: Union[str, Path]) -> None:
    header = HEATMAP_HEADER.pack(
        heatmaps.grid_w, heatmaps.grid_h, heatmaps.num_classes,
        heatmaps.down_ratio, heatmaps.width, heatmaps.height,
    )
    body = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes()
        for a in (heatmaps.center, heatmaps.size, heatmaps.offset)
    )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(header + body)


def list_heatmap_files(heatmap_dir: Union[str, Path]) -> List[Path]:
    """Numbered heatmap files (%06d.bin) in ascending frame order"""
    directory = Path(heatmap_dir)
    if not directory.is_dir():
        raise InputError(f"Heatmap directory not found: {directory}")
    files = [p for p in directory.iterdir() if p.is_file() and HEATMAP_NAME_PATTERN.match(p.name)]
    return sorted(files, key=lambda p: int(p.stem))


def iter_heatmap_dir(heatmap_dir: Union[str, Path]) -> Iterator[HeatmapSet]:
    """Heatmap sets of a directory; each frame index comes from its file name"""
    files = list_heatmap_files(heatmap_dir)
    if not files:
        raise InputError(f"No heatmap files found in {heatmap_dir}")
    for path in files:
        yield read_heatmap_file(path, frame=int(path.stem))
