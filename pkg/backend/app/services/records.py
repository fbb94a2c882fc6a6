"""
Records Service
JSONL reading and writing for detections, tubes and ground truth, and the
conversions between file records and domain models.
"""
import logging
import sys
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from app.core.errors import InputError, ParseError, SchemaError
from app.models.detection import Box, Detection
from app.models.ground_truth import GroundTruth, GroundTruthTube, VideoAnnotation
from app.models.tube import ActionTube, TubeEntry
from app.schemas.detection import DetectionRecord, FrameDetectionsRecord
from app.schemas.tube import GroundTruthRecord, TubeFrameRecord, TubeRecord

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
RecordT = TypeVar("RecordT", bound=BaseModel)

FrameDetections = Dict[int, List[Detection]]


# =============================================================================
# GENERIC JSONL
# =============================================================================

def iter_jsonl(path: PathLike, model: Type[RecordT]) -> Iterator[Tuple[int, RecordT]]:
    """Yield (line number, record); blank lines are skipped"""
    file_path = Path(path)
    if not file_path.is_file():
        raise InputError(f"File not found: {file_path}")
    with open(file_path, "rb") as f:
        for line_number, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ParseError(
                    f"invalid UTF-8 byte 0x{raw[e.start]:02x} at column {e.start + 1}",
                    line_number=line_number,
                    path=str(file_path),
                ) from e
            if not line.strip():
                continue
            try:
                yield line_number, model.model_validate_json(line)
            except ValidationError as e:
                first = e.errors()[0]
                where = ".".join(str(p) for p in first["loc"])
                detail = f"{where}: {first['msg']}" if where else first["msg"]
                raise ParseError(detail, line_number=line_number, path=str(file_path)) from e


def write_jsonl(records: Iterable[BaseModel], path: Optional[PathLike] = None) -> int:
    """Write one record per line to ``path`` (stdout when None or '-')"""
    lines = [r.model_dump_json(by_alias=True, exclude_none=True) + "\n" for r in records]
    if path is None or str(path) == "-":
        sys.stdout.writelines(lines)
        sys.stdout.flush()
    else:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            f.writelines(lines)
    return len(lines)


# =============================================================================
# DETECTIONS
# =============================================================================

def detection_from_record(
    record: DetectionRecord,
    frame: int,
    num_classes: Optional[int] = None,
    line_number: Optional[int] = None
) -> Detection:
    if num_classes is not None and len(record.scores) != num_classes:
        raise SchemaError(
            f"score vector has {len(record.scores)} entries, expected {num_classes}",
            line_number=line_number,
        )
    return Detection(box=Box.from_sequence(record.box), scores=tuple(record.scores), frame=frame)


def detection_to_record(detection: Detection) -> DetectionRecord:
    return DetectionRecord(box=detection.box.as_list(), scores=list(detection.scores))


def frames_from_records(
    records: Iterable[Tuple[Optional[int], FrameDetectionsRecord]],
    num_classes: Optional[int] = None
) -> Tuple[Dict[str, FrameDetections], Optional[int]]:
    """
    Group frame records by video.

    Each video's mapping covers every index from its first to its last frame
    (missing frames map to empty lists). Class count is inferred from the first
    detection when not given.
    """
    by_video: Dict[str, Dict[int, List[Detection]]] = {}
    for line_number, record in records:
        frames = by_video.setdefault(record.video, {})
        if record.frame in frames:
            raise SchemaError(f"duplicate frame {record.frame} in video {record.video!r}", line_number=line_number)
        dets = []
        for det in record.dets:
            if num_classes is None:
                num_classes = len(det.scores)
            dets.append(detection_from_record(det, record.frame, num_classes, line_number))
        frames[record.frame] = dets

    result: Dict[str, FrameDetections] = {}
    for video in sorted(by_video):
        frames = by_video[video]
        filled: FrameDetections = OrderedDict()
        if frames:
            for t in range(min(frames), max(frames) + 1):
                filled[t] = frames.get(t, [])
        result[video] = filled
    return result, num_classes


def read_video_detections(
    path: PathLike,
    num_classes: Optional[int] = None
) -> Tuple[Dict[str, FrameDetections], Optional[int]]:
    """Detections JSONL grouped by video, plus the class count"""
    return frames_from_records(iter_jsonl(path, FrameDetectionsRecord), num_classes)


def read_detections(path: PathLike, num_classes: Optional[int] = None) -> FrameDetections:
    """
    Single-video detections JSONL as an ordered frame -> detections mapping.

    Raises ParseError (with line number) on malformed lines and SchemaError
    when a score vector does not have ``num_classes`` entries.
    """
    videos, _ = read_video_detections(path, num_classes)
    if len(videos) > 1:
        raise SchemaError(f"expected one video, found {len(videos)}: {sorted(videos)}")
    logger.debug("Read detections from %s", path)
    return next(iter(videos.values()), OrderedDict())


def frame_records(frames: Dict[int, Sequence[Detection]], video: str = "") -> List[FrameDetectionsRecord]:
    return [
        FrameDetectionsRecord(frame=t, dets=[detection_to_record(d) for d in frames[t]], video=video)
        for t in sorted(frames)
    ]


def write_detections(frames: Dict[int, Sequence[Detection]], path: Optional[PathLike] = None, video: str = "") -> int:
    return write_jsonl(frame_records(frames, video), path)


# =============================================================================
# TUBES
# =============================================================================

def tube_to_record(tube: ActionTube) -> TubeRecord:
    return TubeRecord(
        id=tube.id,
        class_id=tube.label,
        score=tube.score,
        video=tube.video,
        frames=[
            TubeFrameRecord(t=e.t, box=e.box.as_list(), extrapolated=e.extrapolated, scores=list(e.scores))
            for e in tube.entries
        ],
    )


def tube_from_record(record: TubeRecord) -> ActionTube:
    entries = [
        TubeEntry(t=f.t, box=Box.from_sequence(f.box), extrapolated=f.extrapolated, scores=tuple(f.scores or ()))
        for f in sorted(record.frames, key=lambda f: f.t)
    ]
    return ActionTube(
        id=record.id,
        label=record.class_id,
        score=record.score,
        entries=entries,
        matched_count=sum(1 for e in entries if not e.extrapolated),
        video=record.video,
    )


def write_tubes(tubes: Iterable[ActionTube], path: Optional[PathLike] = None) -> int:
    return write_jsonl((tube_to_record(t) for t in tubes), path)


def read_tubes(path: PathLike) -> List[ActionTube]:
    return [tube_from_record(record) for _, record in iter_jsonl(path, TubeRecord)]


def tube_class_count(tubes: Iterable[ActionTube]) -> int:
    """Smallest class count covering every tube label and stored score vector"""
    count = 0
    for tube in tubes:
        count = max(count, tube.label + 1, *(len(e.scores) for e in tube.entries))
    return count


# =============================================================================
# GROUND TRUTH
# =============================================================================

def ground_truth_from_records(
    records: Iterable[GroundTruthRecord],
    num_classes: Optional[int] = None,
    min_classes: int = 0
) -> GroundTruth:
    """
    Build the annotation set. Without an explicit ``num_classes`` the count is
    the larger of the highest ground-truth label + 1 and ``min_classes``, so
    predicted classes with no annotation still fit.
    """
    tubes = [
        GroundTruthTube(
            label=r.class_id,
            boxes={f.t: Box.from_sequence(f.box) for f in r.frames},
            video=r.video,
            occlusions=tuple((w[0], w[1]) for w in r.occlusions),
        )
        for r in records
    ]
    inferred = max((t.label for t in tubes), default=-1) + 1
    if num_classes is None:
        num_classes = max(inferred, min_classes)
    elif inferred > num_classes:
        raise SchemaError(f"ground truth uses class {inferred - 1} but the class count is {num_classes}")

    gt = GroundTruth(num_classes=num_classes)
    for tube in tubes:
        video = gt.videos.setdefault(tube.video, VideoAnnotation(num_frames=0))
        video.tubes.append(tube)
        video.num_frames = max(video.num_frames, tube.end + 1)
    return gt


def ground_truth_to_records(gt: GroundTruth) -> List[GroundTruthRecord]:
    records = []
    for name in sorted(gt.videos):
        for i, tube in enumerate(gt.videos[name].tubes):
            records.append(GroundTruthRecord(
                video=name,
                id=i,
                class_id=tube.label,
                frames=[TubeFrameRecord(t=t, box=tube.boxes[t].as_list()) for t in sorted(tube.boxes)],
                occlusions=[[s, e] for s, e in tube.occlusions],
            ))
    return records


def read_ground_truth(path: PathLike, num_classes: Optional[int] = None, min_classes: int = 0) -> GroundTruth:
    records = (r for _, r in iter_jsonl(path, GroundTruthRecord))
    return ground_truth_from_records(records, num_classes, min_classes)


def write_ground_truth(gt: GroundTruth, path: Optional[PathLike] = None) -> int:
    return write_jsonl(ground_truth_to_records(gt), path)
