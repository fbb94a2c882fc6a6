"""
Frame I/O Service
Frame ingestion from numbered PNG directories or raw planar streams, and
PNG export of frames and temporal maps.
"""
import logging
import re
import struct
from pathlib import Path
from typing import BinaryIO, Iterator, List, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from app.core.errors import InputError, ParseError
from app.models.frame import Frame

logger = logging.getLogger(__name__)


# =============================================================================
# CONSTANTS
# =============================================================================

FRAME_NAME_PATTERN = re.compile(r"^(\d{6})\.png$")
FRAME_NAME_FORMAT = "{:06d}.png"

# width u32-LE, height u32-LE, channels u8
RAW_HEADER = struct.Struct("<IIB")


# =============================================================================
# HELPER FUNCTIONS
# =============================================================================

def frame_filename(index: int) -> str:
    """Numbered frame filename (%06d.png)"""
    return FRAME_NAME_FORMAT.format(index)


def list_frame_files(frames_dir: Union[str, Path]) -> List[Path]:
    """Numbered PNG files in ascending index order"""
    directory = Path(frames_dir)
    if not directory.is_dir():
        raise InputError(f"Frame directory not found: {directory}")
    files = [p for p in directory.iterdir() if p.is_file() and FRAME_NAME_PATTERN.match(p.name)]
    return sorted(files, key=lambda p: int(p.stem))


def _image_to_array(img: Image.Image) -> np.ndarray:
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.uint8)


# =============================================================================
# INGESTION
# =============================================================================

def read_frame_png(path: Union[str, Path], index: int) -> Frame:
    """Load one PNG; grayscale stays single-channel, everything else becomes RGB"""
    try:
        with Image.open(path) as img:
            img.load()
            pixels = _image_to_array(img)
    except (OSError, UnidentifiedImageError) as e:
        raise ParseError(f"Cannot read frame image: {e}", path=str(path)) from e
    return Frame(index=index, pixels=pixels)


def iter_frame_dir(frames_dir: Union[str, Path]) -> Iterator[Frame]:
    """Yield frames from a directory of %06d.png files"""
    files = list_frame_files(frames_dir)
    logger.info("Reading %d frames from %s", len(files), frames_dir)
    for path in files:
        yield read_frame_png(path, int(path.stem))


def iter_raw_stream(stream: BinaryIO) -> Iterator[Frame]:
    """
    Yield frames from a raw planar stream.

    Header: width u32-LE, height u32-LE, channels u8; then frames as
    channel-major bytes until end of stream.
    """
    header = stream.read(RAW_HEADER.size)
    if len(header) != RAW_HEADER.size:
        raise ParseError("Raw stream is missing its header")
    width, height, channels = RAW_HEADER.unpack(header)
    if width == 0 or height == 0 or channels not in (1, 3):
        raise ParseError(f"Invalid raw stream header: {width}x{height}x{channels}")

    frame_bytes = width * height * channels
    index = 0
    while True:
        chunk = stream.read(frame_bytes)
        if not chunk:
            return
        if len(chunk) != frame_bytes:
            raise ParseError(f"Truncated frame {index}: {len(chunk)} of {frame_bytes} bytes")
        planar = np.frombuffer(chunk, dtype=np.uint8).reshape(channels, height, width)
        yield Frame(index=index, pixels=np.transpose(planar, (1, 2, 0)))
        index += 1


def iter_frames(source: Union[str, Path]) -> Iterator[Frame]:
    """Frames from a PNG directory or a raw stream file"""
    path = Path(source)
    if path.is_dir():
        yield from iter_frame_dir(path)
        return
    if not path.is_file():
        raise InputError(f"Frame source not found: {path}")
    with open(path, "rb") as stream:
        yield from iter_raw_stream(stream)


def write_raw_stream(frames: List[Frame], stream: BinaryIO) -> None:
    """Inverse of iter_raw_stream; pixel values are rounded to 8 bits"""
    if not frames:
        raise InputError("No frames to write")
    first = frames[0]
    stream.write(RAW_HEADER.pack(first.width, first.height, first.channels))
    for frame in frames:
        if frame.shape != first.shape:
            raise InputError("All frames in a raw stream must share one shape")
        planar = np.transpose(_to_uint8(frame.pixels), (2, 0, 1))
        stream.write(np.ascontiguousarray(planar).tobytes())


# =============================================================================
# EXPORT
# =============================================================================

def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def _save_png(array: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if array.shape[2] == 1:
        Image.fromarray(np.ascontiguousarray(array[:, :, 0])).save(path, format="PNG")
    elif array.shape[2] == 3:
        Image.fromarray(np.ascontiguousarray(array)).save(path, format="PNG")
    else:
        # one grayscale file per channel
        for c in range(array.shape[2]):
            Image.fromarray(np.ascontiguousarray(array[:, :, c])).save(
                path.with_name(f"{path.stem}_c{c}{path.suffix}"), format="PNG"
            )


def write_frame_png(frame: Frame, path: Union[str, Path]) -> None:
    _save_png(_to_uint8(frame.pixels * (255.0 / frame.dynamic_range)), Path(path))


def map_to_uint8(values: np.ndarray) -> np.ndarray:
    """Linear [-1, 1] -> [0, 255] mapping used for map dumps"""
    return _to_uint8((np.asarray(values) + 1.0) * 127.5)


def write_map_png(values: np.ndarray, path: Union[str, Path]) -> None:
    """Debug dump of a temporal map (1 or 3 channels per file, else one file per channel)"""
    _save_png(map_to_uint8(values), Path(path))
