"""
Frame Models - Video frames, shift directions and temporal maps
"""
from dataclasses import dataclass, field
from typing import ClassVar, Tuple

import numpy as np

from app.core.errors import InputError


@dataclass(frozen=True)
class ShiftDirection:
    """A one-pixel translation; (0, 0) is the unshifted candidate"""

    dx: int
    dy: int

    IDENTITY: ClassVar["ShiftDirection"]
    CANDIDATES: ClassVar[Tuple["ShiftDirection", ...]]

    def __post_init__(self) -> None:
        if self.dx not in (-1, 0, 1) or self.dy not in (-1, 0, 1):
            raise InputError(f"Shift components must be in {{-1, 0, 1}}, got ({self.dx}, {self.dy})")

    @property
    def is_identity(self) -> bool:
        return self.dx == 0 and self.dy == 0

    def as_list(self) -> list:
        return [self.dx, self.dy]


ShiftDirection.IDENTITY = ShiftDirection(0, 0)
# Identity first, then scan order (dy, dx) ascending; this order is the tie-break rule
ShiftDirection.CANDIDATES = (ShiftDirection.IDENTITY,) + tuple(
    ShiftDirection(dx, dy)
    for dy in (-1, 0, 1)
    for dx in (-1, 0, 1)
    if (dx, dy) != (0, 0)
)


@dataclass(frozen=True, eq=False)
class Frame:
    """
    One video image.

    ``pixels`` is a float64 array of shape (height, width, channels) with
    values in [0, dynamic_range]. Integer input is widened on construction.
    """

    index: int
    pixels: np.ndarray
    dynamic_range: float = 255.0

    def __post_init__(self) -> None:
        if self.index < 0:
            raise InputError(f"Frame index must be non-negative, got {self.index}")
        pixels = np.asarray(self.pixels)
        if pixels.ndim == 2:
            pixels = pixels[:, :, np.newaxis]
        if pixels.ndim != 3:
            raise InputError(f"Frame pixels must be (H, W, C), got shape {pixels.shape}")
        height, width, channels = pixels.shape
        if width <= 0 or height <= 0:
            raise InputError("Frame must have positive width and height")
        if channels not in (1, 3):
            raise InputError(f"Frame must have 1 or 3 channels, got {channels}")
        pixels = pixels.astype(np.float64, copy=pixels.dtype != np.float64)
        if pixels.min() < 0 or pixels.max() > self.dynamic_range:
            raise InputError(f"Frame {self.index} has pixel values outside [0, {self.dynamic_range}]")
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.pixels.shape

    def with_pixels(self, pixels: np.ndarray) -> "Frame":
        """Same index and range, new content (pixels are trusted to be valid)"""
        frame = object.__new__(Frame)
        object.__setattr__(frame, "index", self.index)
        object.__setattr__(frame, "pixels", pixels)
        object.__setattr__(frame, "dynamic_range", self.dynamic_range)
        return frame


@dataclass(frozen=True, eq=False)
class TemporalMap:
    """Per-pixel, per-channel similarity map; kind is 'ssim' or 'dsim'"""

    values: np.ndarray
    kind: str = "ssim"

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class CascadedInput:
    """Network input: image channels first, temporal channels second"""

    index: int
    data: np.ndarray
    image_channels: int
    direction: ShiftDirection = ShiftDirection.IDENTITY
    mode: str = "ssmap"
    past_index: int = field(default=-1)

    @property
    def temporal(self) -> np.ndarray:
        return self.data[:, :, self.image_channels:]

    @property
    def image(self) -> np.ndarray:
        return self.data[:, :, :self.image_channels]
