"""
Imaging Service
Temporal-information representation: one-pixel shift candidates, SSIM and
DSIM maps, candidate selection and the cascaded network input.

Patch statistics use uniform windows with edge replication, so maps have the
same geometry as the frames they come from.
"""
import logging
from collections import deque
from typing import Deque, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.ndimage import uniform_filter

from app.core.config import SsimParams, TemporalConfig
from app.core.errors import InputError
from app.models.frame import CascadedInput, Frame, ShiftDirection, TemporalMap

logger = logging.getLogger(__name__)


# =============================================================================
# SHIFTING
# =============================================================================

def shift_frame(frame: Frame, direction: ShiftDirection) -> Frame:
    """
    Translate a frame by one pixel.

    Output pixel (x, y) is input pixel (x - dx, y - dy); sources outside the
    frame are replaced by the nearest edge pixel.
    """
    if direction.is_identity:
        return frame
    rows = np.clip(np.arange(frame.height) - direction.dy, 0, frame.height - 1)
    cols = np.clip(np.arange(frame.width) - direction.dx, 0, frame.width - 1)
    return frame.with_pixels(frame.pixels[rows][:, cols])


# =============================================================================
# SSIM MAPS
# =============================================================================

def _check_pair(a: Frame, b: Frame) -> None:
    if a.shape != b.shape:
        raise InputError(f"Frame shapes differ: {a.shape} vs {b.shape}")


def _window_mean(values: np.ndarray, window: int) -> np.ndarray:
    # channels are filtered independently
    return uniform_filter(values, size=(window, window, 1), mode="nearest")


class _PatchStats:
    """Windowed mean and mean-of-squares of one frame"""

    __slots__ = ("pixels", "mean", "mean_sq")

    def __init__(self, pixels: np.ndarray, window: int):
        self.pixels = pixels
        self.mean = _window_mean(pixels, window)
        self.mean_sq = _window_mean(pixels * pixels, window)


def _ssim_from_stats(a: _PatchStats, b: _PatchStats, params: SsimParams) -> np.ndarray:
    window = params.window
    n = window * window
    cov_norm = n / (n - 1.0)  # sample (unbiased) statistics

    mean_ab = _window_mean(a.pixels * b.pixels, window)
    var_a = cov_norm * (a.mean_sq - a.mean * a.mean)
    var_b = cov_norm * (b.mean_sq - b.mean * b.mean)
    cov_ab = cov_norm * (mean_ab - a.mean * b.mean)

    luminance = (2.0 * a.mean * b.mean + params.c1) / (a.mean * a.mean + b.mean * b.mean + params.c1)
    structure = (2.0 * cov_ab + params.c2) / (var_a + var_b + params.c2)
    return np.clip(luminance * structure, -1.0, 1.0)


def ssim_map(a: Frame, b: Frame, params: SsimParams) -> TemporalMap:
    """Per-pixel, per-channel SSIM over window x window patches"""
    _check_pair(a, b)
    stats_a = _PatchStats(a.pixels, params.window)
    stats_b = _PatchStats(b.pixels, params.window)
    return TemporalMap(_ssim_from_stats(stats_a, stats_b, params), kind="ssim")


def dsim_map(a: Frame, b: Frame, params: SsimParams) -> TemporalMap:
    """Structural dissimilarity, (1 - SSIM) / 2, in [0, 1]"""
    ssim = ssim_map(a, b, params)
    return TemporalMap((1.0 - ssim.values) / 2.0, kind="dsim")


# =============================================================================
# CANDIDATE SELECTION
# =============================================================================

class ScoredCandidate(NamedTuple):
    direction: ShiftDirection
    score: float
    frame: Frame
    ssim: np.ndarray


def rank_candidates(current: Frame, past: Frame, params: SsimParams) -> List[ScoredCandidate]:
    """
    Score all 9 shift candidates of ``current`` against ``past``.

    The score is the SSIM map mean over pixels and channels. Results are
    sorted by descending score; equal scores keep candidate order
    (identity, then dy, dx ascending).
    """
    _check_pair(current, past)
    past_stats = _PatchStats(past.pixels, params.window)
    scored = []
    for direction in ShiftDirection.CANDIDATES:
        candidate = shift_frame(current, direction)
        values = _ssim_from_stats(_PatchStats(candidate.pixels, params.window), past_stats, params)
        scored.append(ScoredCandidate(direction, float(values.mean()), candidate, values))
    # sorted() is stable, so ties stay in candidate order
    return sorted(scored, key=lambda item: -item.score)


def _pick(ranked: List[ScoredCandidate], k: int, seed: int) -> ScoredCandidate:
    if not 1 <= k <= len(ShiftDirection.CANDIDATES):
        raise InputError(f"k must be in [1, 9], got {k}")
    if k == 1:
        return ranked[0]
    rng = np.random.default_rng(seed)
    return ranked[int(rng.integers(k))]


def select_candidate(current: Frame, past: Frame, params: SsimParams) -> Tuple[Frame, ShiftDirection]:
    """The shifted version of ``current`` most similar to ``past``"""
    best = rank_candidates(current, past, params)[0]
    return best.frame, best.direction


def select_candidate_topk(
    current: Frame,
    past: Frame,
    params: SsimParams,
    k: int,
    seed: int
) -> Tuple[Frame, ShiftDirection]:
    """Pick uniformly among the k best candidates with a seeded PCG64 generator"""
    chosen = _pick(rank_candidates(current, past, params), k, seed)
    return chosen.frame, chosen.direction


# =============================================================================
# CASCADED INPUT
# =============================================================================

def build_cascaded_input(
    current: Frame,
    past: Frame,
    params: SsimParams,
    gap_source: Optional[Frame] = None,
    mode: str = "ssmap",
    topk: int = 1,
    seed: int = 0
) -> CascadedInput:
    """
    Concatenate ``current`` with its temporal channels along the channel axis.

    ``gap_source`` is the frame I_{t-g} the map is computed against; when it is
    not given ``past`` is used.
    """
    reference = gap_source if gap_source is not None else past
    _check_pair(current, reference)

    direction = ShiftDirection.IDENTITY
    if mode in ("ssmap", "dsim"):
        chosen = _pick(rank_candidates(current, reference, params), topk, seed)
        direction = chosen.direction
        temporal = chosen.ssim if mode == "ssmap" else (1.0 - chosen.ssim) / 2.0
    elif mode == "raw_prev":
        temporal = reference.pixels
    elif mode == "none":
        temporal = current.pixels[:, :, :0]
    else:
        raise InputError(f"Unknown temporal mode: {mode}")

    data = np.concatenate([current.pixels, temporal], axis=2)
    return CascadedInput(
        index=current.index,
        data=data,
        image_channels=current.channels,
        direction=direction,
        mode=mode,
        past_index=reference.index,
    )


class TemporalPreprocessor:
    """
    Streaming front end: keeps the last max(g, 2) frames and emits one
    CascadedInput per incoming frame.

    Until g earlier frames exist the oldest buffered frame stands in for
    I_{t-g}; the very first frame is compared with itself.
    """

    def __init__(self, ssim: SsimParams, temporal: TemporalConfig):
        self.ssim = ssim
        self.temporal = temporal
        self.buffer: Deque[Frame] = deque(maxlen=max(temporal.frame_gap, 2))
        self._draws = 0

    def reference_for(self, current: Frame) -> Frame:
        if not self.buffer:
            return current
        gap = self.temporal.frame_gap
        return self.buffer[-gap] if len(self.buffer) >= gap else self.buffer[0]

    def push(self, frame: Frame) -> CascadedInput:
        if self.buffer and frame.index <= self.buffer[-1].index:
            raise InputError(f"Frame {frame.index} arrived after frame {self.buffer[-1].index}")
        reference = self.reference_for(frame)
        # a fresh seed per frame keeps top-k draws reproducible and independent
        seed = self.temporal.seed + self._draws
        self._draws += 1
        result = build_cascaded_input(
            frame,
            reference,
            self.ssim,
            mode=self.temporal.mode,
            topk=self.temporal.topk,
            seed=seed,
        )
        self.buffer.append(frame)
        logger.debug(
            "frame %d vs %d: direction (%d, %d)",
            frame.index, reference.index, result.direction.dx, result.direction.dy
        )
        return result
