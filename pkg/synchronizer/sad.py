"""Energy-based source activity detection used to gate estimator updates."""

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import InvalidArgumentError
from .utils.atomic_write import atomic_write_csv


logger = logging.getLogger(__name__)

DEFAULT_FRAME_SIZE = 1024
DEFAULT_FRAME_SHIFT = 512
DEFAULT_THRESHOLD_DB = 10.0
DEFAULT_MIN_RATIO = 0.75

NOISE_FLOOR_PERCENTILE = 10.0
# floor never sits closer than this to the loudest frame
MAX_DYNAMIC_RANGE_DB = 30.0
# digital silence
ABSOLUTE_FLOOR_DB = -120.0


@dataclass(frozen=True)
class SadParams:
    """Activity detection and gating parameters."""
    frame_size: int = DEFAULT_FRAME_SIZE
    frame_shift: int = DEFAULT_FRAME_SHIFT
    threshold_db: float = DEFAULT_THRESHOLD_DB
    min_ratio: float = DEFAULT_MIN_RATIO

    def validate(self) -> None:
        if self.frame_size <= 0 or self.frame_shift <= 0:
            raise InvalidArgumentError(
                f"SAD frame size/shift must be positive, got {self.frame_size}/{self.frame_shift}"
            )
        if not 0.0 < self.min_ratio <= 1.0:
            raise InvalidArgumentError(f"min_ratio must be in (0, 1], got {self.min_ratio}")

    def detect(self, x: np.ndarray) -> 'ActivityMask':
        return detect_activity(x, self.frame_size, self.frame_shift, self.threshold_db)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ActivityMask:
    """Per-frame activity flags of one stream."""
    frame_flags: np.ndarray
    frame_size: int
    frame_shift: int
    threshold_db: float
    signal_length: int

    @property
    def num_frames(self) -> int:
        return len(self.frame_flags)

    def overlapping_frames(self, start: int, length: int) -> slice:
        first = max(0, math.ceil((start - self.frame_size + 1) / self.frame_shift))
        last = min(self.num_frames - 1, (start + length - 1) // self.frame_shift)
        return slice(first, last + 1)

    def active_ratio(self, start: int, length: int) -> float:
        flags = self.frame_flags[self.overlapping_frames(start, length)]
        return float(np.mean(flags)) if len(flags) else 0.0

    def sample_mask(self) -> np.ndarray:
        """Per-sample flags; each sample takes the flag of the frame centered nearest to it."""
        n = np.arange(self.signal_length)
        idx = np.rint((n - self.frame_size / 2.0) / self.frame_shift).astype(int)
        return self.frame_flags[np.clip(idx, 0, self.num_frames - 1)]

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = (
            (i, i * self.frame_shift, bool(flag))
            for i, flag in enumerate(self.frame_flags)
        )
        return atomic_write_csv(path, ('frame_index', 'start_sample', 'active'), rows)


def frame_energies_db(x: np.ndarray, frame_size: int, frame_shift: int) -> np.ndarray:
    """Mean-square energy per frame in dB; a signal shorter than one frame is one zero-padded frame."""
    if len(x) < frame_size:
        x = np.pad(x, (0, frame_size - len(x)))
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_size)[::frame_shift]
    return 10.0 * np.log10(np.mean(frames ** 2, axis=1) + 1e-20)


def detect_activity(
    x: np.ndarray,
    frame_size: int = DEFAULT_FRAME_SIZE,
    frame_shift: int = DEFAULT_FRAME_SHIFT,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
) -> ActivityMask:
    """
    Flag frames whose energy exceeds the noise floor by ``threshold_db``.

    The noise floor is the 10th percentile of frame energies, capped at
    30 dB below the loudest frame so that mostly-active recordings keep a
    usable floor.  Frames below -120 dBFS are never active.

    Raises:
        InvalidArgumentError: Empty signal or non-positive frame parameters
    """
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        raise InvalidArgumentError("Activity detection on an empty signal")
    if frame_size <= 0 or frame_shift <= 0:
        raise InvalidArgumentError(f"Frame size/shift must be positive, got {frame_size}/{frame_shift}")

    energies = frame_energies_db(x, frame_size, frame_shift)
    floor = min(
        float(np.percentile(energies, NOISE_FLOOR_PERCENTILE)),
        float(energies.max()) - MAX_DYNAMIC_RANGE_DB,
    )
    flags = (energies > floor + threshold_db) & (energies > ABSOLUTE_FLOOR_DB)

    logger.debug(
        f"SAD: floor {floor:.1f} dB, {int(flags.sum())}/{len(flags)} active frames"
    )
    return ActivityMask(
        frame_flags=flags,
        frame_size=frame_size,
        frame_shift=frame_shift,
        threshold_db=threshold_db,
        signal_length=len(x),
    )


def segment_is_active(
    mask: ActivityMask,
    start: int,
    length: int,
    min_ratio: float = DEFAULT_MIN_RATIO,
) -> bool:
    """
    True iff at least ``min_ratio`` of the frames overlapping
    [start, start + length) are active.

    Raises:
        InvalidArgumentError: Segment outside the analyzed stream
    """
    if length <= 0 or start < 0 or start + length > mask.signal_length:
        raise InvalidArgumentError(
            f"Segment [{start}, {start + length}) outside mask range [0, {mask.signal_length})"
        )
    return mask.active_ratio(start, length) >= min_ratio
