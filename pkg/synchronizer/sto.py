"""Sampling-time offset estimation from SRO-compensated signals.

After SRO compensation the residual shift of segment ℓ is

    τ̂_12[ℓ] ≈ (d2 - d1)/c·f_s - τ_STO

so every active segment with distance estimates yields one STO
observation (d2 - d1)/c·f_s - τ̂_12[ℓ].  The STO is their mean, computed
on the RANSAC consensus set.
"""

import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .dsp import gcc_phat
from .errors import (
    DegenerateInputError,
    InsufficientSamplesError,
    IngestionError,
    InvalidArgumentError,
    NoConsensusError,
    SyncError,
)
from .sad import ActivityMask, segment_is_active
from .scene import SPEED_OF_SOUND, GroundTruth
from .utils.atomic_write import atomic_write_csv, read_csv


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StoParams:
    """
    STO stage parameters.

    ``max_lag`` bounds the GCC-PhaT search around the coarse offset.
    """
    segment_len: int = 1 << 14
    segment_shift: int = 1 << 11
    max_lag: int = 1024
    min_active_ratio: float = 0.75
    iterations: int = 100
    inlier_tol: float = 4.0
    min_inlier_frac: float = 0.5
    seed: int = 0
    speed_of_sound: float = SPEED_OF_SOUND
    sample_rate: int = 16000

    def validate(self) -> None:
        if self.segment_len <= 0 or self.segment_shift <= 0:
            raise InvalidArgumentError("STO segment length and shift must be positive")
        if not 0 <= self.max_lag < self.segment_len // 2:
            raise InvalidArgumentError(f"max_lag must be in [0, segment_len/2), got {self.max_lag}")
        if self.iterations < 1:
            raise InvalidArgumentError(f"iterations must be >= 1, got {self.iterations}")
        if self.inlier_tol <= 0:
            raise InvalidArgumentError(f"inlier_tol must be positive, got {self.inlier_tol}")
        if not 0.0 < self.min_inlier_frac <= 1.0:
            raise InvalidArgumentError(f"min_inlier_frac must be in (0, 1], got {self.min_inlier_frac}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ShiftObservation:
    """Residual shift of one segment with the distance estimates used for it."""
    segment_index: int
    shift: float
    d1: float
    d2: float
    active: bool = True

    def tdof(self, speed_of_sound: float = SPEED_OF_SOUND, sample_rate: int = 16000) -> float:
        """(d2 - d1)/c·f_s in samples."""
        return (self.d2 - self.d1) / speed_of_sound * sample_rate

    def sto_candidate(self, speed_of_sound: float = SPEED_OF_SOUND, sample_rate: int = 16000) -> float:
        return self.tdof(speed_of_sound, sample_rate) - self.shift


@dataclass(frozen=True)
class StoEstimate:
    sto: float
    inlier_count: int
    residual_rms: float
    num_observations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


# ─── distance providers ──────────────────────────────────────────────────────

class DistanceProvider(ABC):
    """Per-segment source-node distance estimates (meters)."""

    @abstractmethod
    def __call__(self, segment_index: int, start: int, stop: int) -> Tuple[float, float]:
        """
        Args:
            segment_index: ℓ
            start: First node-1 sample of the segment
            stop: One past the last sample

        Returns:
            (d1, d2)
        """
        pass


class ConstantDistanceProvider(DistanceProvider):
    """The same (d1, d2) for every segment: a static source."""

    def __init__(self, d1: float, d2: float):
        if d1 <= 0 or d2 <= 0:
            raise InvalidArgumentError(f"Distances must be positive, got d1={d1}, d2={d2}")
        self.d1 = float(d1)
        self.d2 = float(d2)

    def __call__(self, segment_index: int, start: int, stop: int) -> Tuple[float, float]:
        return self.d1, self.d2


class TableDistanceProvider(DistanceProvider):
    """
    Distances of the active position plus Gaussian noise.

    ``position_index`` labels non-overlapping frames of ``frame_shift``
    samples with a row of ``distances`` (-1 where inactive).  The position
    of a segment is the one active for most of it.  A segment without
    activity takes the position of the nearest active frame.  Noise for a
    query depends only on (seed, start), so repeated or reordered queries
    give the same answer.
    """

    def __init__(
        self,
        position_index: np.ndarray,
        distances: np.ndarray,
        frame_shift: int,
        noise_std_m: float = 0.0,
        seed: int = 0,
    ):
        if noise_std_m < 0:
            raise InvalidArgumentError(f"noise_std_m must be >= 0, got {noise_std_m}")
        self.position_index = np.asarray(position_index, dtype=int)
        self.distances = np.asarray(distances, dtype=float).reshape(-1, 2)
        self.frame_shift = int(frame_shift)
        self.noise_std_m = float(noise_std_m)
        self.seed = int(seed)
        if len(self.position_index) and self.position_index.max() >= len(self.distances):
            raise InvalidArgumentError(
                f"Position index {self.position_index.max()} has no distance row ({len(self.distances)} rows)"
            )
        self._active_frames = np.flatnonzero(self.position_index >= 0)

    @property
    def signal_length(self) -> int:
        return len(self.position_index) * self.frame_shift

    def position_for(self, start: int, stop: int) -> int:
        if start < 0 or stop > self.signal_length or stop <= start:
            raise InvalidArgumentError(
                f"Distance query [{start}, {stop}) outside recording [0, {self.signal_length})"
            )
        if len(self._active_frames) == 0:
            raise DegenerateInputError("No active frames in ground truth")

        shift = self.frame_shift
        frames = self.position_index[start // shift:math.ceil(stop / shift)]
        active = frames[frames >= 0]
        if len(active):
            counts = np.bincount(active)
            return int(np.argmax(counts))
        center = (start + stop) / 2.0 / shift
        nearest = self._active_frames[np.argmin(np.abs(self._active_frames - center))]
        return int(self.position_index[nearest])

    def __call__(self, segment_index: int, start: int, stop: int) -> Tuple[float, float]:
        position = self.position_for(start, stop)
        d1, d2 = (float(d) for d in self.distances[position])
        if self.noise_std_m > 0:
            rng = np.random.default_rng([self.seed, int(start)])
            noise = rng.normal(0.0, self.noise_std_m, size=2)
            d1 = max(d1 + float(noise[0]), 1e-3)
            d2 = max(d2 + float(noise[1]), 1e-3)
        return d1, d2

    @classmethod
    def from_scene_dir(cls, scene_dir: Union[str, Path], noise_std_m: float = 0.0, seed: int = 0) -> 'TableDistanceProvider':
        """Provider over an exported scene (ground_truth.json + activity.csv)."""
        scene_dir = Path(scene_dir)
        try:
            with open(scene_dir / 'ground_truth.json', encoding='utf-8') as f:
                truth = json.load(f)
            rows = read_csv(scene_dir / 'activity.csv')
        except (OSError, ValueError) as e:
            raise IngestionError(f"Cannot read scene tables in {scene_dir}: {e}") from e
        positions = np.array([int(r['position']) for r in rows], dtype=int)
        return cls(positions, np.asarray(truth['distances'], dtype=float), int(truth['frame_shift']), noise_std_m, seed)


class OracleDistanceProvider(TableDistanceProvider):
    """Table provider over an in-memory ground truth."""

    def __init__(self, truth: GroundTruth, noise_std_m: float = 0.0, seed: int = 0):
        super().__init__(truth.position_index, truth.distances, truth.frame_shift, noise_std_m, seed)
        self.truth = truth


def oracle_distance_provider(truth: GroundTruth, noise_std_m: float = 0.0, seed: int = 0) -> OracleDistanceProvider:
    return OracleDistanceProvider(truth, noise_std_m, seed)


# ─── observations ────────────────────────────────────────────────────────────

def collect_observations(
    x1: np.ndarray,
    x2_compensated: np.ndarray,
    distance_provider: DistanceProvider,
    mask: ActivityMask,
    params: StoParams = StoParams(),
    coarse_offset: int = 0,
) -> List[ShiftObservation]:
    """
    GCC-PhaT residual shift and distance estimates for every active segment.

    Segment ℓ of x1 starts at ℓ·shift; x2 is read ``coarse_offset`` samples
    later and the coarse offset is added back to the measured lag.  Segments
    failing the activity gate or the provider are skipped.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2_compensated, dtype=float)
    length = params.segment_len
    if len(x1) < length:
        return []

    observations = []
    skipped = 0
    num_segments = (len(x1) - length) // params.segment_shift + 1
    for index in range(num_segments):
        start = index * params.segment_shift
        start2 = start + coarse_offset
        if start2 < 0 or start2 + length > len(x2):
            continue
        if not segment_is_active(mask, start, length, params.min_active_ratio):
            continue
        try:
            gcc = gcc_phat(x1[start:start + length], x2[start2:start2 + length], params.max_lag)
            d1, d2 = distance_provider(index, start, start + length)
        except SyncError as e:
            skipped += 1
            logger.debug(f"Segment {index} skipped: {e}")
            continue
        observations.append(
            ShiftObservation(segment_index=index, shift=coarse_offset + gcc.refined_lag, d1=d1, d2=d2)
        )

    logger.info(f"STO: {len(observations)} observations from {num_segments} segments ({skipped} skipped)")
    return observations


def observations_to_csv(
    observations: Sequence[ShiftObservation],
    path: Union[str, Path],
) -> Path:
    rows = ((o.segment_index, o.shift, o.d1, o.d2, o.active) for o in observations)
    return atomic_write_csv(path, ('segment_index', 'shift', 'd1', 'd2', 'active'), rows)


# ─── LS / RANSAC ─────────────────────────────────────────────────────────────

def _canonical(observations: Sequence[ShiftObservation]) -> List[ShiftObservation]:
    active = [o for o in observations if o.active]
    return sorted(active, key=lambda o: (o.segment_index, o.shift, o.d1, o.d2))


def _candidates(observations: Sequence[ShiftObservation], params: StoParams) -> np.ndarray:
    return np.array([o.sto_candidate(params.speed_of_sound, params.sample_rate) for o in observations])


def _fit(values: np.ndarray) -> Tuple[float, float]:
    sto = math.fsum(values) / len(values)
    rms = math.sqrt(math.fsum((values - sto) ** 2) / len(values))
    return sto, rms


def ls_sto(observations: Sequence[ShiftObservation], params: StoParams = StoParams()) -> StoEstimate:
    """
    Least-squares STO: mean of (d2 - d1)/c·f_s - τ̂[ℓ] over the active observations.

    Raises:
        InsufficientSamplesError: No active observation
    """
    active = _canonical(observations)
    if not active:
        raise InsufficientSamplesError("STO estimation needs at least one active observation")
    sto, rms = _fit(_candidates(active, params))
    return StoEstimate(sto=sto, inlier_count=len(active), residual_rms=rms, num_observations=len(active))


def ransac_sto(
    observations: Sequence[ShiftObservation],
    iterations: Optional[int] = None,
    inlier_tol: Optional[float] = None,
    min_inlier_frac: Optional[float] = None,
    seed: Optional[int] = None,
    params: StoParams = StoParams(),
) -> StoEstimate:
    """
    ls_sto embedded in RANSAC with single-observation hypotheses.

    Observations are put in a canonical order before sampling, so the
    result does not depend on their input order.  Ties between consensus
    sets go to the earlier hypothesis.

    Raises:
        InsufficientSamplesError: Fewer than 3 active observations
        NoConsensusError: Best consensus below ``min_inlier_frac``; the LS fit
            on that consensus is attached as ``best_estimate``
    """
    iterations = params.iterations if iterations is None else iterations
    inlier_tol = params.inlier_tol if inlier_tol is None else inlier_tol
    min_inlier_frac = params.min_inlier_frac if min_inlier_frac is None else min_inlier_frac
    seed = params.seed if seed is None else seed

    active = _canonical(observations)
    if len(active) < 3:
        raise InsufficientSamplesError(f"RANSAC needs at least 3 active observations, got {len(active)}")

    values = _candidates(active, params)
    rng = np.random.default_rng(seed)
    best_inliers = None
    for _ in range(iterations):
        hypothesis = values[rng.integers(len(values))]
        inliers = np.abs(values - hypothesis) <= inlier_tol
        if best_inliers is None or inliers.sum() > best_inliers.sum():
            best_inliers = inliers

    # refit, then take the consensus of the refined estimate if it is larger
    sto, _ = _fit(values[best_inliers])
    refined = np.abs(values - sto) <= inlier_tol
    if refined.sum() > best_inliers.sum():
        best_inliers = refined
        sto, _ = _fit(values[best_inliers])

    inlier_values = values[best_inliers]
    sto, rms = _fit(inlier_values)
    estimate = StoEstimate(
        sto=sto, inlier_count=int(best_inliers.sum()), residual_rms=rms, num_observations=len(active)
    )

    fraction = estimate.inlier_count / len(active)
    if fraction < min_inlier_frac:
        raise NoConsensusError(
            f"RANSAC consensus {estimate.inlier_count}/{len(active)} below {min_inlier_frac:.0%}",
            best_estimate=estimate,
        )
    logger.info(
        f"STO: {estimate.sto:.2f} samples, {estimate.inlier_count}/{len(active)} inliers, "
        f"residual {estimate.residual_rms:.2f}"
    )
    return estimate


def estimate_sto(
    x1: np.ndarray,
    x2_compensated: np.ndarray,
    distance_provider: DistanceProvider,
    mask: ActivityMask,
    params: StoParams = StoParams(),
    coarse_offset: int = 0,
) -> Tuple[StoEstimate, List[ShiftObservation]]:
    """
    collect_observations followed by ransac_sto.

    Raises:
        NoConsensusError: with ``observations`` set to the collected ones
    """
    params.validate()
    observations = collect_observations(x1, x2_compensated, distance_provider, mask, params, coarse_offset)
    try:
        return ransac_sto(observations, params=params), observations
    except NoConsensusError as e:
        e.observations = observations
        raise
