"""Base class and trace types shared by all SRO estimators."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..sad import ActivityMask
from ..utils.atomic_write import atomic_write_csv


logger = logging.getLogger(__name__)

PPM = 1e-6


@dataclass(frozen=True)
class SroTracePoint:
    """One segment-wise SRO estimate.

    Attributes:
        segment_index: ℓ
        time: Segment center in seconds (node-1 time)
        sro_estimate: ε̂_12[ℓ] in ppm
        valid: Post-settling and gate passed
    """
    segment_index: int
    time: float
    sro_estimate: float
    valid: bool

    def to_dict(self) -> dict:
        return {
            'segment_index': self.segment_index,
            'time': self.time,
            'sro_estimate': self.sro_estimate,
            'valid': self.valid,
        }


def delay_from_sro(sro_ppm: np.ndarray, segment_shift: int, segment_len: int) -> np.ndarray:
    """
    Accumulated SRO-induced delay per segment (samples):
    N_W/2·ε[0] + Σ_{ℓ'=1..ℓ} B_s·ε[ℓ'], with ε in ppm.
    """
    sro = np.asarray(sro_ppm, dtype=float) * PPM
    if len(sro) == 0:
        return np.zeros(0)
    increments = sro * segment_shift
    increments[0] = segment_len / 2.0 * sro[0]
    return np.cumsum(increments)


@dataclass
class EstimateTrace:
    """Segment-wise SRO estimates of one stream pair.

    ``segment_shift``/``segment_len`` place segment ℓ at node-1 samples
    [ℓ·B_s, ℓ·B_s + N_W).  ``coarse_offset`` is the integer read offset
    applied to the second stream.
    """
    points: List[SroTracePoint]
    segment_shift: int
    segment_len: int
    sample_rate: int
    coarse_offset: int = 0
    estimator: str = ''
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def sro(self) -> np.ndarray:
        return np.array([p.sro_estimate for p in self.points], dtype=float)

    @property
    def valid(self) -> np.ndarray:
        return np.array([p.valid for p in self.points], dtype=bool)

    @property
    def segment_centers(self) -> np.ndarray:
        """Node-1 sample position of each segment center."""
        idx = np.array([p.segment_index for p in self.points], dtype=float)
        return idx * self.segment_shift + self.segment_len / 2.0

    def delay(self) -> np.ndarray:
        """Reconstructed SRO-induced delay per segment (samples)."""
        return delay_from_sro(self.sro, self.segment_shift, self.segment_len)

    def final_sro(self) -> Optional[float]:
        valid = self.valid
        return float(self.sro[valid][-1]) if valid.any() else None

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = ((p.segment_index, p.time, p.sro_estimate, p.valid) for p in self.points)
        return atomic_write_csv(path, ('segment_index', 'time_s', 'sro_ppm', 'valid'), rows)

    @classmethod
    def from_rows(
        cls,
        rows: List[dict],
        segment_shift: int,
        segment_len: int,
        sample_rate: int,
        coarse_offset: int = 0,
    ) -> 'EstimateTrace':
        """Rebuild a trace from CSV rows (``utils.atomic_write.read_csv``)."""
        points = [
            SroTracePoint(
                segment_index=int(r['segment_index']),
                time=float(r['time_s']),
                sro_estimate=float(r['sro_ppm']),
                valid=str(r['valid']).lower() == 'true',
            )
            for r in rows
        ]
        return cls(points, segment_shift, segment_len, sample_rate, coarse_offset)


class SroEstimator(ABC):
    """
    Abstract base for segment-wise SRO estimators.

    Subclasses register under ``name`` in ``synchronizer.estimators.ESTIMATORS``
    and return an EstimateTrace from ``run``.
    """

    name: str = ''

    def __init__(self, params: Any):
        self.params = params
        self.state: Dict[str, Any] = {'status': 'initialized'}

    @abstractmethod
    def run(
        self,
        x1: np.ndarray,
        x2: np.ndarray,
        mask1: Optional[ActivityMask] = None,
        mask2: Optional[ActivityMask] = None,
    ) -> EstimateTrace:
        """
        Estimate the SRO of x2 relative to x1.

        Args:
            x1: Reference node signal
            x2: Second node signal
            mask1: Activity of x1 (detected if None)
            mask2: Activity of x2 (detected if None)

        Returns:
            EstimateTrace
        """
        pass

    def update_state(self, updates: Dict[str, Any]) -> None:
        self.state.update(updates)

    def describe(self) -> Dict[str, Any]:
        params = self.params.to_dict() if hasattr(self.params, 'to_dict') else dict(vars(self.params))
        return {'estimator': self.name, 'params': params, 'state': dict(self.state)}
