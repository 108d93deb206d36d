"""Scoring of SRO traces and STO estimates against ground truth, plus batch aggregation."""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError
from .estimators.base import EstimateTrace, delay_from_sro
from .scene import GroundTruth


logger = logging.getLogger(__name__)

SIGMA_BANDS: Tuple[Tuple[float, float], ...] = ((0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.0))

# |STO error| above this counts as an outlier in the length sweep
STO_OUTLIER_SAMPLES = 10.0


def rmse(estimate: np.ndarray, reference: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Root-mean-square error over ``mask`` (all entries if None); NaN if the mask is empty."""
    estimate = np.asarray(estimate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if estimate.shape != reference.shape:
        raise InvalidArgumentError(f"RMSE shapes differ: {estimate.shape} vs {reference.shape}")
    if mask is not None:
        estimate, reference = estimate[mask], reference[mask]
    if len(estimate) == 0:
        return float('nan')
    return float(np.sqrt(np.mean((estimate - reference) ** 2)))


def truth_sro_per_segment(trace: EstimateTrace, truth: GroundTruth, temporal_distance: int = 4) -> np.ndarray:
    """
    Reference ε_12 for every trace segment: the difference trajectory averaged
    between the centers of the past (ℓ - ℓ_d) and the current window.
    """
    centers = trace.segment_centers
    span = temporal_distance * trace.segment_shift
    return np.array([
        truth.mean_sro(max(center - span, trace.segment_len / 2.0), center)
        for center in centers
    ])


def truth_delay_per_segment(trace: EstimateTrace, truth: GroundTruth, temporal_distance: int = 4) -> np.ndarray:
    """Reference SRO-induced delay, accumulated from the per-segment reference SRO."""
    return delay_from_sro(
        truth_sro_per_segment(trace, truth, temporal_distance), trace.segment_shift, trace.segment_len
    )


@dataclass
class TraceScore:
    rmse_sro: float
    rmse_delay: float
    valid_segments: int
    total_segments: int


def score_trace(trace: EstimateTrace, truth: GroundTruth, temporal_distance: int = 4) -> TraceScore:
    """RMSE of ε̂ (ppm) and of the reconstructed delay (samples) over valid segments."""
    valid = trace.valid
    ref_sro = truth_sro_per_segment(trace, truth, temporal_distance)
    ref_delay = delay_from_sro(ref_sro, trace.segment_shift, trace.segment_len)
    return TraceScore(
        rmse_sro=rmse(trace.sro, ref_sro, valid),
        rmse_delay=rmse(trace.delay(), ref_delay, valid),
        valid_segments=int(valid.sum()),
        total_segments=len(trace),
    )


@dataclass
class RecordingMetrics:
    """Per-recording outcome of a batch run."""
    scenario: str
    seed: int
    status: str = 'completed'
    rmse_sro: Optional[float] = None
    rmse_delay: Optional[float] = None
    valid_segments: int = 0
    sigma_sro: Optional[float] = None
    sto_true: Optional[float] = None
    sto_estimate: Optional[float] = None
    sto_error: Optional[float] = None
    sto_inliers: Optional[int] = None
    duration: Optional[float] = None
    error: str = ''

    @property
    def succeeded(self) -> bool:
        return self.status == 'completed' and self.rmse_sro is not None and math.isfinite(self.rmse_sro)

    def to_dict(self) -> dict:
        return asdict(self)


CSV_COLUMNS = (
    'scenario', 'seed', 'status', 'rmse_sro', 'rmse_delay', 'valid_segments', 'sigma_sro',
    'sto_true', 'sto_estimate', 'sto_error', 'sto_inliers', 'error',
)


def recording_rows(results: Sequence[RecordingMetrics]) -> List[tuple]:
    return [tuple('' if v is None else v for v in (getattr(r, c) for c in CSV_COLUMNS)) for r in results]


@dataclass
class ScenarioMetrics:
    """
    Aggregate of one scenario batch.

    ``avg_*`` averages per-recording RMSEs; ``pooled_rmse_sro`` is the RMS of
    the per-recording RMSEs weighted by their valid segment counts.
    """
    scenario: str
    recordings: int
    failures: int
    avg_rmse_sro: Optional[float]
    avg_rmse_delay: Optional[float]
    max_rmse_delay: Optional[float]
    pooled_rmse_sro: Optional[float]


def aggregate_scenario(scenario: str, results: Sequence[RecordingMetrics]) -> ScenarioMetrics:
    ok = [r for r in results if r.succeeded]
    failures = len(results) - len(ok)
    if not ok:
        return ScenarioMetrics(scenario, len(results), failures, None, None, None, None)

    sro = np.array([r.rmse_sro for r in ok])
    delay = np.array([r.rmse_delay for r in ok])
    weights = np.array([r.valid_segments for r in ok], dtype=float)
    pooled = float(np.sqrt(np.sum(weights * sro ** 2) / np.sum(weights))) if weights.sum() > 0 else None
    return ScenarioMetrics(
        scenario=scenario,
        recordings=len(results),
        failures=failures,
        avg_rmse_sro=float(np.mean(sro)),
        avg_rmse_delay=float(np.mean(delay)),
        max_rmse_delay=float(np.max(delay)),
        pooled_rmse_sro=pooled,
    )


@dataclass
class SigmaBand:
    low: float
    high: float
    count: int
    avg_rmse_sro: Optional[float]

    @property
    def label(self) -> str:
        return f"[{self.low:g}, {self.high:g})"


def sigma_band_report(
    results: Sequence[RecordingMetrics],
    bands: Sequence[Tuple[float, float]] = SIGMA_BANDS,
) -> Tuple[List[SigmaBand], List[str]]:
    """
    Bucket recordings by the standard deviation of their true SRO trajectory.

    Returns:
        (populated bands, notes about empty bands)
    """
    rows: List[SigmaBand] = []
    notes: List[str] = []
    ok = [r for r in results if r.succeeded and r.sigma_sro is not None]
    for low, high in bands:
        members = [r.rmse_sro for r in ok if low <= r.sigma_sro < high]
        if not members:
            notes.append(f"band [{low:g}, {high:g}) ppm: no recordings")
            continue
        rows.append(SigmaBand(low, high, len(members), float(np.mean(members))))
    outside = [r for r in ok if not any(low <= r.sigma_sro < high for low, high in bands)]
    if outside:
        notes.append(f"{len(outside)} recording(s) outside all bands")
    return rows, notes


def band_spread(bands: Sequence[SigmaBand]) -> Optional[float]:
    values = [b.avg_rmse_sro for b in bands if b.avg_rmse_sro is not None]
    return float(max(values) - min(values)) if values else None


def sto_error_summary(errors: Sequence[float]) -> Dict[str, Any]:
    """Distribution of |STO error| (samples) for one signal length."""
    values = np.abs(np.asarray([e for e in errors if e is not None and math.isfinite(e)], dtype=float))
    if len(values) == 0:
        return {'count': 0}
    q25, median, q75 = np.percentile(values, [25, 50, 75])
    return {
        'count': int(len(values)),
        'median': float(median),
        'q25': float(q25),
        'q75': float(q75),
        'max': float(values.max()),
        'outliers': int(np.sum(values > STO_OUTLIER_SAMPLES)),
    }


@dataclass
class MetricsReport:
    """Batch evaluation report."""
    scenarios: Dict[str, ScenarioMetrics] = field(default_factory=dict)
    sigma_bands: List[SigmaBand] = field(default_factory=list)
    sigma_notes: List[str] = field(default_factory=list)
    sto_sweep: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    failures: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def has_failures(self) -> bool:
        return bool(self.failures)

    def to_dict(self) -> dict:
        return {
            'scenarios': {k: asdict(v) for k, v in sorted(self.scenarios.items())},
            'sigma_bands': [
                {'band': b.label, 'count': b.count, 'avg_rmse_sro': b.avg_rmse_sro} for b in self.sigma_bands
            ],
            'sigma_band_spread': band_spread(self.sigma_bands),
            'sigma_notes': list(self.sigma_notes),
            'sto_sweep': dict(self.sto_sweep),
            'failures': list(self.failures),
        }
