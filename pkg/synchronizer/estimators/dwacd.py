"""Dynamic weighted average coherence drift (DWACD) SRO estimator.

Segment ℓ of node 1 covers samples [ℓ·B_s, ℓ·B_s + N_W).  The matching
segment of node 2 is read at ℓ·B_s + coarse_offset + τ_comp[ℓ].  The
coherence of the current segment pair is multiplied with the conjugated
coherence of the pair ℓ_d segments back (read with the same τ_comp), so
the product phase only carries the drift accumulated over ℓ_d·B_s
samples:

    P(ℓ,k) ≈ |.|·exp(j·2πk/N·ℓ_d·B_s·ε)

P is recursively averaged while both windows are active, and ε̂ is read
from the GCC peak of the averaged product.  A positive ε̂ means node 2
is increasingly delayed relative to node 1.
"""

import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from ..dsp import cross_correlate_offset, get_window, is_power_of_two, lag_search, one_sided_to_full
from ..errors import (
    CoarseSyncError,
    DegenerateInputError,
    InsufficientSamplesError,
    InvalidArgumentError,
    NotSettledError,
)
from ..sad import ActivityMask, SadParams, segment_is_active
from .base import PPM, EstimateTrace, SroEstimator, SroTracePoint, delay_from_sro


logger = logging.getLogger(__name__)

# PSD floor relative to the segment mean power
PSD_FLOOR = 1e-12

# coarse sync searches ±1.1 s
COARSE_MAX_LAG_SECONDS = 1.1


@dataclass(frozen=True)
class DwacdParams:
    """
    DWACD parameters (defaults: B=512, N=4096, B_s=2048, N_W=8192, ℓ_d=4,
    α=0.95, ℓ_min=40, 20 s coarse-sync window).

    ``coarse_sync_window = 0`` skips coarse synchronization (offset 0).
    ``max_sro_ppm`` bounds the readout search range.
    """
    frame_shift: int = 512
    fft_size: int = 4096
    segment_shift: int = 2048
    segment_len: int = 8192
    temporal_distance: int = 4
    smoothing: float = 0.95
    settling: int = 40
    coarse_sync_window: float = 20.0
    max_sro_ppm: float = 250.0
    sample_rate: int = 16000

    def validate(self) -> None:
        if not is_power_of_two(self.fft_size):
            raise InvalidArgumentError(f"fft_size must be a power of two, got {self.fft_size}")
        if not 0 < self.frame_shift <= self.fft_size:
            raise InvalidArgumentError(f"frame_shift must be in (0, fft_size], got {self.frame_shift}")
        if self.segment_len < self.fft_size:
            raise InvalidArgumentError(
                f"segment_len {self.segment_len} shorter than fft_size {self.fft_size}"
            )
        if self.segment_shift <= 0:
            raise InvalidArgumentError(f"segment_shift must be positive, got {self.segment_shift}")
        if self.temporal_distance < 1:
            raise InvalidArgumentError(f"temporal_distance must be >= 1, got {self.temporal_distance}")
        if not 0.0 < self.smoothing < 1.0:
            raise InvalidArgumentError(f"smoothing must be in (0, 1), got {self.smoothing}")
        if self.settling < self.temporal_distance:
            raise InvalidArgumentError(
                f"settling ({self.settling}) must be >= temporal_distance ({self.temporal_distance})"
            )
        if self.coarse_sync_window < 0:
            raise InvalidArgumentError(f"coarse_sync_window must be >= 0, got {self.coarse_sync_window}")
        if self.max_sro_ppm <= 0:
            raise InvalidArgumentError(f"max_sro_ppm must be positive, got {self.max_sro_ppm}")
        if self.sample_rate <= 0:
            raise InvalidArgumentError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def num_welch_frames(self) -> int:
        return (self.segment_len - self.fft_size + self.frame_shift) // self.frame_shift

    @property
    def drift_span(self) -> int:
        """ℓ_d·B_s: samples between the two windows of a product."""
        return self.temporal_distance * self.segment_shift

    @property
    def readout_halfwidth(self) -> int:
        return math.ceil(self.max_sro_ppm * PPM * self.drift_span) + 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'DwacdParams':
        return cls(**data)


@dataclass(frozen=True)
class DwacdState:
    """
    Recursive estimator state of one stream pair.

    Attributes:
        smoothed_product: P̄ over the full N bins (zeros before the first update)
        comp_shift: τ_comp used for the last processed segment
        last_sro: ε̂ of the previous segment (ppm)
        segment_index: next segment to process
        coarse_offset: integer read offset of node 2
        num_updates: gated P̄ updates so far
        settled: a valid readout has been emitted
        delay_estimate: accumulated delay through the previous segment (samples)
    """
    smoothed_product: np.ndarray
    comp_shift: int = 0
    last_sro: float = 0.0
    segment_index: int = 0
    coarse_offset: int = 0
    num_updates: int = 0
    settled: bool = False
    delay_estimate: float = 0.0


@dataclass(frozen=True)
class SroReadout:
    sro_ppm: float
    refined_lag: float
    saturated: bool


def initial_state(params: DwacdParams, coarse_offset: int = 0) -> DwacdState:
    return DwacdState(
        smoothed_product=np.zeros(params.fft_size, dtype=complex),
        coarse_offset=int(coarse_offset),
    )


# ─── coarse synchronization ──────────────────────────────────────────────────

def coarse_sync(
    x1: np.ndarray,
    x2: np.ndarray,
    mask: ActivityMask,
    params: DwacdParams = DwacdParams(),
) -> int:
    """
    Integer offset of x2 relative to x1 over the first ``coarse_sync_window``
    seconds of activity (mask of x1).

    The result is the dsp lag convention: x2[n + offset] ≈ x1[n].  x2 is
    taken ±1.1 s around the window, so lags inside the range are not biased
    by truncation.

    Raises:
        CoarseSyncError: Not enough activity, degenerate input, or the peak
            sits on the search boundary
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    fs = params.sample_rate
    window = int(round(params.coarse_sync_window * fs))
    max_lag = math.ceil(COARSE_MAX_LAG_SECONDS * fs)

    active = np.flatnonzero(mask.sample_mask())
    if window <= 0 or len(active) < window:
        raise CoarseSyncError(
            f"Coarse sync unavailable: {len(active) / fs:.1f} s of activity, "
            f"{params.coarse_sync_window:.1f} s required"
        )
    start = int(active[0])
    stop = int(active[window - 1]) + 1

    reference = np.pad(x1[start:stop], (max_lag, max_lag))
    lo, hi = start - max_lag, stop + max_lag
    search = np.zeros(hi - lo)
    src_lo, src_hi = max(lo, 0), min(hi, len(x2))
    if src_hi > src_lo:
        search[src_lo - lo:src_hi - lo] = x2[src_lo:src_hi]

    try:
        peak = cross_correlate_offset(reference, search, max_lag)
    except DegenerateInputError as e:
        raise CoarseSyncError(f"Coarse sync unavailable: {e}") from e
    if peak.at_boundary:
        raise CoarseSyncError(f"Coarse sync offset beyond ±{max_lag} samples (peak at {peak.lag})")

    logger.info(f"Coarse sync: offset {peak.lag} samples over [{start}, {stop})")
    return peak.lag


# ─── coherence drift ─────────────────────────────────────────────────────────

def estimate_coherence(
    seg1: np.ndarray,
    seg2: np.ndarray,
    prev_sro: float,
    params: DwacdParams = DwacdParams(),
) -> np.ndarray:
    """
    Welch coherence Γ(k) = Φ12/√(Φ11·Φ22) of two N_W segments on all N bins.

    Frame κ of seg2 is rotated by exp(+j·2πk/N·κ·B·prev_sro·1e-6) to
    undo the drift inside the segment.  Auto-PSDs are floored at
    1e-12 times their mean.
    """
    seg1 = np.asarray(seg1, dtype=float)
    seg2 = np.asarray(seg2, dtype=float)
    if len(seg1) != params.segment_len or len(seg2) != params.segment_len:
        raise InvalidArgumentError(
            f"Segments must have {params.segment_len} samples, got {len(seg1)} and {len(seg2)}"
        )

    n, b = params.fft_size, params.frame_shift
    window = get_window('blackman', n)
    frames1 = np.lib.stride_tricks.sliding_window_view(seg1, n)[::b] * window
    frames2 = np.lib.stride_tricks.sliding_window_view(seg2, n)[::b] * window
    spec1 = np.fft.rfft(frames1, axis=1)
    spec2 = np.fft.rfft(frames2, axis=1)

    k = np.arange(n // 2 + 1)
    kappa = np.arange(spec2.shape[0])
    spec2 = spec2 * np.exp(2j * np.pi * kappa[:, None] * k[None, :] * b * prev_sro * PPM / n)

    cross = np.mean(spec1 * np.conj(spec2), axis=0)
    auto1 = np.mean(np.abs(spec1) ** 2, axis=0)
    auto2 = np.mean(np.abs(spec2) ** 2, axis=0)
    tiny = np.finfo(float).tiny
    auto1 = np.maximum(auto1, max(PSD_FLOOR * float(np.mean(auto1)), tiny))
    auto2 = np.maximum(auto2, max(PSD_FLOOR * float(np.mean(auto2)), tiny))

    return one_sided_to_full(cross / np.sqrt(auto1 * auto2), n)


def coherence_product(gamma_now: np.ndarray, gamma_past: np.ndarray) -> np.ndarray:
    """P(k) = Γ_now(k)·conj(Γ_past(k))."""
    gamma_now = np.asarray(gamma_now)
    gamma_past = np.asarray(gamma_past)
    if gamma_now.shape != gamma_past.shape:
        raise InvalidArgumentError(f"Coherence shapes differ: {gamma_now.shape} vs {gamma_past.shape}")
    return gamma_now * np.conj(gamma_past)


def update_smoothed(
    state: DwacdState,
    product: np.ndarray,
    gate: bool,
    smoothing: float = DwacdParams.smoothing,
) -> DwacdState:
    """P̄ ← α·P̄ + (1-α)·P when the gate is open; otherwise the state is returned as is."""
    if not gate:
        return state
    smoothed = smoothing * state.smoothed_product + (1.0 - smoothing) * np.asarray(product)
    return replace(state, smoothed_product=smoothed, num_updates=state.num_updates + 1)


def read_sro(smoothed: np.ndarray, params: DwacdParams = DwacdParams()) -> SroReadout:
    """
    GCC readout of the smoothed product.

    Raises:
        NotSettledError: All-zero product
    """
    smoothed = np.asarray(smoothed, dtype=complex)
    if not np.any(np.abs(smoothed) > 0):
        raise NotSettledError("Smoothed coherence product is zero: estimator not settled")
    result = lag_search(smoothed, params.readout_halfwidth)
    sro = -result.refined_lag / params.drift_span / PPM
    saturated = result.at_boundary or abs(sro) >= params.max_sro_ppm
    return SroReadout(sro_ppm=float(sro), refined_lag=result.refined_lag, saturated=saturated)


def sro_from_smoothed(smoothed: np.ndarray, params: DwacdParams = DwacdParams()) -> float:
    """
    ε̂ = -λ_max/(ℓ_d·B_s) in ppm.

    Readouts on the edge of ±max_sro_ppm are logged as saturated.

    Raises:
        NotSettledError: All-zero product
    """
    readout = read_sro(smoothed, params)
    if readout.saturated:
        logger.warning(
            f"SRO readout saturated at {readout.sro_ppm:.2f} ppm (range ±{params.max_sro_ppm} ppm)"
        )
    return readout.sro_ppm


# ─── estimator ───────────────────────────────────────────────────────────────

def _in_range(start: int, length: int, total: int) -> bool:
    return start >= 0 and start + length <= total


class DwacdEstimator(SroEstimator):
    """Online DWACD over a complete pair of streams, one segment at a time."""

    name = 'dwacd'

    def __init__(self, params: DwacdParams = DwacdParams(), sad: SadParams = SadParams()):
        params.validate()
        sad.validate()
        super().__init__(params)
        self.sad = sad

    def describe(self) -> dict:
        info = super().describe()
        info['sad'] = self.sad.to_dict()
        return info

    def _gate(
        self,
        index: int,
        starts: Tuple[int, int, int, int],
        x1_len: int,
        x2_len: int,
        mask1: ActivityMask,
        mask2: ActivityMask,
    ) -> bool:
        p = self.params
        if index < p.temporal_distance:
            return False
        now1, past1, now2, past2 = starts
        n_w = p.segment_len
        if not (_in_range(now1, n_w, x1_len) and _in_range(past1, n_w, x1_len)):
            return False
        if not (_in_range(now2, n_w, x2_len) and _in_range(past2, n_w, x2_len)):
            return False
        ratio = self.sad.min_ratio
        return (
            segment_is_active(mask1, now1, n_w, ratio)
            and segment_is_active(mask1, past1, n_w, ratio)
            and segment_is_active(mask2, now2, n_w, ratio)
            and segment_is_active(mask2, past2, n_w, ratio)
        )

    def step(
        self,
        x1: np.ndarray,
        x2: np.ndarray,
        mask1: ActivityMask,
        mask2: ActivityMask,
        state: DwacdState,
    ) -> Tuple[DwacdState, Optional[SroReadout], bool]:
        """
        Process segment ``state.segment_index``.

        Returns:
            (new state, readout or None, gate)
        """
        p = self.params
        index = state.segment_index
        if index == 0:
            comp = int(round(p.segment_len / 2.0 * state.last_sro * PPM))
        else:
            comp = int(round(state.delay_estimate + p.segment_shift * state.last_sro * PPM))

        now1 = index * p.segment_shift
        past1 = (index - p.temporal_distance) * p.segment_shift
        now2 = now1 + state.coarse_offset + comp
        past2 = past1 + state.coarse_offset + comp
        gate = self._gate(index, (now1, past1, now2, past2), len(x1), len(x2), mask1, mask2)

        state = replace(state, comp_shift=comp)
        if gate:
            n_w = p.segment_len
            gamma_now = estimate_coherence(x1[now1:now1 + n_w], x2[now2:now2 + n_w], state.last_sro, p)
            gamma_past = estimate_coherence(x1[past1:past1 + n_w], x2[past2:past2 + n_w], state.last_sro, p)
            state = update_smoothed(state, coherence_product(gamma_now, gamma_past), True, p.smoothing)

        readout = None
        ready = index >= p.settling and state.num_updates >= p.settling - p.temporal_distance
        if gate and ready:
            try:
                readout = read_sro(state.smoothed_product, p)
            except NotSettledError:
                readout = None
        return replace(state, segment_index=index + 1), readout, gate

    def run(
        self,
        x1: np.ndarray,
        x2: np.ndarray,
        mask1: Optional[ActivityMask] = None,
        mask2: Optional[ActivityMask] = None,
    ) -> EstimateTrace:
        """
        Estimate ε̂_12 for every segment of x1.

        Raises:
            InsufficientSamplesError: Fewer than ℓ_d + 1 segments
            CoarseSyncError: Coarse synchronization failed
        """
        p = self.params
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if len(x1) < p.segment_len or (len(x1) - p.segment_len) // p.segment_shift + 1 <= p.temporal_distance:
            raise InsufficientSamplesError(
                f"Need more than {p.temporal_distance} segments of {p.segment_len} samples, got {len(x1)} samples"
            )
        num_segments = (len(x1) - p.segment_len) // p.segment_shift + 1

        mask1 = mask1 if mask1 is not None else self.sad.detect(x1)
        mask2 = mask2 if mask2 is not None else self.sad.detect(x2)
        offset = coarse_sync(x1, x2, mask1, p) if p.coarse_sync_window > 0 else 0

        self.update_state({'status': 'running', 'coarse_offset': offset, 'num_segments': num_segments})
        logger.info(f"DWACD: {num_segments} segments, coarse offset {offset}")

        state = initial_state(p, offset)
        sro: List[float] = []
        valid: List[bool] = []
        saturated = 0
        for index in range(num_segments):
            state, readout, _ = self.step(x1, x2, mask1, mask2, state)
            if readout is None:
                sro.append(state.last_sro)
                valid.append(False)
            else:
                saturated += int(readout.saturated)
                sro.append(readout.sro_ppm)
                valid.append(True)

            if valid[-1] and not state.settled:
                # earlier segments take over the first settled estimate
                sro[:index] = [readout.sro_ppm] * index
                delay = float(delay_from_sro(np.array(sro), p.segment_shift, p.segment_len)[-1])
                state = replace(state, settled=True)
                logger.debug(f"DWACD settled at segment {index}: {readout.sro_ppm:.3f} ppm")
            else:
                weight = p.segment_len / 2.0 if index == 0 else p.segment_shift
                delay = state.delay_estimate + weight * sro[-1] * PPM
            state = replace(state, last_sro=sro[-1], delay_estimate=delay)

        if saturated:
            logger.warning(f"DWACD: {saturated} readouts saturated the ±{p.max_sro_ppm} ppm range")
        if not any(valid):
            logger.warning("DWACD never settled: no valid estimates")

        fs = p.sample_rate
        points = [
            SroTracePoint(
                segment_index=i,
                time=(i * p.segment_shift + p.segment_len / 2.0) / fs,
                sro_estimate=float(sro[i]),
                valid=bool(valid[i]),
            )
            for i in range(num_segments)
        ]
        self.update_state({'status': 'completed', 'valid_segments': int(sum(valid))})
        return EstimateTrace(
            points=points,
            segment_shift=p.segment_shift,
            segment_len=p.segment_len,
            sample_rate=fs,
            coarse_offset=offset,
            estimator=self.name,
            metadata={'saturated_readouts': saturated, 'final_state_updates': state.num_updates},
        )


def run_dwacd(
    x1: np.ndarray,
    x2: np.ndarray,
    params: DwacdParams = DwacdParams(),
    mask1: Optional[ActivityMask] = None,
    mask2: Optional[ActivityMask] = None,
    sad: SadParams = SadParams(),
) -> List[SroTracePoint]:
    """Segment-wise SRO trace of x2 relative to x1 (see DwacdEstimator.run)."""
    return DwacdEstimator(params, sad).run(x1, x2, mask1, mask2).points
