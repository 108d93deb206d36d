"""Asynchronous sampling model: apply STO and a time-varying SRO to a signal.

A node with sampling-time offset T and SRO trajectory ε̄[l] sees frame l of
the synchronous signal shifted by the accumulated delay

    δ̄[l] = -T·fs + N/2·ε̄[0]·1e-6 + Σ_{l'=1..l} ε̄[l']·1e-6·B

(positive δ̄ = delayed).  The per-sample delay δ(n) is the linear
interpolation of δ̄ between frame centers l·B + N/2.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .dsp import frame_positions, get_window, windowed_sinc
from .errors import (
    DegenerateInputError,
    InvalidArgumentError,
    ModelValidityError,
    TrajectoryError,
)
from .sro_model import SroTrajectory
from .utils.atomic_write import atomic_write_csv


logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 16000
MAX_STO_SECONDS = 1.0
PPM = 1e-6

# frames per STFT batch inside the resampler
_CHUNK_FRAMES = 512


@dataclass(frozen=True)
class AsyncSpec:
    """Per-node asynchrony: start offset T (seconds) and SRO trajectory."""
    sto_seconds: float
    trajectory: SroTrajectory
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def validate(self) -> None:
        if abs(self.sto_seconds) > MAX_STO_SECONDS:
            raise InvalidArgumentError(
                f"|sto_seconds| must be <= {MAX_STO_SECONDS}, got {self.sto_seconds}"
            )
        if self.sample_rate <= 0:
            raise InvalidArgumentError(f"sample_rate must be positive, got {self.sample_rate}")


@dataclass(frozen=True)
class DelayCurve:
    """Per-frame accumulated delay δ̄[l] in samples."""
    per_frame_delay: np.ndarray
    frame_size: int
    frame_shift: int

    def __len__(self) -> int:
        return len(self.per_frame_delay)

    @property
    def frame_centers(self) -> np.ndarray:
        return frame_positions(len(self.per_frame_delay), self.frame_shift, self.frame_size)

    def at_samples(self, positions: np.ndarray) -> np.ndarray:
        """δ(n) at arbitrary sample positions (held constant beyond the ends)."""
        return np.interp(positions, self.frame_centers, self.per_frame_delay)

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = (
            (i, float(c), float(d))
            for i, (c, d) in enumerate(zip(self.frame_centers, self.per_frame_delay))
        )
        return atomic_write_csv(path, ('frame_index', 'center_sample', 'delay_samples'), rows)


def num_frames_for(length: int, frame_size: int, frame_shift: int) -> int:
    """Frames of size N and shift B fully inside ``length`` samples (at least 1)."""
    if length < frame_size:
        return 1
    return (length - frame_size) // frame_shift + 1


def accumulated_delay(spec: AsyncSpec, num_frames: int, frame_size: int, frame_shift: int) -> DelayCurve:
    """
    Evaluate the accumulated frame delay δ̄[l] for l < num_frames.

    Raises:
        TrajectoryError: Trajectory shorter than num_frames
    """
    spec.validate()
    if num_frames < 1:
        raise InvalidArgumentError(f"num_frames must be >= 1, got {num_frames}")
    values = np.asarray(spec.trajectory.values, dtype=float)
    if num_frames > len(values):
        raise TrajectoryError(
            f"Trajectory too short: {len(values)} steps for {num_frames} frames"
        )

    ratio = values[:num_frames] * PPM
    increments = ratio * frame_shift
    increments[0] = 0.0
    delay = -spec.sto_seconds * spec.sample_rate + frame_size / 2.0 * ratio[0] + np.cumsum(increments)
    return DelayCurve(per_frame_delay=delay, frame_size=frame_size, frame_shift=frame_shift)


def _overlap_add(blocks_per_frame: np.ndarray, start_frame: int, out_blocks: np.ndarray) -> None:
    """Add frames (F × R × B) into block storage starting at block ``start_frame``."""
    num, overlap, _ = blocks_per_frame.shape
    for r in range(overlap):
        out_blocks[start_frame + r:start_frame + r + num] += blocks_per_frame[:, r, :]


def apply_async_stft(
    x: np.ndarray,
    spec: AsyncSpec,
    frame_size: int = 4096,
    frame_shift: int = 1024,
) -> np.ndarray:
    """
    STFT-domain resampler.

    Every frame is phase-shifted by its accumulated delay
    exp(-j·2πk/N·δ̄[l]) on the one-sided bins and resynthesized by
    Hann-windowed overlap-add with the squared-window sum normalized out.
    Output length equals input length.

    Raises:
        InvalidArgumentError: Frame shift does not divide the frame size
        ModelValidityError: max|δ̄| > N/4
        TrajectoryError: Trajectory does not cover the signal
    """
    x = np.asarray(x, dtype=float)
    if frame_size % frame_shift != 0:
        raise InvalidArgumentError(f"frame_shift {frame_shift} must divide frame_size {frame_size}")

    length = len(x)
    curve = accumulated_delay(spec, num_frames_for(length, frame_size, frame_shift), frame_size, frame_shift)
    max_shift = float(np.max(np.abs(curve.per_frame_delay)))
    if max_shift > frame_size / 4:
        raise ModelValidityError(
            f"Shift exceeds model validity: max|delay|={max_shift:.1f} > N/4={frame_size / 4:.0f}"
        )

    overlap = frame_size // frame_shift
    pad = frame_size - frame_shift
    num_blocks = -(-length // frame_shift) + 2 * (overlap - 1)
    padded = np.zeros(num_blocks * frame_shift)
    padded[pad:pad + length] = x

    num_frames = num_blocks - overlap + 1
    frame_index = np.arange(num_frames) - (overlap - 1)
    delays = curve.per_frame_delay[np.clip(frame_index, 0, len(curve) - 1)]

    window = get_window('hann', frame_size)
    k = np.arange(frame_size // 2 + 1)
    out_blocks = np.zeros((num_blocks, frame_shift))
    norm_blocks = np.zeros((num_blocks, frame_shift))
    win_sq = (window ** 2).reshape(1, overlap, frame_shift)
    frames_view = np.lib.stride_tricks.sliding_window_view(padded, frame_size)[::frame_shift]

    for start in range(0, num_frames, _CHUNK_FRAMES):
        stop = min(start + _CHUNK_FRAMES, num_frames)
        spectra = np.fft.rfft(frames_view[start:stop] * window, axis=1)
        spectra *= np.exp(-2j * np.pi * k[None, :] * delays[start:stop, None] / frame_size)
        synth = np.fft.irfft(spectra, n=frame_size, axis=1) * window
        _overlap_add(synth.reshape(-1, overlap, frame_shift), start, out_blocks)
        _overlap_add(np.broadcast_to(win_sq, (stop - start, overlap, frame_shift)), start, norm_blocks)

    out = out_blocks.reshape(-1)
    norm = norm_blocks.reshape(-1)
    out = np.divide(out, norm, out=np.zeros_like(out), where=norm > 1e-12)
    return out[pad:pad + length]


def apply_async_sinc(
    x: np.ndarray,
    spec: AsyncSpec,
    frame_size: int = 4096,
    frame_shift: int = 1024,
    num_taps: int = 64,
    beta: float = 8.0,
    chunk: int = 1 << 15,
) -> np.ndarray:
    """
    Time-domain reference resampler: y[n] = x(n - δ(n)) by Kaiser-windowed sinc.

    δ(n) is interpolated linearly from the DelayCurve that ``apply_async_stft``
    uses with the same frame parameters.
    """
    x = np.asarray(x, dtype=float)
    length = len(x)
    curve = accumulated_delay(spec, num_frames_for(length, frame_size, frame_shift), frame_size, frame_shift)
    half = num_taps // 2
    taps = np.arange(-half + 1, half + 1)
    padded = np.concatenate([np.zeros(half), x, np.zeros(half + 1)])

    out = np.empty(length)
    for start in range(0, length, chunk):
        n = np.arange(start, min(start + chunk, length))
        t = n - curve.at_samples(n)
        base = np.floor(t).astype(np.int64)
        idx = base[:, None] + taps[None, :]
        kernel = windowed_sinc(t[:, None] - idx, half_width=half, beta=beta)
        inside = (idx >= -half) & (idx < length + half + 1)
        samples = np.where(inside, padded[np.clip(idx + half, 0, len(padded) - 1)], 0.0)
        out[n] = np.sum(kernel * samples, axis=1)
    return out


def add_sensor_noise(
    x: np.ndarray,
    target_snr_db: float,
    reference: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> np.ndarray:
    """
    Add white Gaussian noise at a target SNR.

    Signal power is measured over the active (nonzero) samples of
    ``reference`` (``x`` itself if omitted); the noise is rescaled so its
    empirical power matches exactly.  ``target_snr_db = inf`` returns a copy.

    Raises:
        DegenerateInputError: Zero-energy reference
    """
    x = np.asarray(x, dtype=float)
    if np.isposinf(target_snr_db):
        return x.copy()

    ref = x if reference is None else np.asarray(reference, dtype=float)
    active = ref[ref != 0]
    if len(active) == 0:
        raise DegenerateInputError("Zero-energy reference: cannot calibrate SNR")

    signal_power = float(np.mean(active ** 2))
    noise_power = signal_power / 10.0 ** (target_snr_db / 10.0)

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(x))
    noise *= np.sqrt(noise_power / np.mean(noise ** 2))
    return x + noise


def compensate_sro(
    x: np.ndarray,
    positions: np.ndarray,
    sro_ppm: np.ndarray,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    frame_size: int = 4096,
    frame_shift: int = 1024,
) -> np.ndarray:
    """
    Undo an estimated SRO by replaying it negated through the STFT resampler.

    Args:
        x: Signal of the node to compensate
        positions: Sample positions of the SRO estimates (e.g. segment centers)
        sro_ppm: SRO estimates at those positions
        sample_rate: Nominal sample rate
        frame_size: Resampler frame size
        frame_shift: Resampler frame shift

    Returns:
        Compensated signal, same length as x
    """
    positions = np.asarray(positions, dtype=float)
    sro_ppm = np.asarray(sro_ppm, dtype=float)
    if len(positions) == 0 or len(positions) != len(sro_ppm):
        raise InvalidArgumentError("compensate_sro needs matching, non-empty positions and estimates")

    num_frames = num_frames_for(len(x), frame_size, frame_shift)
    centers = frame_positions(num_frames, frame_shift, frame_size)
    per_frame = np.interp(centers, positions, sro_ppm)
    trajectory = SroTrajectory(values=-per_frame, step_duration=frame_shift / sample_rate)
    spec = AsyncSpec(sto_seconds=0.0, trajectory=trajectory, sample_rate=sample_rate)
    logger.debug(f"Compensating {len(x)} samples with mean SRO {np.mean(sro_ppm):.3f} ppm")
    return apply_async_stft(x, spec, frame_size, frame_shift)
