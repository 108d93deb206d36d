"""Deterministic DSP primitives shared by the simulator and the estimators.

Lag convention (package-wide): a positive lag means the second argument is
delayed relative to the first.  ``cross_correlate_offset(x, y)`` returns +d
and ``gcc_phat(a, b)`` returns +d when ``y``/``b`` lags behind by d samples.
``lag_search`` follows the IFFT convention: a spectrum ``exp(j2πkλ0/N)``
is an impulse at -λ0.

All functions are pure; nothing here keeps state between calls.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import signal as sps

from .errors import DegenerateInputError, InsufficientSamplesError, InvalidArgumentError


logger = logging.getLogger(__name__)

WINDOW_IDS = ('rectangular', 'blackman', 'hann')

# PhaT / PSD floor
PHAT_FLOOR = 1e-12

# golden-section tolerance for lag refinement, in lag units
LAG_REFINE_TOL = 1e-4

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Spectrogram:
    """STFT frames with the full N bins retained.

    Frame ℓ covers input samples [ℓ·B, ℓ·B + N).
    """
    frames: np.ndarray
    frame_size: int
    frame_shift: int
    window_id: str

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class GccResult:
    """Peak of a generalized cross-correlation.

    Attributes:
        integer_lag: argmax over integer lags (signed samples)
        refined_lag: golden-section refinement within ±0.5 of integer_lag
        peak_magnitude: normalized one-sided GCC magnitude at refined_lag
        at_boundary: integer peak sits on the edge of the search range
    """
    integer_lag: int
    refined_lag: float
    peak_magnitude: float
    at_boundary: bool = False


@dataclass(frozen=True)
class CorrelationPeak:
    """Integer cross-correlation peak (see ``cross_correlate_offset``)."""
    lag: int
    value: float
    at_boundary: bool


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def get_window(window_id: str, size: int) -> np.ndarray:
    """Periodic (DFT-even) analysis window."""
    if window_id not in WINDOW_IDS:
        raise InvalidArgumentError(f"Unknown window '{window_id}', expected one of {WINDOW_IDS}")
    if window_id == 'rectangular':
        return np.ones(size)
    return sps.get_window(window_id, size, fftbins=True)


def stft(x: np.ndarray, frame_size: int, frame_shift: int, window: str = 'blackman') -> Spectrogram:
    """
    Frame-wise FFT of a real signal.

    Args:
        x: Input samples
        frame_size: N, power of two
        frame_shift: B, 0 < B <= N
        window: One of ``WINDOW_IDS``

    Returns:
        Spectrogram with floor((len - N)/B) + 1 frames of N bins

    Raises:
        InvalidArgumentError: N not a power of two or B out of range
        InsufficientSamplesError: Signal shorter than one frame
    """
    if not is_power_of_two(frame_size):
        raise InvalidArgumentError(f"Frame size must be a power of two, got {frame_size}")
    if not 0 < frame_shift <= frame_size:
        raise InvalidArgumentError(f"Frame shift must be in (0, {frame_size}], got {frame_shift}")

    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < frame_size:
        raise InsufficientSamplesError(
            f"Insufficient samples: need at least {frame_size}, got {x.shape[-1] if x.ndim else 0}"
        )

    win = get_window(window, frame_size)
    slices = np.lib.stride_tricks.sliding_window_view(x, frame_size)[::frame_shift]
    frames = np.fft.fft(slices * win, axis=1)
    return Spectrogram(frames=frames, frame_size=frame_size, frame_shift=frame_shift, window_id=window)


def one_sided_to_full(half: np.ndarray, n: int) -> np.ndarray:
    """Complete a one-sided spectrum (bins 0..N/2) to N bins with conjugate symmetry."""
    half = np.asarray(half)
    if half.shape[-1] != n // 2 + 1:
        raise InvalidArgumentError(f"Expected {n // 2 + 1} one-sided bins, got {half.shape[-1]}")
    upper = np.conj(half[..., -2:0:-1])
    return np.concatenate([half, upper], axis=-1)


def _pick_peak(lags: np.ndarray, values: np.ndarray, rtol: float = 1e-9) -> int:
    """Index of the maximum; ties go to the smallest |lag|, then the negative lag."""
    vmax = values.max()
    tied = np.flatnonzero(values >= vmax - rtol * abs(vmax))
    if len(tied) == 1:
        return int(tied[0])
    order = sorted(tied, key=lambda i: (abs(int(lags[i])), int(lags[i])))
    return int(order[0])


def cross_correlate_offset(x: np.ndarray, y: np.ndarray, max_lag: int) -> CorrelationPeak:
    """
    Integer lag maximizing Σ x[n]·y[n+λ] over λ ∈ [-max_lag, max_lag].

    Returns +d when y is x delayed by d samples.

    Raises:
        InvalidArgumentError: Empty input or max_lag too large
        DegenerateInputError: All-zero input (no unique peak)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) == 0 or len(y) == 0:
        raise InvalidArgumentError("Cross-correlation needs non-empty inputs")
    if not 0 <= max_lag < min(len(x), len(y)):
        raise InvalidArgumentError(
            f"max_lag={max_lag} must be below min(len(x), len(y))={min(len(x), len(y))}"
        )
    if not np.any(x) or not np.any(y):
        raise DegenerateInputError("Degenerate correlation: zero-energy input")

    corr = sps.correlate(y, x, mode='full')
    lags = sps.correlation_lags(len(y), len(x), mode='full')
    window = (lags >= -max_lag) & (lags <= max_lag)
    lags, corr = lags[window], corr[window]

    idx = _pick_peak(lags, corr)
    lag = int(lags[idx])
    at_boundary = max_lag > 0 and abs(lag) == max_lag
    if at_boundary:
        logger.warning(f"Correlation peak at search boundary (lag={lag}, max_lag={max_lag})")
    return CorrelationPeak(lag=lag, value=float(corr[idx]), at_boundary=at_boundary)


def golden_section_max(
    objective: Callable[[float], float],
    a: float,
    b: float,
    tol: float = LAG_REFINE_TOL,
) -> float:
    """
    Maximize a unimodal function on [a, b] by golden-section search.

    Stops once the bracket is no wider than 2·tol and returns its midpoint,
    so the result is within tol of the true maximizer.

    Raises:
        InvalidArgumentError: a >= b or tol <= 0
    """
    if not a < b:
        raise InvalidArgumentError(f"Golden-section bracket needs a < b, got [{a}, {b}]")
    if tol <= 0:
        raise InvalidArgumentError(f"Tolerance must be positive, got {tol}")

    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = objective(c), objective(d)

    while (b - a) > 2.0 * tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = objective(d)

    return 0.5 * (a + b)


def _one_sided_gcc(gcpsd: np.ndarray) -> Callable[[float], float]:
    n = len(gcpsd)
    half = gcpsd[: n // 2 + 1]
    k = np.arange(n // 2 + 1)

    def objective(lag: float) -> float:
        return float(np.abs(np.dot(half, np.exp(2j * np.pi * k * lag / n))) / len(k))

    return objective


def lag_search(gcpsd: np.ndarray, search_halfwidth: int) -> GccResult:
    """
    Locate the GCC peak of a generalized cross power spectral density.

    The integer lag is the argmax of |IFFT{gcpsd}| over
    [-search_halfwidth, search_halfwidth] (negative lags modulo N).  The
    refined lag maximizes the one-sided sum |Σ_{k<=N/2} gcpsd(k)·e^{j2πkλ/N}|
    over [λ-0.5, λ+0.5] to LAG_REFINE_TOL.

    Raises:
        InvalidArgumentError: Spectrum length not a power of two
        DegenerateInputError: All-zero spectrum
    """
    gcpsd = np.asarray(gcpsd, dtype=complex)
    n = len(gcpsd)
    if not is_power_of_two(n):
        raise InvalidArgumentError(f"GCPSD length must be a power of two, got {n}")
    if not np.any(np.abs(gcpsd) > 0):
        raise DegenerateInputError("Degenerate spectrum: all bins are zero")

    halfwidth = int(min(max(search_halfwidth, 0), n // 2 - 1))
    gcc = np.abs(np.fft.ifft(gcpsd))
    lags = np.arange(-halfwidth, halfwidth + 1)
    idx = _pick_peak(lags, gcc[lags % n])
    integer_lag = int(lags[idx])

    objective = _one_sided_gcc(gcpsd)
    refined = golden_section_max(objective, integer_lag - 0.5, integer_lag + 0.5, LAG_REFINE_TOL)
    peak_at_integer = objective(float(integer_lag))
    peak_refined = objective(refined)
    if peak_refined < peak_at_integer:
        refined, peak_refined = float(integer_lag), peak_at_integer

    return GccResult(
        integer_lag=integer_lag,
        refined_lag=float(refined),
        peak_magnitude=peak_refined,
        at_boundary=halfwidth > 0 and abs(integer_lag) == halfwidth,
    )


def phat_weight(cross_spectrum: np.ndarray) -> np.ndarray:
    """Phase transform: unit magnitude where nonzero, floored at PHAT_FLOOR."""
    return cross_spectrum / np.maximum(np.abs(cross_spectrum), PHAT_FLOOR)


def gcc_phat(seg_a: np.ndarray, seg_b: np.ndarray, max_lag: int) -> GccResult:
    """
    GCC-PhaT delay of seg_b relative to seg_a (no zero padding, no window).

    Raises:
        InvalidArgumentError: Unequal lengths or length not a power of two
        DegenerateInputError: Zero-energy segment
    """
    seg_a = np.asarray(seg_a, dtype=float)
    seg_b = np.asarray(seg_b, dtype=float)
    if seg_a.shape != seg_b.shape or seg_a.ndim != 1:
        raise InvalidArgumentError(f"Segments must be 1-D with equal length, got {seg_a.shape} and {seg_b.shape}")
    if not is_power_of_two(len(seg_a)):
        raise InvalidArgumentError(f"Segment length must be a power of two, got {len(seg_a)}")
    if not np.any(seg_a) or not np.any(seg_b):
        raise DegenerateInputError("Degenerate segment: zero energy")

    spec_a = np.fft.fft(seg_a)
    spec_b = np.fft.fft(seg_b)
    return lag_search(phat_weight(np.conj(spec_a) * spec_b), max_lag)


def windowed_sinc(t: np.ndarray, half_width: int = 32, beta: float = 8.0) -> np.ndarray:
    """Kaiser-windowed sinc kernel evaluated at real offsets t (zero for |t| >= half_width)."""
    t = np.asarray(t, dtype=float)
    ratio = np.clip(t / half_width, -1.0, 1.0)
    window = np.i0(beta * np.sqrt(1.0 - ratio ** 2)) / np.i0(beta)
    return np.where(np.abs(t) < half_width, np.sinc(t) * window, 0.0)


def fractional_delay(x: np.ndarray, delay: float, num_taps: int = 64, beta: float = 8.0) -> np.ndarray:
    """
    Delay a signal by a real number of samples (output length = input length).

    Integer delays are exact shifts; the fractional part uses a
    ``num_taps``-tap Kaiser-windowed sinc.  Samples shifted in from outside
    the input are zero.
    """
    x = np.asarray(x, dtype=float)
    half = num_taps // 2
    n_int = int(math.floor(delay))
    frac = delay - n_int

    taps = np.arange(-half + 1, half + 1)
    kernel = windowed_sinc(taps - frac, half_width=half, beta=beta)
    filtered = sps.fftconvolve(x, kernel) if frac else np.concatenate([np.zeros(half - 1), x, np.zeros(half)])

    shift = n_int - (half - 1)
    idx = np.arange(len(x)) - shift
    valid = (idx >= 0) & (idx < len(filtered))
    out = np.zeros(len(x))
    out[valid] = filtered[idx[valid]]
    return out


def frame_positions(num_frames: int, frame_shift: int, frame_size: int) -> np.ndarray:
    """Center sample of each frame."""
    return np.arange(num_frames) * frame_shift + frame_size / 2.0


def power_db(x: np.ndarray, eps: float = 1e-20) -> float:
    """Mean power in dB (full scale = 0 dB)."""
    x = np.asarray(x, dtype=float)
    return float(10.0 * np.log10(np.mean(x ** 2) + eps))
