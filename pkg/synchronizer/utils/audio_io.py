"""WAV ingestion and export (soundfile)."""

import io
import logging
from math import gcd
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf
from scipy import signal as sps

from ..errors import IngestionError
from .atomic_write import atomic_write


logger = logging.getLogger(__name__)

SUBTYPES = {'pcm16': 'PCM_16', 'float': 'FLOAT'}


def ingest_wav(
    path: Union[str, Path],
    sample_rate: int = 16000,
    resample: bool = False,
) -> np.ndarray:
    """
    Read a mono WAV file as float samples in [-1, 1).

    Args:
        path: WAV file path
        sample_rate: Expected sample rate
        resample: Polyphase-resample (scipy.signal.resample_poly) when the
            header rate differs; otherwise a rate mismatch is an error

    Returns:
        1-D float64 array

    Raises:
        IngestionError: Missing file, unsupported format, non-mono data,
            empty data chunk, rate mismatch without resampling
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"Audio file not found: {path}")

    try:
        data, file_rate = sf.read(str(path), dtype='float64', always_2d=True)
    except RuntimeError as e:
        raise IngestionError(f"Unsupported audio format in {path}: {e}") from e

    if data.shape[1] != 1:
        raise IngestionError(f"Expected mono audio, {path} has {data.shape[1]} channels")
    if data.shape[0] == 0:
        raise IngestionError(f"Empty audio: {path}")

    samples = data[:, 0]
    if file_rate != sample_rate:
        if not resample:
            raise IngestionError(
                f"Sample rate mismatch in {path}: {file_rate} Hz, expected {sample_rate} Hz"
            )
        common = gcd(int(file_rate), int(sample_rate))
        samples = sps.resample_poly(samples, sample_rate // common, file_rate // common)
        logger.info(f"Resampled {path.name}: {file_rate} -> {sample_rate} Hz")

    return samples


def write_wav(
    path: Union[str, Path],
    samples: np.ndarray,
    sample_rate: int = 16000,
    subtype: str = 'float',
) -> Path:
    """Write a mono WAV file atomically ('pcm16' clips to full scale)."""
    if subtype not in SUBTYPES:
        raise ValueError(f"Unknown WAV subtype '{subtype}', expected one of {sorted(SUBTYPES)}")
    samples = np.asarray(samples, dtype=float)
    if subtype == 'pcm16':
        peak = np.max(np.abs(samples)) if len(samples) else 0.0
        if peak > 1.0:
            logger.warning(f"Clipping {path}: peak {peak:.3f} exceeds full scale")
        samples = np.clip(samples, -1.0, 32767 / 32768)

    buf = io.BytesIO()
    sf.write(buf, samples, sample_rate, subtype=SUBTYPES[subtype], format='WAV')
    return atomic_write(path, buf.getvalue())
