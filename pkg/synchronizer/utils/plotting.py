"""SVG figures for evaluation reports (matplotlib, Agg backend)."""

import io
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .atomic_write import atomic_write  # noqa: E402


logger = logging.getLogger(__name__)

# fixed element ids so identical data gives identical files
matplotlib.rcParams['svg.hashsalt'] = 'wasn-sync'


def _save_svg(fig, path: Union[str, Path]) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format='svg', metadata={'Date': None}, bbox_inches='tight')
    plt.close(fig)
    return atomic_write(path, buf.getvalue())


def plot_sro_trace(
    path: Union[str, Path],
    time_s: np.ndarray,
    estimate_ppm: np.ndarray,
    valid: np.ndarray,
    truth_ppm: Optional[np.ndarray] = None,
    title: str = '',
) -> Path:
    """Estimated SRO over time (settled segments solid) against the reference."""
    fig, ax = plt.subplots(figsize=(8, 3.5))
    estimate = np.where(valid, estimate_ppm, np.nan)
    if truth_ppm is not None:
        ax.plot(time_s, truth_ppm, color='0.4', linestyle='--', linewidth=1.0, label='reference')
    ax.plot(time_s, estimate, linewidth=1.2, label='estimate')
    ax.set_xlabel('time / s')
    ax.set_ylabel('SRO / ppm')
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc='best')
    return _save_svg(fig, path)


def plot_sto_sweep(path: Union[str, Path], errors_by_length: Dict[float, Sequence[float]]) -> Path:
    """Box plot of |STO error| per signal length."""
    lengths = sorted(errors_by_length)
    data = [np.abs(np.asarray(errors_by_length[length], dtype=float)) for length in lengths]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if any(len(d) for d in data):
        ax.boxplot([d if len(d) else [np.nan] for d in data])
        ax.set_xticks(range(1, len(lengths) + 1))
        ax.set_xticklabels([f"{length / 60:g}" for length in lengths])
    ax.axhline(10.0, color='0.5', linestyle=':', linewidth=1.0)
    ax.set_xlabel('signal length / min')
    ax.set_ylabel('|STO error| / samples')
    ax.grid(alpha=0.3)
    return _save_svg(fig, path)


def plot_trajectory(path: Union[str, Path], time_s: np.ndarray, values_ppm: np.ndarray, title: str = '') -> Path:
    """One simulated SRO trajectory."""
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(time_s, values_ppm, linewidth=1.0)
    ax.set_xlabel('time / s')
    ax.set_ylabel('SRO / ppm')
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    return _save_svg(fig, path)
