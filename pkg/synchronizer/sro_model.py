"""Time-varying sampling-rate offset trajectories (discrete Ornstein-Uhlenbeck)."""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy import signal as sps

from .errors import InvalidArgumentError, TrajectoryError
from .utils.atomic_write import atomic_write_csv


logger = logging.getLogger(__name__)

MAX_MU_INF_PPM = 100.0
MAX_DELTA_START_PPM = 10.0

# steady-state std of a node's SRO around mu_inf
STEADY_STATE_STD_PPM = 1.25
DEFAULT_SIGMA_OU_PPM = 0.05


def default_theta(sigma_ou: float = DEFAULT_SIGMA_OU_PPM, steady_std: float = STEADY_STATE_STD_PPM) -> float:
    """Smoothing factor giving the requested steady-state std (σ²/(2·std²))."""
    if sigma_ou <= 0:
        return default_theta(DEFAULT_SIGMA_OU_PPM, steady_std)
    return sigma_ou ** 2 / (2.0 * steady_std ** 2)


@dataclass(frozen=True)
class OuParams:
    """OU process parameters (all offsets in ppm).

    Attributes:
        theta: Smoothing factor per step, 0 < theta < 1
        mu_inf: Asymptotic mean SRO
        sigma_ou: Innovation std per step
        delta_start: Initial offset from mu_inf
        step_duration: Seconds per process step
    """
    theta: float = default_theta()
    mu_inf: float = 0.0
    sigma_ou: float = DEFAULT_SIGMA_OU_PPM
    delta_start: float = 0.0
    step_duration: float = 1024 / 16000

    def validate(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise InvalidArgumentError(f"theta must be in (0, 1), got {self.theta}")
        if self.sigma_ou < 0:
            raise InvalidArgumentError(f"sigma_ou must be >= 0, got {self.sigma_ou}")
        if abs(self.mu_inf) > MAX_MU_INF_PPM:
            raise InvalidArgumentError(f"|mu_inf| must be <= {MAX_MU_INF_PPM} ppm, got {self.mu_inf}")
        if abs(self.delta_start) > MAX_DELTA_START_PPM:
            raise InvalidArgumentError(
                f"|delta_start| must be <= {MAX_DELTA_START_PPM} ppm, got {self.delta_start}"
            )
        if self.step_duration <= 0:
            raise InvalidArgumentError(f"step_duration must be positive, got {self.step_duration}")

    def stationary_std(self) -> float:
        """std of the stationary distribution, σ/√(1-(1-θ)²)."""
        return float(self.sigma_ou / np.sqrt(1.0 - (1.0 - self.theta) ** 2))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'OuParams':
        return cls(**data)


@dataclass(frozen=True)
class SroTrajectory:
    """SRO values ε[ℓ] in ppm, one value per process step.

    ``params`` is None for derived trajectories (e.g. the node difference).
    """
    values: np.ndarray
    step_duration: float
    params: Optional[OuParams] = None
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.values)

    @property
    def duration(self) -> float:
        return len(self.values) * self.step_duration

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write (step_index, epsilon_ppm) rows."""
        rows = ((i, float(v)) for i, v in enumerate(self.values))
        return atomic_write_csv(path, ('step_index', 'epsilon_ppm'), rows)


def constant_trajectory(sro_ppm: float, num_steps: int, step_duration: float) -> SroTrajectory:
    """Trajectory fixed at one SRO value."""
    if num_steps < 1:
        raise InvalidArgumentError(f"num_steps must be >= 1, got {num_steps}")
    return SroTrajectory(values=np.full(num_steps, float(sro_ppm)), step_duration=step_duration)


def simulate_trajectory(params: OuParams, num_steps: int, seed: Optional[int] = None) -> SroTrajectory:
    """
    Euler-Maruyama OU recursion
    ε[ℓ] = ε[ℓ-1] + θ·(μ∞ - ε[ℓ-1]) + x[ℓ],  x[ℓ] ~ N(0, σ²),  ε[0] = μ∞ + Δ_start.

    The recursion runs as a first-order IIR filter over the innovations.

    Args:
        params: Process parameters
        num_steps: Trajectory length (>= 1)
        seed: RNG seed; same seed and params give a bit-identical trajectory

    Returns:
        SroTrajectory
    """
    params.validate()
    if num_steps < 1:
        raise InvalidArgumentError(f"num_steps must be >= 1, got {num_steps}")

    rng = np.random.default_rng(seed)
    innovations = rng.normal(0.0, params.sigma_ou, size=num_steps)
    innovations[0] = params.delta_start
    deviation = sps.lfilter([1.0], [1.0, -(1.0 - params.theta)], innovations)

    values = params.mu_inf + deviation
    if not np.all(np.isfinite(values)):
        raise TrajectoryError("OU trajectory contains non-finite values")
    return SroTrajectory(values=values, step_duration=params.step_duration, params=params, seed=seed)


def simulate_node_pair(
    params_1: OuParams,
    params_2: OuParams,
    num_steps: int,
    seed: Optional[int] = None,
) -> Tuple[SroTrajectory, SroTrajectory, SroTrajectory]:
    """
    Independent trajectories for two nodes and their difference ε_12 = ε_2 - ε_1.

    Node streams are spawned from one seed so the pair is reproducible.
    """
    seq_1, seq_2 = np.random.SeedSequence(seed).spawn(2)
    traj_1 = simulate_trajectory(params_1, num_steps, seed=int(seq_1.generate_state(1)[0]))
    traj_2 = simulate_trajectory(params_2, num_steps, seed=int(seq_2.generate_state(1)[0]))
    diff = SroTrajectory(
        values=traj_2.values - traj_1.values,
        step_duration=traj_1.step_duration,
        seed=seed,
    )
    return traj_1, traj_2, diff


def trajectory_std(traj: SroTrajectory, burn_in: int = 0) -> float:
    """Sample std (ddof=1) of values[burn_in:] in ppm."""
    if burn_in < 0 or burn_in >= len(traj):
        raise InvalidArgumentError(f"burn_in must be in [0, {len(traj)}), got {burn_in}")
    tail = np.asarray(traj.values[burn_in:], dtype=float)
    if len(tail) < 2:
        raise TrajectoryError(f"Need at least 2 values after burn-in, got {len(tail)}")
    return float(np.std(tail, ddof=1))
