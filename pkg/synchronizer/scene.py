"""
Two-node meeting simulation.

A single source talks from M positions in turn.  Each node receives the
source through a synthetic RIR (fractional-delay direct path with 1/d gain,
optional exponentially decaying noise tail), then gets its own sampling-time
offset (integer start shift), SRO trajectory (STFT resampler) and sensor
noise.  Ground truth is expressed in node-1 sample coordinates.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import signal as sps

from .async_model import (
    AsyncSpec,
    DelayCurve,
    MAX_STO_SECONDS,
    accumulated_delay,
    add_sensor_noise,
    apply_async_stft,
    num_frames_for,
)
from .dsp import frame_positions, windowed_sinc
from .errors import GeometryError, InvalidArgumentError
from .sro_model import STEADY_STATE_STD_PPM, OuParams, SroTrajectory, default_theta, simulate_node_pair
from .utils.atomic_write import atomic_write, atomic_write_csv
from .utils.audio_io import ingest_wav, write_wav


logger = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0
# distance at which snr_db holds
REFERENCE_DISTANCE = 3.2
DEFAULT_ROOM = (6.0, 5.0, 3.0)

# pink-noise shaping filter (-3 dB/octave)
_PINK_B = [0.049922035, -0.095993537, 0.050612699, -0.004408786]
_PINK_A = [1.0, -2.494956002, 2.017265875, -0.522189400]

SCENARIO_FLAGS = {
    # name: (time-varying SRO, multi-position, silence)
    'scenario-1': (False, False, False),
    'scenario-2': (True, False, False),
    'scenario-3': (True, True, True),
    'scenario-4': (True, True, False),
}


@dataclass(frozen=True)
class ReverbSpec:
    """Stochastic reverb tail.

    Attributes:
        enabled: Add the tail (direct path only when False)
        t60: Reverberation time in seconds
        critical_distance: Distance (m) at which tail and direct path carry equal energy
        tail_factor: Tail length in multiples of t60
    """
    enabled: bool = False
    t60: float = 0.3
    critical_distance: float = 1.5
    tail_factor: float = 1.2


@dataclass(frozen=True)
class UtteranceSpec:
    """One scripted utterance: WAV file or synthetic speech of ``duration`` seconds."""
    position: int
    audio: Optional[str] = None
    duration: float = 3.0


@dataclass(frozen=True)
class Utterance:
    position: int
    start: int
    samples: np.ndarray

    @property
    def stop(self) -> int:
        return self.start + len(self.samples)


@dataclass
class ScenarioSpec:
    """Declarative description of one simulated two-node meeting."""
    node_positions: np.ndarray
    source_positions: np.ndarray
    duration: float = 300.0
    sample_rate: int = 16000
    utterances: Optional[List[UtteranceSpec]] = None
    pause_range: Optional[Tuple[float, float]] = (0.5, 2.0)
    max_utterances_per_turn: int = 4
    utterance_duration: Tuple[float, float] = (2.0, 6.0)
    snr_db: float = 30.0
    ou_params: Tuple[OuParams, OuParams] = (OuParams(), OuParams())
    sto_seconds: Tuple[float, float] = (0.0, 0.0)
    reverb: ReverbSpec = field(default_factory=ReverbSpec)
    seed: int = 0
    resampler_frame_size: int = 4096
    resampler_frame_shift: int = 1024
    name: str = 'custom'

    def __post_init__(self):
        self.node_positions = np.asarray(self.node_positions, dtype=float)
        self.source_positions = np.atleast_2d(np.asarray(self.source_positions, dtype=float))

    @property
    def num_positions(self) -> int:
        return self.source_positions.shape[0]

    @property
    def num_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def validate(self) -> None:
        """
        Raises:
            InvalidArgumentError: Malformed spec
            GeometryError: A source coincides with a node
        """
        if self.node_positions.shape != (2, 3):
            raise InvalidArgumentError(f"node_positions must be 2x3, got {self.node_positions.shape}")
        if self.source_positions.ndim != 2 or self.source_positions.shape[1] != 3 or self.num_positions < 1:
            raise InvalidArgumentError(f"source_positions must be Mx3 with M >= 1, got {self.source_positions.shape}")
        if self.duration <= 0:
            raise InvalidArgumentError(f"duration must be positive, got {self.duration}")
        if self.pause_range is not None:
            lo, hi = self.pause_range
            if not 0 <= lo <= hi:
                raise InvalidArgumentError(f"Invalid pause_range {self.pause_range}")
        lo, hi = self.utterance_duration
        if not 0 < lo <= hi:
            raise InvalidArgumentError(f"Invalid utterance_duration {self.utterance_duration}")
        if self.max_utterances_per_turn < 1:
            raise InvalidArgumentError("max_utterances_per_turn must be >= 1")
        for sto in self.sto_seconds:
            if abs(sto) > MAX_STO_SECONDS:
                raise InvalidArgumentError(f"|sto| must be <= {MAX_STO_SECONDS} s, got {sto}")
        for params in self.ou_params:
            params.validate()
        if self.utterances is not None:
            for utt in self.utterances:
                if not 0 <= utt.position < self.num_positions:
                    raise InvalidArgumentError(f"Utterance position {utt.position} out of range")
        if np.any(source_node_distances(self.source_positions, self.node_positions) < 1e-6):
            raise GeometryError("A source position coincides with a node position")


@dataclass
class GroundTruth:
    """Reference values for scoring, in node-1 sample coordinates.

    ``activity_mask``/``position_index`` use non-overlapping frames of
    ``frame_shift`` samples; ``position_index`` is -1 where inactive.
    """
    sro_diff_trajectory: SroTrajectory
    sto_12: int
    tdof_per_position: np.ndarray
    distances: np.ndarray
    activity_mask: np.ndarray
    position_index: np.ndarray
    frame_shift: int
    sample_rate: int
    resampler_frame_size: int
    resampler_frame_shift: int
    node_trajectories: Tuple[SroTrajectory, SroTrajectory]
    speed_of_sound: float = SPEED_OF_SOUND

    @property
    def frame_centers(self) -> np.ndarray:
        """Sample positions of the difference-trajectory steps."""
        return frame_positions(len(self.sro_diff_trajectory), self.resampler_frame_shift, self.resampler_frame_size)

    def sro_at(self, positions: np.ndarray) -> np.ndarray:
        """ε_12 (ppm) at node-1 sample positions."""
        return np.interp(positions, self.frame_centers, self.sro_diff_trajectory.values)

    def mean_sro(self, start: float, stop: float, step: float = 256.0) -> float:
        """ε_12 averaged over node-1 samples [start, stop]."""
        if stop <= start:
            return float(self.sro_at(np.array([start]))[0])
        grid = np.linspace(start, stop, max(2, int(np.ceil((stop - start) / step)) + 1))
        return float(np.mean(self.sro_at(grid)))

    def delay_curve(self) -> DelayCurve:
        """SRO-induced delay of node 2 relative to node 1 (no STO term)."""
        spec = AsyncSpec(sto_seconds=0.0, trajectory=self.sro_diff_trajectory, sample_rate=self.sample_rate)
        return accumulated_delay(
            spec, len(self.sro_diff_trajectory), self.resampler_frame_size, self.resampler_frame_shift
        )

    def to_dict(self) -> dict:
        return {
            'sto_12': int(self.sto_12),
            'tdof_per_position': [float(v) for v in self.tdof_per_position],
            'distances': [[float(d) for d in row] for row in self.distances],
            'sample_rate': self.sample_rate,
            'speed_of_sound': self.speed_of_sound,
            'frame_shift': self.frame_shift,
            'resampler_frame_size': self.resampler_frame_size,
            'resampler_frame_shift': self.resampler_frame_shift,
            'sro_diff_std_ppm': float(np.std(self.sro_diff_trajectory.values, ddof=1))
            if len(self.sro_diff_trajectory) > 1 else 0.0,
            'active_fraction': float(np.mean(self.activity_mask)) if len(self.activity_mask) else 0.0,
        }


@dataclass
class AsyncRecordingPair:
    """The two node recordings; ``clean`` holds the synchronous node signals."""
    x1: np.ndarray
    x2: np.ndarray
    sample_rate: int
    clean: Optional[Tuple[np.ndarray, np.ndarray]] = None


def source_node_distances(sources: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """M × 2 matrix of Euclidean distances."""
    return np.linalg.norm(sources[:, None, :] - nodes[None, :, :], axis=2)


def speech_like(
    duration: float,
    sample_rate: int = 16000,
    seed: Optional[int] = None,
    level_db: float = -20.0,
    syllable_rate: float = 4.0,
    modulation_depth: float = 0.8,
) -> np.ndarray:
    """Pink noise amplitude-modulated at a syllabic rate, with 20 ms fades."""
    rng = np.random.default_rng(seed)
    n = max(1, int(round(duration * sample_rate)))
    warmup = 2048
    pink = sps.lfilter(_PINK_B, _PINK_A, rng.standard_normal(n + warmup))[warmup:]

    t = np.arange(n) / sample_rate
    envelope = 1.0 + modulation_depth * np.sin(2 * np.pi * syllable_rate * t + rng.uniform(0, 2 * np.pi))
    ramp_len = min(n // 2, int(0.02 * sample_rate))
    if ramp_len > 0:
        ramp = np.hanning(2 * ramp_len)
        envelope[:ramp_len] *= ramp[:ramp_len]
        envelope[-ramp_len:] *= ramp[ramp_len:]

    out = pink * envelope
    rms = np.sqrt(np.mean(out ** 2))
    return out * (10.0 ** (level_db / 20.0) / rms) if rms > 0 else out


def synthetic_rir(
    distance: float,
    sample_rate: int = 16000,
    reverb: Optional[ReverbSpec] = None,
    speed_of_sound: float = SPEED_OF_SOUND,
    seed: Optional[int] = None,
    num_taps: int = 64,
) -> np.ndarray:
    """
    Direct path (windowed-sinc fractional delay d/c·fs, gain 1/d) plus an
    optional noise tail with energy envelope exp(-13.8·t/T60).
    """
    if distance <= 0:
        raise GeometryError(f"Source-node distance must be positive, got {distance}")
    reverb = reverb or ReverbSpec()
    delay = distance / speed_of_sound * sample_rate
    n_int = int(np.floor(delay))
    half = num_taps // 2
    tail_len = int(reverb.tail_factor * reverb.t60 * sample_rate) if reverb.enabled else 0

    rir = np.zeros(n_int + half + 1 + tail_len)
    taps = np.arange(-half + 1, half + 1)
    idx = n_int + taps
    keep = idx >= 0
    rir[idx[keep]] += windowed_sinc(taps[keep] - (delay - n_int), half_width=half) / distance

    if reverb.enabled and tail_len > 0:
        rng = np.random.default_rng(seed)
        t = np.arange(tail_len) / sample_rate
        decay = np.exp(-6.9 * t / reverb.t60)
        # tail energy equals direct-path energy at the critical distance
        gain = np.sqrt(1.0 / reverb.critical_distance ** 2 / np.sum(decay ** 2))
        rir[n_int + 1:n_int + 1 + tail_len] += gain * decay * rng.standard_normal(tail_len)
    return rir


def render_propagation(
    source: np.ndarray,
    src_pos: np.ndarray,
    mic_pos: np.ndarray,
    reverb: Optional[ReverbSpec] = None,
    sample_rate: int = 16000,
    speed_of_sound: float = SPEED_OF_SOUND,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Microphone signal for a source at src_pos (same length as the source)."""
    distance = float(np.linalg.norm(np.asarray(src_pos, dtype=float) - np.asarray(mic_pos, dtype=float)))
    if distance <= 1e-6:
        raise GeometryError(f"Source at {src_pos} coincides with microphone at {mic_pos}")
    rir = synthetic_rir(distance, sample_rate, reverb, speed_of_sound, seed)
    source = np.asarray(source, dtype=float)
    return sps.oaconvolve(source, rir)[:len(source)]


def _spawn_seeds(seed: int, count: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def build_timeline(spec: ScenarioSpec, seed: Optional[int] = None) -> List[Utterance]:
    """
    Place utterances on the scene time axis.

    Scripted utterances play in order; otherwise turns are drawn at random
    (no turn repeats the previous position when M >= 2, 1 to
    ``max_utterances_per_turn`` utterances each) until the duration is full.
    A pause from ``pause_range`` separates position changes.

    Raises:
        InvalidArgumentError: Scripted activity plus pauses exceeds the duration
    """
    rng = np.random.default_rng(seed)
    fs = spec.sample_rate
    total = spec.num_samples
    utterances: List[Utterance] = []

    def pause() -> int:
        if spec.pause_range is None:
            return 0
        return int(round(rng.uniform(*spec.pause_range) * fs))

    t = 0
    if spec.utterances is not None:
        prev = None
        for utt in spec.utterances:
            if utt.audio:
                samples = ingest_wav(utt.audio, sample_rate=fs, resample=True)
            else:
                samples = speech_like(utt.duration, fs, seed=int(rng.integers(2 ** 32)))
            if prev is not None and utt.position != prev:
                t += pause()
            utterances.append(Utterance(utt.position, t, samples))
            t += len(samples)
            prev = utt.position
        if t > total:
            raise InvalidArgumentError(
                f"Scripted activity and pauses ({t / fs:.1f} s) exceed the duration ({spec.duration} s)"
            )
        return utterances

    prev = None
    while t < total:
        candidates = [m for m in range(spec.num_positions) if m != prev] or [prev]
        position = int(rng.choice(candidates))
        if prev is not None and position != prev:
            t += pause()
        for _ in range(int(rng.integers(1, spec.max_utterances_per_turn + 1))):
            if t >= total:
                break
            duration = rng.uniform(*spec.utterance_duration)
            samples = speech_like(duration, fs, seed=int(rng.integers(2 ** 32)))[: total - t]
            utterances.append(Utterance(position, t, samples))
            t += len(samples)
        prev = position
    return utterances


def _shift_start(x: np.ndarray, shift: int) -> np.ndarray:
    """y[n] = x[n + shift], zero outside."""
    out = np.zeros_like(x)
    if shift >= 0:
        out[:len(x) - shift] = x[shift:]
    else:
        out[-shift:] = x[:len(x) + shift]
    return out


def _activity_frames(
    utterances: List[Utterance],
    arrival_delay: np.ndarray,
    offset: int,
    num_samples: int,
    frame_shift: int,
    num_positions: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Frame-wise activity and majority position in node coordinates."""
    positions = np.full(num_samples, -1, dtype=np.int8)
    for utt in utterances:
        start = int(round(utt.start + arrival_delay[utt.position])) - offset
        stop = int(round(utt.stop + arrival_delay[utt.position])) - offset
        positions[max(start, 0):max(min(stop, num_samples), 0)] = utt.position

    num_frames = num_samples // frame_shift
    blocks = positions[:num_frames * frame_shift].reshape(num_frames, frame_shift)
    counts = np.stack([(blocks == m).sum(axis=1) for m in range(num_positions)], axis=1)
    active = counts.sum(axis=1) * 2 >= frame_shift
    majority = np.where(active, counts.argmax(axis=1), -1)
    return active, majority


def generate_scenario(spec: ScenarioSpec, gt_frame_shift: int = 256) -> Tuple[AsyncRecordingPair, GroundTruth]:
    """
    Render one two-node recording pair and its ground truth.

    Deterministic per ``spec.seed``.

    Raises:
        GeometryError: Coincident node and source
        IngestionError: Scripted utterance audio missing or unreadable
        InvalidArgumentError: Malformed spec
    """
    spec.validate()
    fs = spec.sample_rate
    total = spec.num_samples
    n_res, b_res = spec.resampler_frame_size, spec.resampler_frame_shift
    timeline_seed, rir_seed, sro_seed, noise_seed_1, noise_seed_2 = _spawn_seeds(spec.seed, 5)

    distances = source_node_distances(spec.source_positions, spec.node_positions)
    arrival = distances / SPEED_OF_SOUND * fs
    tdof = arrival[:, 1] - arrival[:, 0]

    utterances = build_timeline(spec, timeline_seed)
    logger.info(
        f"[{spec.name}/seed={spec.seed}] {len(utterances)} utterances over "
        f"{spec.num_positions} position(s), {spec.duration:.0f} s"
    )

    # synchronous node signals
    rir_seeds = np.random.SeedSequence(rir_seed).spawn(spec.num_positions * 2)
    source = np.zeros(total)
    clean = np.zeros((2, total))
    for m in range(spec.num_positions):
        track = np.zeros(total)
        for utt in utterances:
            if utt.position == m:
                track[utt.start:utt.stop] += utt.samples
        if not np.any(track):
            continue
        source += track
        for node in range(2):
            seed = int(rir_seeds[2 * m + node].generate_state(1)[0])
            rir = synthetic_rir(distances[m, node], fs, spec.reverb, SPEED_OF_SOUND, seed)
            clean[node] += sps.oaconvolve(track, rir)[:total]

    # STO as integer start shifts, then SRO through the STFT resampler
    shifts = [int(round(sto * fs)) for sto in spec.sto_seconds]
    num_frames = num_frames_for(total, n_res, b_res)
    ou = [replace(p, step_duration=b_res / fs) for p in spec.ou_params]
    traj_1, traj_2, _ = simulate_node_pair(ou[0], ou[1], num_frames, seed=sro_seed)

    reference = source / REFERENCE_DISTANCE
    noisy = []
    for node, (traj, noise_seed) in enumerate(((traj_1, noise_seed_1), (traj_2, noise_seed_2))):
        shifted = _shift_start(clean[node], shifts[node])
        async_sig = apply_async_stft(shifted, AsyncSpec(0.0, traj, fs), n_res, b_res)
        noisy.append(add_sensor_noise(async_sig, spec.snr_db, reference=reference, seed=noise_seed))

    # ground truth on the node-1 grid
    sto_12 = shifts[1] - shifts[0]
    centers = frame_positions(num_frames, b_res, n_res)
    eps_2 = np.interp(centers - sto_12, centers, traj_2.values)
    diff = SroTrajectory(values=eps_2 - traj_1.values, step_duration=b_res / fs, seed=spec.seed)
    active, majority = _activity_frames(
        utterances, arrival[:, 0], shifts[0], total, gt_frame_shift, spec.num_positions
    )

    truth = GroundTruth(
        sro_diff_trajectory=diff,
        sto_12=sto_12,
        tdof_per_position=tdof,
        distances=distances,
        activity_mask=active,
        position_index=majority,
        frame_shift=gt_frame_shift,
        sample_rate=fs,
        resampler_frame_size=n_res,
        resampler_frame_shift=b_res,
        node_trajectories=(traj_1, traj_2),
    )
    pair = AsyncRecordingPair(x1=noisy[0], x2=noisy[1], sample_rate=fs, clean=(clean[0], clean[1]))
    return pair, truth


def random_geometry(
    rng: np.random.Generator,
    num_positions: int,
    room: Tuple[float, float, float] = DEFAULT_ROOM,
    margin: float = 0.5,
    min_distance: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Two nodes and ``num_positions`` sources inside a shoebox room."""
    lo = np.array([margin, margin, 0.8])
    hi = np.array(room) - np.array([margin, margin, 0.8])
    nodes = rng.uniform(lo, hi, size=(2, 3))
    sources = []
    while len(sources) < num_positions:
        candidate = rng.uniform(lo, hi)
        if np.all(np.linalg.norm(nodes - candidate, axis=1) >= min_distance):
            sources.append(candidate)
    return nodes, np.array(sources)


def scenario_preset(
    name: str,
    seed: int,
    duration: float = 300.0,
    mu_inf_range: float = 100.0,
    sigma_ou_range: Tuple[float, float] = (0.05, 0.05),
    steady_std_range: Optional[Tuple[float, float]] = None,
    max_sto: float = MAX_STO_SECONDS,
    max_positions: int = 4,
    snr_db: float = 30.0,
    reverb: Optional[ReverbSpec] = None,
    sample_rate: int = 16000,
) -> ScenarioSpec:
    """
    Random ScenarioSpec with the flag combination of one named scenario.

    scenario-1 constant SRO, one position; scenario-2 time-varying SRO;
    scenario-3 adds position changes with pauses between them; scenario-4
    changes position without pauses.
    'null' gives zero SRO/STO at one position (sanity batch).
    ``steady_std_range`` draws the stationary std per node (ppm) instead of
    the default 1.25 ppm, which spreads time-varying batches over sigma bands.
    """
    if name == 'null':
        varying, multi, silence = False, False, False
    elif name in SCENARIO_FLAGS:
        varying, multi, silence = SCENARIO_FLAGS[name]
    else:
        raise InvalidArgumentError(f"Unknown scenario '{name}', expected null or {sorted(SCENARIO_FLAGS)}")

    rng = np.random.default_rng(seed)
    num_positions = int(rng.integers(2, max_positions + 1)) if multi else 1
    nodes, sources = random_geometry(rng, num_positions)

    def node_params() -> OuParams:
        if name == 'null':
            return OuParams(sigma_ou=0.0, mu_inf=0.0, delta_start=0.0)
        mu = float(rng.uniform(-mu_inf_range, mu_inf_range))
        if not varying:
            return OuParams(sigma_ou=0.0, mu_inf=mu, delta_start=0.0)
        sigma = float(rng.uniform(*sigma_ou_range))
        steady = STEADY_STATE_STD_PPM if steady_std_range is None else float(rng.uniform(*steady_std_range))
        return OuParams(
            theta=default_theta(sigma, steady),
            mu_inf=mu,
            sigma_ou=sigma,
            delta_start=float(rng.uniform(-10.0, 10.0)),
        )

    ou = (node_params(), node_params())
    sto_2 = 0.0 if name == 'null' else float(rng.uniform(-max_sto, max_sto))
    return ScenarioSpec(
        node_positions=nodes,
        source_positions=sources,
        duration=duration,
        sample_rate=sample_rate,
        pause_range=(0.5, 2.0) if silence else None,
        snr_db=snr_db,
        ou_params=ou,
        sto_seconds=(0.0, sto_2),
        reverb=reverb or ReverbSpec(),
        seed=seed,
        name=name,
    )


def export_scenario(
    pair: AsyncRecordingPair,
    truth: GroundTruth,
    output_dir: Union[str, Path],
    subtype: str = 'float',
) -> List[Path]:
    """Write node1.wav, node2.wav, ground_truth.json and CSV tables."""
    output_dir = Path(output_dir)
    written = [
        write_wav(output_dir / 'node1.wav', pair.x1, pair.sample_rate, subtype),
        write_wav(output_dir / 'node2.wav', pair.x2, pair.sample_rate, subtype),
        atomic_write(output_dir / 'ground_truth.json', truth.to_dict()),
        truth.sro_diff_trajectory.to_csv(output_dir / 'sro_trajectory.csv'),
        truth.delay_curve().to_csv(output_dir / 'delay_curve.csv'),
        atomic_write_csv(
            output_dir / 'activity.csv',
            ('frame_index', 'start_sample', 'active', 'position'),
            (
                (i, i * truth.frame_shift, bool(a), int(p))
                for i, (a, p) in enumerate(zip(truth.activity_mask, truth.position_index))
            ),
        ),
    ]
    logger.info(f"Scenario exported to {output_dir}")
    return written
