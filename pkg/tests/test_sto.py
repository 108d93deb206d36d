import numpy as np
import pytest

from synchronizer.async_model import compensate_sro
from synchronizer.dsp import fractional_delay
from synchronizer.errors import (
    DegenerateInputError,
    IngestionError,
    InsufficientSamplesError,
    InvalidArgumentError,
    NoConsensusError,
)
from synchronizer.estimators import DwacdEstimator, DwacdParams
from synchronizer.sad import detect_activity
from synchronizer.scene import ScenarioSpec, export_scenario, generate_scenario
from synchronizer.sro_model import OuParams
from synchronizer.sto import (
    ConstantDistanceProvider,
    DistanceProvider,
    OracleDistanceProvider,
    ShiftObservation,
    StoParams,
    TableDistanceProvider,
    collect_observations,
    estimate_sto,
    ls_sto,
    observations_to_csv,
    ransac_sto,
)
from synchronizer.utils.atomic_write import read_csv

# 0.343 m path difference = 16 samples at 16 kHz
D1, D2 = 3.43, 3.773


def _obs(index, sto, noise=0.0, active=True):
    return ShiftObservation(segment_index=index, shift=16.0 - sto + noise, d1=D1, d2=D2, active=active)


# ─── LS / RANSAC ─────────────────────────────────────────────────────────────

def test_candidate_from_distances():
    assert _obs(0, 100.0).sto_candidate() == pytest.approx(100.0)


def test_ls_is_mean_of_active_candidates():
    observations = [_obs(0, 10.0), _obs(1, 12.0), _obs(2, 500.0, active=False)]
    estimate = ls_sto(observations)
    assert estimate.sto == pytest.approx(11.0)
    assert estimate.residual_rms == pytest.approx(1.0)
    assert estimate.inlier_count == 2


def test_ls_without_active_observations():
    with pytest.raises(InsufficientSamplesError):
        ls_sto([_obs(0, 10.0, active=False)])


def test_ransac_rejects_outliers(rng):
    noise = rng.normal(0.0, 0.5, size=20)
    observations = [_obs(i, -250.0, n) for i, n in enumerate(noise)]
    observations += [_obs(20 + i, 300.0 + 40 * i) for i in range(5)]
    estimate = ransac_sto(observations, seed=1)
    assert estimate.inlier_count == 20
    assert estimate.sto == pytest.approx(-250.0 - noise.mean())
    assert estimate.num_observations == 25


def test_ransac_ignores_input_order(rng):
    observations = [_obs(i, 40.0, rng.normal(0.0, 2.0)) for i in range(15)]
    observations += [_obs(15 + i, -80.0) for i in range(4)]
    shuffled = [observations[i] for i in rng.permutation(len(observations))]
    assert ransac_sto(observations, seed=3) == ransac_sto(shuffled, seed=3)


def test_ransac_without_consensus():
    observations = [_obs(i, 100.0 * (i % 3)) for i in range(9)]
    with pytest.raises(NoConsensusError) as info:
        ransac_sto(observations, min_inlier_frac=0.5)
    assert info.value.best_estimate.inlier_count == 3
    best = info.value.best_estimate.sto
    assert min(abs(best - v) for v in (0.0, 100.0, 200.0)) < 1e-6


def test_ransac_needs_three_observations():
    with pytest.raises(InsufficientSamplesError):
        ransac_sto([_obs(0, 1.0), _obs(1, 1.0)])


@pytest.mark.parametrize('kwargs', [
    {'max_lag': 1 << 13},
    {'iterations': 0},
    {'inlier_tol': 0.0},
    {'min_inlier_frac': 1.5},
])
def test_invalid_params(kwargs):
    with pytest.raises(InvalidArgumentError):
        StoParams(**kwargs).validate()


# ─── observations ────────────────────────────────────────────────────────────

@pytest.mark.parametrize('coarse_offset', [0, 40])
def test_estimate_sto_on_delayed_copy(white_noise, coarse_offset):
    x1 = white_noise(16000 * 5)
    # residual shift = tdof - sto = 16 - (-30)
    x2 = fractional_delay(x1, 46.0)
    provider = ConstantDistanceProvider(D1, D2)
    estimate, observations = estimate_sto(
        x1, x2, provider, detect_activity(x1), coarse_offset=coarse_offset
    )
    assert len(observations) >= 25
    assert estimate.sto == pytest.approx(-30.0, abs=0.1)
    assert estimate.inlier_count == len(observations)


class _DriftingDistances(DistanceProvider):
    """Node-2 distance grows 0.343 m (16 samples) per segment: no two candidates agree."""

    def __call__(self, segment_index, start, stop):
        return D1, D2 + 0.343 * segment_index


def test_consensus_failure_carries_observations(white_noise):
    x1 = white_noise(16000 * 5)
    x2 = fractional_delay(x1, 46.0)
    with pytest.raises(NoConsensusError) as info:
        estimate_sto(x1, x2, _DriftingDistances(), detect_activity(x1))
    observations = info.value.observations
    assert len(observations) >= 25
    assert [o.segment_index for o in observations] == sorted(o.segment_index for o in observations)
    assert info.value.best_estimate.num_observations == len(observations)


def test_inactive_segments_are_skipped(white_noise):
    x1 = white_noise(16000 * 4)
    x1[:16000 * 2] = 0.0
    observations = collect_observations(
        x1, x1, ConstantDistanceProvider(D1, D2), detect_activity(x1)
    )
    params = StoParams()
    assert observations
    assert all(o.segment_index * params.segment_shift >= 16000 * 2 - 0.25 * params.segment_len
               for o in observations)


def test_short_signal_gives_no_observations():
    x = np.ones(1000)
    assert collect_observations(x, x, ConstantDistanceProvider(1.0, 1.0), detect_activity(x)) == []


def test_observations_csv(tmp_path):
    rows = read_csv(observations_to_csv([_obs(3, 5.0)], tmp_path / 'obs.csv'))
    assert rows[0]['segment_index'] == '3'
    assert float(rows[0]['shift']) == pytest.approx(11.0)


# ─── distance providers ──────────────────────────────────────────────────────

def test_constant_provider_rejects_non_positive():
    with pytest.raises(InvalidArgumentError):
        ConstantDistanceProvider(0.0, 2.0)


@pytest.fixture
def table():
    positions = np.array([-1, 0, 0, 1, 1, 1, -1])
    return TableDistanceProvider(positions, [[1.0, 2.0], [3.0, 4.0]], frame_shift=256)


def test_table_majority_position(table):
    assert table.position_for(0, 768) == 0
    assert table(0, 768, 1792) == (3.0, 4.0)


def test_table_inactive_segment_takes_nearest(table):
    assert table.position_for(1536, 1792) == 1


def test_table_query_outside(table):
    with pytest.raises(InvalidArgumentError):
        table.position_for(1024, 4096)


def test_table_without_activity():
    provider = TableDistanceProvider(np.array([-1, -1]), [[1.0, 1.0]], frame_shift=256)
    with pytest.raises(DegenerateInputError):
        provider(0, 0, 256)


def test_table_noise_is_reproducible():
    positions = np.zeros(8, dtype=int)
    noisy = TableDistanceProvider(positions, [[2.0, 3.0]], 256, noise_std_m=0.1, seed=5)
    first = noisy(0, 512, 1024)
    assert noisy(7, 512, 1024) == first
    assert first != (2.0, 3.0)
    other = TableDistanceProvider(positions, [[2.0, 3.0]], 256, noise_std_m=0.1, seed=6)
    assert other(0, 512, 1024) != first


def test_table_from_exported_scene(tmp_path, short_scene):
    _, pair, truth = short_scene
    export_scenario(pair, truth, tmp_path)
    provider = TableDistanceProvider.from_scene_dir(tmp_path)
    oracle = OracleDistanceProvider(truth)
    for start in (0, 40000, 120000):
        assert provider(0, start, start + 16384) == pytest.approx(oracle(0, start, start + 16384))


def test_table_from_missing_scene(tmp_path):
    with pytest.raises(IngestionError):
        TableDistanceProvider.from_scene_dir(tmp_path / 'missing')


# ─── end to end ──────────────────────────────────────────────────────────────

@pytest.mark.slow
def test_sto_after_sro_compensation(constant_sro_scene):
    spec, pair, truth = constant_sro_scene
    trace = DwacdEstimator(DwacdParams(coarse_sync_window=20.0)).run(pair.x1, pair.x2)
    compensated = compensate_sro(
        pair.x2, trace.segment_centers, trace.sro, trace.sample_rate,
        spec.resampler_frame_size, spec.resampler_frame_shift,
    )
    estimate, _ = estimate_sto(
        pair.x1, compensated, OracleDistanceProvider(truth), detect_activity(pair.x1),
        coarse_offset=trace.coarse_offset,
    )
    assert estimate.sto == pytest.approx(truth.sto_12, abs=2.0)


def test_noise_free_scene_gives_exact_sto():
    # zero SRO, no sensor noise, oracle distances, two talker positions
    spec = ScenarioSpec(
        node_positions=[[1.0, 1.0, 1.2], [4.5, 3.0, 1.2]],
        source_positions=[[2.0, 3.0, 1.5], [4.0, 1.5, 1.5]],
        duration=20.0,
        pause_range=(0.5, 1.0),
        snr_db=float('inf'),
        ou_params=(OuParams(sigma_ou=0.0, mu_inf=0.0), OuParams(sigma_ou=0.0, mu_inf=0.0)),
        sto_seconds=(0.0, 0.02),
        seed=21,
        name='noise-free',
    )
    pair, truth = generate_scenario(spec)
    assert truth.sto_12 == 320
    estimate, observations = estimate_sto(
        pair.x1, pair.x2, OracleDistanceProvider(truth), detect_activity(pair.x1)
    )
    assert len(observations) >= 20
    assert abs(estimate.sto - truth.sto_12) < 0.5
