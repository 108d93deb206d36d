"""Desk-scale batch accuracy: five-minute scenes, a few seeds per scenario."""

import pytest

from synchronizer.main import ExperimentRunner
from synchronizer.metrics import band_spread
from synchronizer.utils.config_parser import parse_experiment

pytestmark = pytest.mark.slow


def _runner(tmp_path_factory, name, experiment, scene):
    section = {
        'name': name,
        'workers': 4,
        'plots': False,
        'write_traces': False,
        'log_level': 'WARNING',
    }
    section.update(experiment)
    doc = {'experiment': section, 'scene': scene}
    return ExperimentRunner(parse_experiment(doc), output_dir=tmp_path_factory.mktemp(name))


@pytest.fixture(scope='module')
def scenario_batch(tmp_path_factory):
    runner = _runner(
        tmp_path_factory,
        'scenarios',
        {
            'batch_size': 3,
            'scenarios': ['scenario-1', 'scenario-2', 'scenario-3', 'scenario-4'],
            'run_sto': True,
            'sto_lengths': [10, 60, 240, 300],
            'distance_noise_std': 0.1,
        },
        {'duration': 300.0},
    )
    return runner.run()


@pytest.fixture(scope='module')
def sigma_batch(tmp_path_factory):
    runner = _runner(
        tmp_path_factory,
        'sigma',
        {'batch_size': 8, 'scenarios': ['scenario-2'], 'run_sto': False},
        {'duration': 300.0, 'steady_std_range': [0.3, 2.8]},
    )
    return runner.run()


def test_batch_has_no_failures(scenario_batch):
    assert scenario_batch.failures == []
    for metrics in scenario_batch.scenarios.values():
        assert metrics.recordings == 3
        assert metrics.max_rmse_delay >= metrics.avg_rmse_delay


def test_constant_sro_accuracy(scenario_batch):
    s1 = scenario_batch.scenarios['scenario-1']
    assert s1.avg_rmse_sro <= 1.0
    assert s1.avg_rmse_delay <= 0.5


def test_time_varying_sro_accuracy(scenario_batch):
    assert scenario_batch.scenarios['scenario-2'].avg_rmse_sro <= 1.3


@pytest.mark.parametrize('scenario', ['scenario-3', 'scenario-4'])
def test_position_change_accuracy(scenario_batch, scenario):
    metrics = scenario_batch.scenarios[scenario]
    assert metrics.avg_rmse_sro <= 1.6
    assert metrics.max_rmse_delay <= 3.0


def test_sto_error_shrinks_with_length(scenario_batch):
    sweep = scenario_batch.sto_sweep
    assert set(sweep) == {'10', '60', '240', '300'}
    # every recording contributes at every length that holds a full segment
    assert sweep['60']['count'] == sweep['300']['count'] == 12
    assert sweep['60']['median'] < 10.0
    assert sweep['240']['outliers'] == 0
    assert sweep['300']['outliers'] == 0
    assert sweep['300']['max'] <= 10.0


def test_sigma_bands_are_flat(sigma_batch):
    bands = sigma_batch.sigma_bands
    assert len(bands) >= 2, sigma_batch.sigma_notes
    assert band_spread(bands) <= 0.3
    lowest = [b for b in bands if b.low == 0.0]
    if lowest:
        assert lowest[0].avg_rmse_sro <= 1.0
