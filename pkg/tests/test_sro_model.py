import numpy as np
import pytest

from synchronizer.errors import InvalidArgumentError, TrajectoryError
from synchronizer.sro_model import (
    STEADY_STATE_STD_PPM,
    OuParams,
    constant_trajectory,
    default_theta,
    simulate_node_pair,
    simulate_trajectory,
    trajectory_std,
)
from synchronizer.utils.atomic_write import read_csv


def test_default_theta_gives_steady_state_std():
    params = OuParams()
    assert params.stationary_std() == pytest.approx(STEADY_STATE_STD_PPM, rel=1e-3)


def test_same_seed_is_bit_identical():
    params = OuParams(mu_inf=12.0, delta_start=-3.0)
    a = simulate_trajectory(params, 500, seed=42)
    b = simulate_trajectory(params, 500, seed=42)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, simulate_trajectory(params, 500, seed=43).values)


def test_noise_free_trajectory_decays_geometrically():
    params = OuParams(theta=0.01, mu_inf=5.0, sigma_ou=0.0, delta_start=8.0)
    traj = simulate_trajectory(params, 300, seed=0)
    expected = 5.0 + 8.0 * (1.0 - 0.01) ** np.arange(300)
    np.testing.assert_allclose(traj.values, expected, rtol=1e-12)


def test_first_value_is_mu_plus_delta():
    traj = simulate_trajectory(OuParams(mu_inf=-20.0, delta_start=4.0), 10, seed=1)
    assert traj.values[0] == pytest.approx(-16.0)


def test_stationary_std_over_seeds():
    params = OuParams(mu_inf=0.0, delta_start=0.0)
    finals = np.array([simulate_trajectory(params, 8000, seed=s).values[-1] for s in range(2000)])
    assert np.std(finals, ddof=1) == pytest.approx(STEADY_STATE_STD_PPM, rel=0.05)


def test_mean_reversion_curve():
    params = OuParams(mu_inf=30.0, delta_start=10.0)
    steps = np.array([0, 250, 1000, 2500])
    runs = np.array([simulate_trajectory(params, 2501, seed=s).values[steps] for s in range(2000)])
    mean = runs.mean(axis=0) - 30.0
    stderr = runs.std(axis=0, ddof=1) / np.sqrt(len(runs))
    expected = 10.0 * (1.0 - params.theta) ** steps
    assert np.all(np.abs(mean - expected) <= 3 * stderr + 1e-9)


def test_node_pair_difference():
    traj_1, traj_2, diff = simulate_node_pair(OuParams(mu_inf=10.0), OuParams(mu_inf=-5.0), 200, seed=9)
    np.testing.assert_allclose(diff.values, traj_2.values - traj_1.values)
    again = simulate_node_pair(OuParams(mu_inf=10.0), OuParams(mu_inf=-5.0), 200, seed=9)
    assert np.array_equal(again[2].values, diff.values)


def test_constant_trajectory():
    traj = constant_trajectory(7.5, 20, 0.064)
    assert len(traj) == 20
    assert np.all(traj.values == 7.5)
    assert traj.duration == pytest.approx(20 * 0.064)


@pytest.mark.parametrize('kwargs', [
    {'theta': 0.0},
    {'theta': 1.0},
    {'sigma_ou': -0.1},
    {'mu_inf': 101.0},
    {'delta_start': 11.0},
    {'step_duration': 0.0},
])
def test_invalid_params(kwargs):
    with pytest.raises(InvalidArgumentError):
        simulate_trajectory(OuParams(**kwargs), 10)


def test_num_steps_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        simulate_trajectory(OuParams(), 0)


def test_trajectory_std_burn_in():
    traj = constant_trajectory(1.0, 5, 0.1)
    assert trajectory_std(traj) == 0.0
    with pytest.raises(InvalidArgumentError):
        trajectory_std(traj, burn_in=5)
    with pytest.raises(TrajectoryError):
        trajectory_std(traj, burn_in=4)


def test_default_theta_falls_back_for_zero_sigma():
    assert default_theta(0.0) == default_theta()


def test_trajectory_csv(tmp_path):
    traj = simulate_trajectory(OuParams(mu_inf=3.0), 25, seed=5)
    rows = read_csv(traj.to_csv(tmp_path / 'traj.csv'))
    assert len(rows) == 25
    assert set(rows[0]) == {'step_index', 'epsilon_ppm'}
    assert float(rows[-1]['epsilon_ppm']) == pytest.approx(traj.values[-1])
