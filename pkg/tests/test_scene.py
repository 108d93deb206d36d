import json

import numpy as np
import pytest

from synchronizer.errors import GeometryError, InvalidArgumentError
from synchronizer.scene import (
    SPEED_OF_SOUND,
    ReverbSpec,
    ScenarioSpec,
    UtteranceSpec,
    build_timeline,
    export_scenario,
    generate_scenario,
    scenario_preset,
    speech_like,
    synthetic_rir,
)
from synchronizer.sro_model import STEADY_STATE_STD_PPM
from synchronizer.utils.atomic_write import read_csv
from tests.conftest import constant_sro_spec


def test_speech_like_level_and_determinism():
    a = speech_like(2.0, seed=4)
    assert len(a) == 32000
    assert np.sqrt(np.mean(a ** 2)) == pytest.approx(0.1, rel=1e-6)
    assert np.array_equal(a, speech_like(2.0, seed=4))


def test_rir_direct_path():
    rir = synthetic_rir(3.43, 16000)
    delay = 3.43 / SPEED_OF_SOUND * 16000
    assert int(np.argmax(np.abs(rir))) == int(round(delay))
    assert np.max(np.abs(rir)) == pytest.approx(1.0 / 3.43, rel=1e-3)


def test_rir_reverb_tail_is_longer():
    dry = synthetic_rir(2.0, 16000)
    wet = synthetic_rir(2.0, 16000, ReverbSpec(enabled=True, t60=0.3), seed=1)
    assert len(wet) > len(dry) + 4000
    assert np.any(wet[len(dry):] != 0)


def test_rir_tail_decays_60_db_per_t60():
    reverb = ReverbSpec(enabled=True, t60=0.3)
    energy = np.mean([synthetic_rir(2.0, 16000, reverb, seed=s) ** 2 for s in range(200)], axis=0)
    # tail starts one sample after the integer direct-path delay
    start = int(np.floor(2.0 / SPEED_OF_SOUND * 16000)) + 1
    tail = energy[start:]
    frames = tail[:len(tail) // 160 * 160].reshape(-1, 160).mean(axis=1)
    t = (np.arange(len(frames)) * 160 + 80) / 16000
    keep = (t > 0.01) & (t < 0.33)
    slope, _ = np.polyfit(t[keep], 10 * np.log10(frames[keep]), 1)
    assert slope * reverb.t60 == pytest.approx(-60.0, abs=1.0)


def test_rir_rejects_zero_distance():
    with pytest.raises(GeometryError):
        synthetic_rir(0.0)


def test_generate_shapes_and_truth(short_scene):
    spec, pair, truth = short_scene
    assert len(pair.x1) == len(pair.x2) == spec.num_samples
    assert truth.sto_12 == -1600
    assert truth.distances.shape == (2, 2)
    expected_tdof = (truth.distances[:, 1] - truth.distances[:, 0]) / SPEED_OF_SOUND * 16000
    np.testing.assert_allclose(truth.tdof_per_position, expected_tdof)
    assert len(truth.activity_mask) == spec.num_samples // truth.frame_shift
    assert np.all((truth.position_index >= 0) == truth.activity_mask)
    assert set(np.unique(truth.position_index)) <= {-1, 0, 1}


def test_generate_is_deterministic(short_scene):
    spec, pair, truth = short_scene
    again, truth_again = generate_scenario(spec)
    assert np.array_equal(pair.x1, again.x1)
    assert np.array_equal(pair.x2, again.x2)
    assert np.array_equal(truth.sro_diff_trajectory.values, truth_again.sro_diff_trajectory.values)


def test_difference_trajectory(short_scene):
    _, _, truth = short_scene
    traj_1, traj_2 = truth.node_trajectories
    # starts near mu_2 - (mu_1 + delta_1) = 15 - (-10 + 2)
    assert truth.sro_diff_trajectory.values[0] == pytest.approx(23.0, abs=0.5)
    assert len(truth.sro_diff_trajectory) == len(traj_1) == len(traj_2)


def test_timeline_turns_alternate_with_pauses(short_scene):
    spec, _, _ = short_scene
    utterances = build_timeline(spec, seed=5)
    assert utterances[0].start == 0
    for prev, cur in zip(utterances, utterances[1:]):
        if cur.position != prev.position:
            assert cur.start - prev.stop >= int(0.5 * spec.sample_rate)
        else:
            assert cur.start == prev.stop
    assert utterances[-1].stop <= spec.num_samples


def test_scripted_timeline_too_long():
    spec = ScenarioSpec(
        node_positions=[[0, 0, 1], [3, 0, 1]],
        source_positions=[[1, 2, 1]],
        duration=1.0,
        utterances=[UtteranceSpec(position=0, duration=2.0)],
    )
    with pytest.raises(InvalidArgumentError):
        build_timeline(spec, seed=0)


def test_source_on_node_is_rejected():
    spec = ScenarioSpec(node_positions=[[0, 0, 1], [3, 0, 1]], source_positions=[[0, 0, 1]], duration=2.0)
    with pytest.raises(GeometryError):
        spec.validate()


@pytest.mark.parametrize('kwargs', [
    {'node_positions': [[0, 0, 1]]},
    {'duration': 0.0},
    {'pause_range': (2.0, 1.0)},
    {'sto_seconds': (0.0, 1.5)},
])
def test_invalid_spec(kwargs):
    base = dict(node_positions=[[0, 0, 1], [3, 0, 1]], source_positions=[[1, 2, 1]], duration=2.0)
    base.update(kwargs)
    with pytest.raises(InvalidArgumentError):
        ScenarioSpec(**base).validate()


def test_presets_follow_scenario_flags():
    s1 = scenario_preset('scenario-1', 0)
    assert s1.num_positions == 1 and s1.pause_range is None
    assert all(p.sigma_ou == 0.0 for p in s1.ou_params)

    s2 = scenario_preset('scenario-2', 0)
    assert s2.num_positions == 1
    assert all(p.stationary_std() == pytest.approx(STEADY_STATE_STD_PPM, rel=1e-3) for p in s2.ou_params)

    s3 = scenario_preset('scenario-3', 0)
    assert 2 <= s3.num_positions <= 4
    assert s3.pause_range == (0.5, 2.0)

    s4 = scenario_preset('scenario-4', 0)
    assert 2 <= s4.num_positions <= 4
    assert s4.pause_range is None

    null = scenario_preset('null', 0)
    assert null.sto_seconds == (0.0, 0.0)
    assert all(p.mu_inf == 0.0 and p.sigma_ou == 0.0 for p in null.ou_params)


def test_preset_steady_std_range():
    spec = scenario_preset('scenario-2', 3, steady_std_range=(2.0, 2.0))
    assert all(p.stationary_std() == pytest.approx(2.0, rel=1e-3) for p in spec.ou_params)


def test_preset_is_reproducible():
    a = scenario_preset('scenario-4', 12)
    b = scenario_preset('scenario-4', 12)
    np.testing.assert_array_equal(a.source_positions, b.source_positions)
    assert a.ou_params == b.ou_params


def test_unknown_preset():
    with pytest.raises(InvalidArgumentError):
        scenario_preset('scenario-9', 0)


def test_export(tmp_path, short_scene):
    _, pair, truth = short_scene
    written = export_scenario(pair, truth, tmp_path)
    names = {p.name for p in written}
    assert names == {
        'node1.wav', 'node2.wav', 'ground_truth.json', 'sro_trajectory.csv', 'delay_curve.csv', 'activity.csv',
    }
    doc = json.loads((tmp_path / 'ground_truth.json').read_text())
    assert doc['sto_12'] == truth.sto_12
    rows = read_csv(tmp_path / 'activity.csv')
    assert len(rows) == len(truth.activity_mask)


def test_mean_sro_of_constant_difference():
    _, truth = generate_scenario(constant_sro_spec(duration=6.0, sro_ppm=25.0))
    assert truth.mean_sro(10000.0, 50000.0) == pytest.approx(25.0)
    assert truth.sro_at(np.array([20000.0]))[0] == pytest.approx(25.0)
