from pathlib import Path

import pytest
import yaml

from synchronizer.errors import ConfigError
from synchronizer.sro_model import OuParams
from synchronizer.utils.config_parser import (
    OUTPUT_DIR_ENV,
    load_config,
    merge_overrides,
    parse_estimator_params,
    parse_experiment,
    parse_scenario,
    resolve_output_dir,
)
from synchronizer.utils.config_validator import (
    raise_for_result,
    validate_config,
    write_validation_errors,
)

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def experiment_doc():
    return load_config(REPO_ROOT / 'config-example.yaml')


@pytest.fixture
def scenario_doc():
    return load_config(REPO_ROOT / 'scenario-example.yaml')


# ─── loading ─────────────────────────────────────────────────────────────────

def test_missing_config(tmp_path):
    with pytest.raises(ConfigError, match='not found'):
        load_config(tmp_path / 'config.yaml')


def test_invalid_yaml(tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text('experiment: [unclosed\n')
    with pytest.raises(ConfigError, match='Invalid YAML'):
        load_config(path)


def test_non_mapping_document(tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text('- a\n- b\n')
    with pytest.raises(ConfigError, match='mapping'):
        load_config(path)


def test_merge_overrides_is_section_wise():
    base = {'experiment': {'batch_size': 10, 'workers': 2}}
    merged = merge_overrides(base, {'experiment': {'batch_size': 3}, 'dwacd': {'settling': 50}})
    assert merged == {'experiment': {'batch_size': 3, 'workers': 2}, 'dwacd': {'settling': 50}}
    assert base['experiment']['batch_size'] == 10


def test_resolve_output_dir(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    assert resolve_output_dir() == Path('./results')
    monkeypatch.setenv(OUTPUT_DIR_ENV, '/tmp/env-out')
    assert resolve_output_dir() == Path('/tmp/env-out')
    assert resolve_output_dir(configured='cfg-out') == Path('cfg-out')
    assert resolve_output_dir('cli-out', 'cfg-out') == Path('cli-out')


# ─── parsing ─────────────────────────────────────────────────────────────────

def test_parse_example_experiment(experiment_doc):
    config = parse_experiment(experiment_doc)
    assert config.name == 'desk-scale'
    assert config.scenarios == ('scenario-1', 'scenario-2', 'scenario-3', 'scenario-4')
    assert config.sto_lengths == (60, 120, 240)
    assert config.scene.steady_std_range == (0.3, 2.8)
    assert config.dwacd.temporal_distance == 4
    assert config.seeds() == list(range(10))


def test_parse_example_scenario(scenario_doc):
    spec = parse_scenario(scenario_doc)
    assert spec.name == 'two-talkers'
    assert spec.num_positions == 2
    assert spec.ou_params[1] == OuParams(theta=0.0008, mu_inf=40.0, sigma_ou=0.05, delta_start=5.0)
    assert spec.sto_seconds == (0.0, 0.35)
    assert spec.reverb.enabled and spec.reverb.t60 == 0.4
    spec.validate()


def test_preset_with_overrides():
    spec = parse_scenario({'scenario': {'preset': 'scenario-1', 'seed': 2, 'duration': 30.0, 'snr_db': 10.0}})
    assert spec.name == 'scenario-1'
    assert spec.duration == 30.0
    assert spec.snr_db == 10.0
    assert spec.seed == 2


def test_explicit_scenario_needs_geometry():
    with pytest.raises(ConfigError):
        parse_scenario({'scenario': {'duration': 10.0}})


def test_section_must_be_mapping():
    with pytest.raises(ConfigError):
        parse_estimator_params({'dwacd': [1, 2]})


def test_unknown_field_type_is_config_error():
    with pytest.raises(ConfigError):
        parse_experiment({'experiment': {}, 'scene': {'reverb': 'on'}})


# ─── semantic validation ─────────────────────────────────────────────────────

def test_examples_are_valid(experiment_doc, scenario_doc):
    result = validate_config(experiment_doc, 'experiment')
    assert result.valid, result.errors
    assert result.warnings == []
    assert validate_config(scenario_doc, 'scenario').valid


def test_unknown_key_warns(experiment_doc):
    experiment_doc['experiment']['colour'] = 'blue'
    result = validate_config(experiment_doc, 'experiment')
    assert result.valid
    assert any("experiment.colour" in w for w in result.warnings)


def test_strict_mode_turns_warnings_into_errors(experiment_doc):
    experiment_doc['extra'] = {}
    result = validate_config(experiment_doc, 'experiment', strict_mode=True)
    assert not result.valid
    assert result.warnings == []
    assert any("Unknown section 'extra'" in e for e in result.errors)


def test_sample_rate_disagreement(experiment_doc):
    experiment_doc['dwacd']['sample_rate'] = 8000
    result = validate_config(experiment_doc, 'experiment')
    assert not result.valid
    assert any('Sample rates disagree' in e for e in result.errors)


def test_sweep_longer_than_scene(experiment_doc):
    experiment_doc['experiment']['sto_lengths'] = [600]
    assert not validate_config(experiment_doc, 'experiment').valid


def test_params_invariant_violation(experiment_doc):
    experiment_doc['dwacd']['settling'] = 2
    result = validate_config(experiment_doc, 'experiment')
    assert any('settling' in e for e in result.errors)


def test_params_kind():
    assert validate_config({'dwacd': {'settling': 50}}, 'params').valid
    result = validate_config({'dwacd': {'fft_size': 1000}}, 'params')
    assert not result.valid
    result = validate_config({'scenario': {}}, 'params')
    assert any("Unknown section 'scenario'" in w for w in result.warnings)


def test_readout_range_warning():
    result = validate_config({'dwacd': {'max_sro_ppm': 3e5}}, 'params')
    assert result.valid
    assert any('unambiguous' in w for w in result.warnings)


def test_scenario_geometry_error(scenario_doc):
    scenario_doc['scenario']['source_positions'] = [[1.0, 1.0, 1.2]]
    result = validate_config(scenario_doc, 'scenario')
    assert not result.valid


def test_unknown_kind():
    with pytest.raises(ValueError):
        validate_config({}, 'pipeline')


def test_validation_report(tmp_path, experiment_doc):
    experiment_doc['experiment']['sto_lengths'] = [600]
    result = validate_config(experiment_doc, 'experiment')
    path = write_validation_errors(result, tmp_path / 'out')
    text = path.read_text(encoding='utf-8')
    assert path.name == 'validation-errors.md'
    assert '## Errors' in text and 'sto_lengths' in text
    with pytest.raises(ConfigError) as info:
        raise_for_result(result, 'config.yaml')
    assert info.value.errors == result.errors


def test_round_trip_through_yaml(tmp_path, experiment_doc):
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump(experiment_doc, allow_unicode=True), encoding='utf-8')
    assert parse_experiment(load_config(path)) == parse_experiment(experiment_doc)
