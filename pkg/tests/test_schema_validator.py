from pathlib import Path

import pytest

from synchronizer.errors import ConfigError
from synchronizer.schema_validator import SchemaValidator, document_kind
from synchronizer.utils.config_parser import load_config

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def validator():
    return SchemaValidator(mode='warn')


def test_lists_shipped_schemas(validator):
    assert validator.list_schemas() == ['experiment', 'scenario']


@pytest.mark.parametrize('config, schema', [
    ('config-example.yaml', 'experiment'),
    ('scenario-example.yaml', 'scenario'),
])
def test_examples_pass(validator, config, schema):
    result = validator.validate(load_config(REPO_ROOT / config), schema)
    assert result, result.errors


def test_type_errors_are_reported(validator):
    doc = {'experiment': {'batch_size': 0, 'scenarios': ['scenario-7']}}
    result = validator.validate(doc, 'experiment')
    assert not result.valid
    assert any(e.startswith('experiment.batch_size') for e in result.errors)
    assert any('scenario-7' in e for e in result.errors)


def test_missing_required_section(validator):
    result = validator.validate({'dwacd': {}}, 'scenario')
    assert not result.valid
    assert any("'scenario' is a required property" in e for e in result.errors)


def test_list_index_in_error_path(validator):
    doc = {'experiment': {'scenarios': ['null', 'scenario-7']}}
    result = validator.validate(doc, 'experiment')
    assert any(e.startswith('experiment.scenarios[1]:') for e in result.errors)


@pytest.mark.parametrize('doc, kind', [
    ({'experiment': {}, 'dwacd': {}}, 'experiment'),
    ({'scenario': {}}, 'scenario'),
    ({'dwacd': {'smoothing': 0.9}}, 'params'),
])
def test_document_kind(doc, kind):
    assert document_kind(doc) == kind


def test_params_documents_have_no_schema(validator):
    assert validator.validate({'dwacd': {'smoothing': 'high'}}, 'params').valid


def test_broken_schema_file(tmp_path):
    (tmp_path / 'scenario.schema.json').write_text('{"type": 12}', encoding='utf-8')
    with pytest.raises(ConfigError):
        SchemaValidator(schemas_dir=tmp_path).validate({}, 'scenario')


def test_strict_mode_raises():
    with pytest.raises(ConfigError) as info:
        SchemaValidator(mode='strict').validate({'experiment': {'workers': 0}}, 'experiment')
    assert info.value.errors


def test_unknown_schema(validator):
    result = validator.validate({}, 'pipeline')
    assert not result.valid


def test_bad_mode():
    with pytest.raises(ValueError):
        SchemaValidator(mode='loose')


def test_missing_schema_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        SchemaValidator(schemas_dir=tmp_path / 'none')
