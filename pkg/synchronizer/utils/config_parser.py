"""YAML config loading and conversion into the package's parameter dataclasses.

Two document kinds share the ``dwacd``/``sad``/``sto`` sections:

- scenario documents (``scenario:`` section) describe one scene for ``simulate``
- experiment documents (``experiment:`` + ``scene:`` sections) drive ``evaluate``

Unknown keys are ignored here; ``config_validator`` reports them as warnings.
"""

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type, TypeVar, Union

import yaml

from ..errors import ConfigError
from ..estimators.dwacd import DwacdParams
from ..sad import SadParams
from ..scene import ReverbSpec, ScenarioSpec, UtteranceSpec, scenario_preset
from ..sro_model import OuParams
from ..sto import StoParams


logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = 'WASN_SYNC_OUTPUT_DIR'
DEFAULT_OUTPUT_DIR = './results'

T = TypeVar('T')


def load_config(config_path: Union[str, Path]) -> Dict[str, Any]:
    """
    YAML 설정 파일을 로드한다.

    Raises:
        ConfigError: Missing file, YAML syntax error, or a non-mapping document
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        with open(config_path, encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {config_path} must be a mapping, got {type(data).__name__}")
    return data


def merge_overrides(config: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """
    Section-wise merge: dict sections are updated key by key, anything else
    replaces the section.  Returns a new dict.
    """
    merged = {k: (dict(v) if isinstance(v, dict) else v) for k, v in config.items()}
    for section, values in (overrides or {}).items():
        if section not in merged or merged[section] is None:
            merged[section] = {}
        if isinstance(values, dict) and isinstance(merged[section], dict):
            merged[section].update(values)
        else:
            merged[section] = values
    return merged


def resolve_output_dir(explicit: Optional[Union[str, Path]] = None, configured: Optional[str] = None) -> Path:
    """CLI flag, then config value, then $WASN_SYNC_OUTPUT_DIR, then ./results."""
    for candidate in (explicit, configured, os.environ.get(OUTPUT_DIR_ENV)):
        if candidate:
            return Path(candidate)
    return Path(DEFAULT_OUTPUT_DIR)


def known_fields(cls: type) -> List[str]:
    return [f.name for f in dataclasses.fields(cls)]


def _build(cls: Type[T], section: Optional[Dict[str, Any]], **extra: Any) -> T:
    """Instantiate a dataclass from the known keys of a section."""
    section = section or {}
    if not isinstance(section, dict):
        raise ConfigError(f"Section for {cls.__name__} must be a mapping, got {type(section).__name__}")
    names = set(known_fields(cls))
    kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in section.items() if k in names}
    kwargs.update(extra)
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"Invalid {cls.__name__} section: {e}") from e


def parse_estimator_params(doc: Dict[str, Any]) -> Tuple[DwacdParams, SadParams, StoParams]:
    return _build(DwacdParams, doc.get('dwacd')), _build(SadParams, doc.get('sad')), _build(StoParams, doc.get('sto'))


def parse_reverb(section: Optional[Dict[str, Any]]) -> ReverbSpec:
    return _build(ReverbSpec, section)


def parse_scenario(doc: Dict[str, Any]) -> ScenarioSpec:
    """
    ScenarioSpec from a scenario document.

    With ``preset`` the scene is drawn by ``scenario_preset(preset, seed)``;
    explicit keys given next to it override the drawn values.
    """
    section = doc.get('scenario')
    if not isinstance(section, dict):
        raise ConfigError("Scenario document needs a 'scenario' mapping")
    seed = int(section.get('seed', 0))

    if 'preset' in section:
        base = scenario_preset(
            section['preset'],
            seed,
            duration=float(section.get('duration', 300.0)),
            sample_rate=int(section.get('sample_rate', 16000)),
            reverb=parse_reverb(section.get('reverb')),
        )
        fields = {f.name: getattr(base, f.name) for f in dataclasses.fields(ScenarioSpec)}
    else:
        missing = [k for k in ('node_positions', 'source_positions') if k not in section]
        if missing:
            raise ConfigError(f"Scenario without preset needs {missing}")
        fields = {}

    for name in known_fields(ScenarioSpec):
        if name not in section:
            continue
        value = section[name]
        if name == 'ou_params':
            value = tuple(_build(OuParams, p) for p in value)
        elif name == 'reverb':
            value = parse_reverb(value)
        elif name == 'utterances':
            value = [_build(UtteranceSpec, u) for u in value]
        elif isinstance(value, list) and name in ('pause_range', 'utterance_duration', 'sto_seconds'):
            value = tuple(value)
        fields[name] = value
    fields.setdefault('name', section.get('preset', 'custom'))

    try:
        return ScenarioSpec(**fields)
    except TypeError as e:
        raise ConfigError(f"Invalid scenario section: {e}") from e


@dataclass(frozen=True)
class SceneTemplate:
    """Arguments of ``scenario_preset`` shared by every scene of a batch."""
    duration: float = 300.0
    sample_rate: int = 16000
    mu_inf_range: float = 100.0
    sigma_ou_range: Tuple[float, float] = (0.05, 0.05)
    steady_std_range: Optional[Tuple[float, float]] = None
    max_sto: float = 1.0
    max_positions: int = 4
    snr_db: float = 30.0
    reverb: ReverbSpec = field(default_factory=ReverbSpec)

    def build(self, name: str, seed: int, duration: Optional[float] = None) -> ScenarioSpec:
        return scenario_preset(
            name,
            seed,
            duration=self.duration if duration is None else duration,
            mu_inf_range=self.mu_inf_range,
            sigma_ou_range=self.sigma_ou_range,
            steady_std_range=self.steady_std_range,
            max_sto=self.max_sto,
            max_positions=self.max_positions,
            snr_db=self.snr_db,
            reverb=self.reverb,
            sample_rate=self.sample_rate,
        )


@dataclass
class ExperimentConfig:
    """Batch evaluation settings (``experiment`` section plus parameter sections)."""
    name: str = 'experiment'
    output_dir: Optional[str] = None
    batch_size: int = 10
    base_seed: int = 0
    workers: int = 1
    scenarios: Tuple[str, ...] = ('scenario-1', 'scenario-2', 'scenario-3', 'scenario-4')
    run_sto: bool = True
    sto_lengths: Tuple[float, ...] = ()
    distance_noise_std: float = 0.1
    write_traces: bool = True
    plots: bool = True
    strict_mode: bool = False
    log_level: str = 'INFO'
    scene: SceneTemplate = field(default_factory=SceneTemplate)
    dwacd: DwacdParams = field(default_factory=DwacdParams)
    sad: SadParams = field(default_factory=SadParams)
    sto: StoParams = field(default_factory=StoParams)

    def seeds(self) -> List[int]:
        return [self.base_seed + i for i in range(self.batch_size)]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_experiment(doc: Dict[str, Any]) -> ExperimentConfig:
    """ExperimentConfig from an experiment document."""
    section = doc.get('experiment')
    if not isinstance(section, dict):
        raise ConfigError("Experiment document needs an 'experiment' mapping")

    scene_section = dict(doc.get('scene') or {})
    reverb = parse_reverb(scene_section.pop('reverb', None))
    scene = _build(SceneTemplate, scene_section, reverb=reverb)
    dwacd, sad, sto = parse_estimator_params(doc)

    reserved = {'scene', 'dwacd', 'sad', 'sto'}
    plain = {k: v for k, v in section.items() if k not in reserved}
    return _build(ExperimentConfig, plain, scene=scene, dwacd=dwacd, sad=sad, sto=sto)
