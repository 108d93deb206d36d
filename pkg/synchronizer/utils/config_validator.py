"""설정 파일 의미 검증기.

JSON Schema 검증 이후에 실행되는 규칙 기반 검증.
알 수 없는 키는 경고, 파라미터 불변식 위반은 오류로 처리한다.
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List

from ..errors import ConfigError, SyncError
from .atomic_write import atomic_write
from .config_parser import (
    ExperimentConfig,
    SceneTemplate,
    known_fields,
    parse_estimator_params,
    parse_experiment,
    parse_scenario,
)
from ..estimators.dwacd import DwacdParams
from ..sad import SadParams
from ..scene import ReverbSpec, ScenarioSpec
from ..sro_model import OuParams
from ..sto import StoParams


logger = logging.getLogger(__name__)

PARAM_SECTIONS = {'dwacd': DwacdParams, 'sad': SadParams, 'sto': StoParams}
DOCUMENT_KINDS = ('scenario', 'experiment', 'params')


@dataclass
class ValidationResult:
    """검증 결과."""
    valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def _unknown_keys(section: Any, allowed: List[str], prefix: str) -> List[str]:
    if not isinstance(section, dict):
        return []
    return [f"Unknown key '{prefix}.{key}' (ignored)" for key in section if key not in allowed]


def _check_params(doc: Dict[str, Any], errors: List[str], warnings: List[str]) -> None:
    for name, cls in PARAM_SECTIONS.items():
        warnings.extend(_unknown_keys(doc.get(name), known_fields(cls), name))


def _check_dwacd_range(dwacd: DwacdParams, warnings: List[str]) -> None:
    if dwacd.readout_halfwidth >= dwacd.fft_size // 2:
        warnings.append(
            f"dwacd.max_sro_ppm={dwacd.max_sro_ppm} exceeds the unambiguous range "
            f"of fft_size {dwacd.fft_size} at ℓ_d·B_s={dwacd.drift_span}"
        )


def _validate_scenario(doc: Dict[str, Any], errors: List[str], warnings: List[str]) -> None:
    section = doc.get('scenario') or {}
    allowed = known_fields(ScenarioSpec) + ['preset']
    warnings.extend(_unknown_keys(section, allowed, 'scenario'))
    for i, ou in enumerate(section.get('ou_params') or []):
        warnings.extend(_unknown_keys(ou, known_fields(OuParams), f'scenario.ou_params[{i}]'))
    warnings.extend(_unknown_keys(section.get('reverb'), known_fields(ReverbSpec), 'scenario.reverb'))

    spec = parse_scenario(doc)
    spec.validate()
    if spec.snr_db < 0:
        warnings.append(f"scenario.snr_db={spec.snr_db} dB: sensor noise louder than the source")


def _validate_experiment(doc: Dict[str, Any], errors: List[str], warnings: List[str]) -> None:
    section = doc.get('experiment') or {}
    warnings.extend(_unknown_keys(section, known_fields(ExperimentConfig), 'experiment'))
    scene = doc.get('scene') or {}
    warnings.extend(_unknown_keys(scene, known_fields(SceneTemplate), 'scene'))
    warnings.extend(_unknown_keys(scene.get('reverb') if isinstance(scene, dict) else None,
                                  known_fields(ReverbSpec), 'scene.reverb'))

    config = parse_experiment(doc)
    lo, hi = config.scene.sigma_ou_range
    if lo > hi:
        errors.append(f"scene.sigma_ou_range must be ascending, got {config.scene.sigma_ou_range}")
    if config.scene.steady_std_range is not None:
        s_lo, s_hi = config.scene.steady_std_range
        if not 0 < s_lo <= s_hi:
            errors.append(f"scene.steady_std_range must be ascending and positive, got {config.scene.steady_std_range}")
    if config.sto_lengths and max(config.sto_lengths) > config.scene.duration:
        errors.append(
            f"experiment.sto_lengths up to {max(config.sto_lengths)} s exceed scene.duration {config.scene.duration} s"
        )
    if config.sto_lengths and not config.run_sto:
        warnings.append("experiment.sto_lengths is set but run_sto is false; the sweep is skipped")
    if len(set(config.scenarios)) != len(config.scenarios):
        warnings.append(f"experiment.scenarios has duplicates: {list(config.scenarios)}")

    rates = {config.scene.sample_rate, config.dwacd.sample_rate, config.sto.sample_rate}
    if len(rates) > 1:
        errors.append(f"Sample rates disagree between scene, dwacd and sto: {sorted(rates)}")
    if config.dwacd.coarse_sync_window > config.scene.duration:
        errors.append(
            f"dwacd.coarse_sync_window {config.dwacd.coarse_sync_window} s exceeds scene.duration"
        )

    for params in (config.dwacd, config.sad, config.sto):
        params.validate()
    _check_dwacd_range(config.dwacd, warnings)


def validate_config(doc: Dict[str, Any], kind: str, strict_mode: bool = False) -> ValidationResult:
    """설정 문서를 검증한다.

    Args:
        doc: 파싱된 YAML 문서
        kind: 'scenario', 'experiment' 또는 'params' (dwacd/sad/sto 섹션만)
        strict_mode: True면 경고(warnings)도 오류(errors)로 처리

    Returns:
        ValidationResult
    """
    if kind not in DOCUMENT_KINDS:
        raise ValueError(f"Unknown config kind '{kind}', expected one of {DOCUMENT_KINDS}")

    errors: List[str] = []
    warnings: List[str] = []

    allowed_sections = {'dwacd', 'sad', 'sto'}
    if kind != 'params':
        allowed_sections.add(kind)
    if kind == 'experiment':
        allowed_sections.add('scene')
    for section in doc:
        if section not in allowed_sections:
            warnings.append(f"Unknown section '{section}' (ignored)")
    _check_params(doc, errors, warnings)

    try:
        if kind == 'scenario':
            _validate_scenario(doc, errors, warnings)
            dwacd = DwacdParams(**{k: v for k, v in (doc.get('dwacd') or {}).items()
                                   if k in known_fields(DwacdParams)})
            dwacd.validate()
            _check_dwacd_range(dwacd, warnings)
        elif kind == 'experiment':
            _validate_experiment(doc, errors, warnings)
        else:
            sections = parse_estimator_params(doc)
            for params in sections:
                params.validate()
            _check_dwacd_range(sections[0], warnings)
    except (SyncError, TypeError) as e:
        errors.append(str(e))

    # strict_mode: 경고를 오류로 전환
    if strict_mode and warnings:
        errors.extend(warnings)
        warnings = []

    return ValidationResult(valid=len(errors) == 0, errors=errors, warnings=warnings)


def write_validation_errors(result: ValidationResult, output_dir: Path) -> Path:
    """검증 실패 보고서(validation-errors.md)를 작성한다.

    Args:
        result: ValidationResult
        output_dir: 보고서를 저장할 디렉토리

    Returns:
        생성된 validation-errors.md 경로
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    output_path = output_dir / 'validation-errors.md'

    lines = [
        "# Config validation failed",
        "",
        "## Checked at",
        f"{datetime.now().isoformat()}",
        "",
    ]

    if result.errors:
        lines.append("## Errors")
        lines.append("")
        for error in result.errors:
            lines.append(f"- {error}")
        lines.append("")

    if result.warnings:
        lines.append("## Warnings")
        lines.append("")
        for warning in result.warnings:
            lines.append(f"- {warning}")
        lines.append("")

    atomic_write(output_path, '\n'.join(lines))
    logger.info(f"Validation report written: {output_path}")
    return output_path


def raise_for_result(result: ValidationResult, source: str) -> None:
    """ConfigError carrying every error of an invalid result."""
    if not result.valid:
        raise ConfigError(f"Invalid config {source}: {'; '.join(result.errors[:5])}", result.errors)
    for warning in result.warnings:
        logger.warning(f"{source}: {warning}")
