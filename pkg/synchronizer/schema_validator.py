"""Schema stage of config validation.

scenario and experiment documents are checked against
schemas/<kind>.schema.json (Draft 7) before the semantic rules in
utils/config_validator run.  ``params`` documents (bare dwacd/sad/sto
sections) have no schema and pass straight through.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import jsonschema

from .errors import ConfigError


logger = logging.getLogger(__name__)

DEFAULT_SCHEMAS_DIR = Path(__file__).resolve().parent.parent / 'schemas'
SCHEMALESS_KINDS = ('params',)
MODES = ('strict', 'warn')


def document_kind(doc: Dict[str, Any], default: str = 'params') -> str:
    """Kind of a loaded config document, by its top-level section."""
    for kind in ('experiment', 'scenario'):
        if kind in doc:
            return kind
    return default


def _format_path(error: jsonschema.ValidationError) -> str:
    path = ''
    for part in error.absolute_path:
        path += f'[{part}]' if isinstance(part, int) else (f'.{part}' if path else str(part))
    return path or '(root)'


@dataclass
class SchemaResult:
    kind: str
    errors: List[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.valid

    def __repr__(self) -> str:
        status = "PASS" if self.valid else f"FAIL ({len(self.errors)} errors)"
        return f"SchemaResult({self.kind}: {status})"


class SchemaValidator:
    """Checks config documents against the shipped JSON Schemas."""

    def __init__(self, schemas_dir: Optional[Path] = None, mode: str = "warn"):
        """
        Args:
            schemas_dir: Directory with <kind>.schema.json files (default: repository schemas/)
            mode: "strict" raises ConfigError on failure, "warn" logs and returns the result
        """
        if mode not in MODES:
            raise ValueError(f"Unknown validation mode '{mode}', expected one of {MODES}")
        self.schemas_dir = Path(schemas_dir) if schemas_dir else DEFAULT_SCHEMAS_DIR
        if not self.schemas_dir.is_dir():
            raise FileNotFoundError(f"Schemas directory not found: {self.schemas_dir}")
        self.mode = mode
        self._validators: Dict[str, jsonschema.Draft7Validator] = {}

    def validator_for(self, kind: str) -> jsonschema.Draft7Validator:
        """
        Compiled validator for a document kind.

        Raises:
            FileNotFoundError: No schema for the kind
            ConfigError: The schema file itself is malformed
        """
        if kind not in self._validators:
            file_path = self.schemas_dir / f"{kind}.schema.json"
            if not file_path.exists():
                raise FileNotFoundError(f"No schema for '{kind}' documents: {file_path}")
            try:
                schema = json.loads(file_path.read_text(encoding='utf-8'))
                jsonschema.Draft7Validator.check_schema(schema)
            except (ValueError, jsonschema.SchemaError) as e:
                raise ConfigError(f"Broken schema {file_path.name}: {e}", [str(e)]) from e
            self._validators[kind] = jsonschema.Draft7Validator(schema)
            logger.debug(f"Loaded schema for {kind} documents from {file_path}")
        return self._validators[kind]

    def validate(self, doc: Dict[str, Any], kind: str) -> SchemaResult:
        """
        Validate a parsed config document.

        Raises:
            ConfigError: strict mode and the document does not match
        """
        if kind in SCHEMALESS_KINDS:
            return SchemaResult(kind)
        try:
            validator = self.validator_for(kind)
        except FileNotFoundError as e:
            logger.warning(str(e))
            return SchemaResult(kind, [str(e)])

        issues = sorted(validator.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
        result = SchemaResult(kind, [f"{_format_path(e)}: {e.message}" for e in issues])

        if not result.valid:
            if self.mode == "strict":
                raise ConfigError(
                    f"Config does not match the {kind} schema: {'; '.join(result.errors[:5])}",
                    result.errors,
                )
            logger.warning(f"{kind} schema: {len(result.errors)} problem(s), first: {result.errors[0]}")
        return result

    def list_schemas(self) -> List[str]:
        """Document kinds with a shipped schema."""
        return sorted(p.name[:-len('.schema.json')] for p in self.schemas_dir.glob('*.schema.json'))
