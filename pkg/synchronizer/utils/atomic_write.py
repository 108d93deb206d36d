"""Atomic file writes for reports, traces and ground-truth exports."""

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def atomic_write(file_path: Union[str, Path], content: Union[str, bytes, dict, list]) -> Path:
    """
    Write content to a file atomically using temp file + rename pattern.

    Args:
        file_path: Target file path
        content: str (text), bytes (binary) or dict/list (JSON, sorted keys so
            identical content gives byte-identical files)

    Returns:
        The target path

    Raises:
        OSError: If write or rename fails
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)

    if isinstance(content, (dict, list)):
        payload = json.dumps(content, indent=2, ensure_ascii=False, sort_keys=True, default=_json_default) + '\n'
        data = payload.encode('utf-8')
    elif isinstance(content, str):
        data = content.encode('utf-8')
    else:
        data = bytes(content)

    # Create temp file in the same directory to ensure same filesystem
    fd, tmp_path = tempfile.mkstemp(
        dir=file_path.parent,
        prefix=f'.{file_path.name}.',
        suffix='.tmp'
    )

    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)

        # Atomic rename
        os.replace(tmp_path, file_path)
    except Exception:
        # Clean up temp file on failure
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise
    return file_path


def _format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def atomic_write_csv(
    file_path: Union[str, Path],
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> Path:
    """Write a CSV table atomically (floats in repr form, booleans lower-case)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(v) for v in row])
    return atomic_write(file_path, buf.getvalue())


def read_csv(file_path: Union[str, Path]) -> list:
    """Read a CSV written by :func:`atomic_write_csv` into a list of dicts."""
    with open(file_path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))
