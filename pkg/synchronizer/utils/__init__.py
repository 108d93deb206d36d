"""Shared helpers: logging setup and atomic file output.

Config parsing, validation and plotting live in their own submodules and
are imported from there.
"""

from .atomic_write import atomic_write, atomic_write_csv, read_csv
from .logger import close_file_handlers, setup_logger

__all__ = [
    'atomic_write',
    'atomic_write_csv',
    'read_csv',
    'setup_logger',
    'close_file_handlers',
]
