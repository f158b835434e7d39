"""Functions for utilising storage."""

import logging as log
import os
from enum import Enum
from pathlib import Path
from typing import Optional

from ..config import ENV_VAR_CTCB_DATA

DEFAULT_DATA_DIR = "ctcb-data"
BUNDLED_DATA_DIR = Path(__file__).resolve().parents[3] / "misc" / "data"


class _StoreSubdir(Enum):
    """Storage Subdirectories."""

    CALIBRATION = "calibration"
    PRICING = "pricing"
    SIMULATION = "simulation"
    STRESS = "stress"
    DELTA = "delta"
    HEDGE = "hedge"
    MOMENTS = "moments"


_COMMAND_SUBDIRS = {
    "calibrate": _StoreSubdir.CALIBRATION,
    "price": _StoreSubdir.PRICING,
    "simulate": _StoreSubdir.SIMULATION,
    "stress": _StoreSubdir.STRESS,
    "delta": _StoreSubdir.DELTA,
    "hedge": _StoreSubdir.HEDGE,
    "moment-match": _StoreSubdir.MOMENTS,
}


def _get_path(store: _StoreSubdir, subtype: Optional[str] = None, filename: Optional[str] = None) -> Path:
    log.debug("_get_path() - store: %s, subtype: %s, filename: %s", store, subtype, filename)
    root = Path(os.environ.get(ENV_VAR_CTCB_DATA, DEFAULT_DATA_DIR))
    dir_ = root / store.value / subtype if subtype else root / store.value
    dir_.mkdir(parents=True, exist_ok=True)
    if filename:
        file_ = dir_ / filename
        log.debug("File: %s", file_)
        return file_
    log.debug("Dir: %s", dir_)
    return dir_


def get_output_dir(command: str, out: Optional[str] = None, run_name: Optional[str] = None) -> Path:
    """Get the directory a CLI command writes to. An explicit --out wins over CTCB_DATA.

    Runs of one command can be kept apart with ``run_name``, a subdirectory of the command's store.
    """
    if out:
        dir_ = Path(out)
        dir_.mkdir(parents=True, exist_ok=True)
        return dir_
    if command not in _COMMAND_SUBDIRS:
        raise ValueError(f"No output store for command '{command}'")
    return _get_path(_COMMAND_SUBDIRS[command], subtype=run_name)


def get_bundled_file(filename: str) -> Path:
    """Get a reference data file shipped in misc/data."""
    file_ = BUNDLED_DATA_DIR / filename
    if not file_.exists():
        raise FileNotFoundError(f"No bundled data file named '{filename}' in {BUNDLED_DATA_DIR}")
    return file_
