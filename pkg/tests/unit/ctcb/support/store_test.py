"""Store module unit tests."""
from pathlib import Path
from typing import Optional

import pytest
from ctcb.support.store import BUNDLED_DATA_DIR, get_bundled_file, get_output_dir


@pytest.mark.parametrize(
    ("command", "run_name", "expected"),
    [
        ("calibrate", None, "calibration"),
        ("price", None, "pricing"),
        ("simulate", "long", "simulation/long"),
        ("moment-match", None, "moments"),
        ("delta", "desk", "delta/desk"),
    ],
)
def test_get_output_dir(data_dir: str, command: str, run_name: Optional[str], expected: str) -> None:
    """Test command output directories under CTCB_DATA."""
    dir_ = get_output_dir(command, run_name=run_name)
    assert dir_ == Path(data_dir) / expected
    assert dir_.is_dir()


def test_get_output_dir_explicit(tmp_path: Path, data_dir: str) -> None:
    """Test an explicit directory wins and is created."""
    out = tmp_path / "a" / "b"
    assert get_output_dir("hedge", str(out), run_name="ignored") == out
    assert out.is_dir()
    assert not (Path(data_dir) / "hedge").exists()


def test_get_output_dir_unknown(data_dir: str) -> None:
    """Test commands without a store."""
    with pytest.raises(ValueError, match="No output store"):
        get_output_dir("serve")


def test_get_bundled_file() -> None:
    """Test bundled reference data lookup."""
    assert get_bundled_file("structural_params.json") == BUNDLED_DATA_DIR / "structural_params.json"
    with pytest.raises(FileNotFoundError):
        get_bundled_file("missing.json")
