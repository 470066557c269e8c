"""Reproducibility-stamped CSV and JSON artifacts.

CSV files start with one ``# {json}`` comment line holding the resolved run
config and seed; JSON reports carry the same object under ``run_config``.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import pandas as pd

from app import __version__
from app.exceptions import DataError

PathLike = Union[str, Path]


def provenance(run_config: Optional[Dict[str, Any]] = None, seed: Optional[int] = None) -> Dict[str, Any]:
    stamp: Dict[str, Any] = {"catkit_version": __version__}
    if seed is not None:
        stamp["seed"] = seed
    stamp["run_config"] = run_config or {}
    return stamp


def write_csv(path: PathLike, frame: pd.DataFrame, stamp: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(stamp, sort_keys=True, default=str) + "\n")
        frame.to_csv(fh, index=False)
    return path


def read_csv(path: PathLike) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Return the table and its provenance header (empty if absent)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
    stamp: Dict[str, Any] = {}
    if first.startswith("# "):
        try:
            stamp = json.loads(first[2:])
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: unreadable provenance header") from e
    return pd.read_csv(path, comment="#"), stamp


def write_json(path: PathLike, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False, default=str), encoding="utf-8")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"JSON not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON ({e.msg})") from e
