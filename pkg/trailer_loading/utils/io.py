"""
File helpers for traces, reports and plot data.
"""

import json
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd


def _to_builtin(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(data: dict, path: str | Path) -> None:
    """Indented JSON; numpy scalars become Python numbers and non-finite floats become null."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_to_builtin(data), indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def write_trace(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def read_trace(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path)


def to_long_format(frame: pd.DataFrame, id_columns: Sequence[str] = ("t",)) -> pd.DataFrame:
    """
    Melt a wide trace into (id columns, variable, value) rows.

    Non-numeric columns other than the id columns are dropped.
    """
    ids = [c for c in id_columns if c in frame.columns]
    numeric = [
        c for c in frame.columns
        if c not in ids and pd.api.types.is_numeric_dtype(frame[c])
    ]
    return frame.melt(id_vars=ids, value_vars=numeric, var_name="variable", value_name="value")
