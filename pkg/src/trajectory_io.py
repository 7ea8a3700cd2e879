"""
Trajectory Ingestion & Export
Reads offline trajectories from CSV / Excel / JSON and writes trajectories and
simulation logs as CSV at full float precision.

File layout: header `t,u,y`, one row per output sample. An inverse-ready
trajectory (y longer than u by L) leaves `u` blank in its last L rows.
"""

import os
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from src.exceptions import ConfigurationError
from src.hankel_data import Trajectory

FLOAT_FORMAT = "%.17g"
TRAJECTORY_COLUMNS = ["t", "u", "y"]


def detect_file_format(file_path) -> str:
    """Lower-case extension without the dot: 'csv', 'xlsx', 'xls', 'json'."""
    return Path(file_path).suffix.lower().lstrip(".")


# =============================================================================
# EXPORT
# =============================================================================

def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    rows = max(traj.u.size, traj.y.size)
    u = np.full(rows, np.nan)
    y = np.full(rows, np.nan)
    u[:traj.u.size] = traj.u
    y[:traj.y.size] = traj.y
    return pd.DataFrame({"t": np.arange(rows) * traj.ts, "u": u, "y": y})


def save_frame(df: pd.DataFrame, path) -> Path:
    """Write a frame as CSV with lossless floats (blank cells for missing values)."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logging.info(f"💾 Wrote {len(df)} rows to {path}")
    return path


def save_trajectory(traj: Trajectory, path) -> Path:
    return save_frame(trajectory_frame(traj), path)


# =============================================================================
# INGESTION
# =============================================================================

def _read_csv(file_path) -> pd.DataFrame:
    return pd.read_csv(file_path, float_precision="round_trip")


def _read_excel(file_path) -> pd.DataFrame:
    # First sheet only; one trajectory per workbook
    xls = pd.ExcelFile(file_path)
    logging.info(f"  📑 Sheet: {xls.sheet_names[0]}")
    return pd.read_excel(xls, sheet_name=xls.sheet_names[0])


def _read_json(file_path) -> pd.DataFrame:
    with open(file_path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    if isinstance(data, list):
        return pd.DataFrame(data)
    if isinstance(data, dict) and 'samples' in data:
        return pd.DataFrame(data['samples'])
    raise ConfigurationError(f"Unsupported JSON structure in {file_path}: expected a list or {{'samples': [...]}}")


_READERS = {
    'csv': _read_csv,
    'xlsx': _read_excel,
    'xls': _read_excel,
    'json': _read_json,
}


def trajectory_from_frame(df: pd.DataFrame, ts: Optional[float] = None, label: str = "trajectory") -> Trajectory:
    """
    Validate a `t,u,y` frame into a Trajectory.

    Trailing blank inputs are allowed (inverse-ready data); blanks anywhere
    else are rejected.
    """
    df.columns = [str(c).strip().lower() for c in df.columns]
    missing = [c for c in TRAJECTORY_COLUMNS if c not in df.columns]
    if missing:
        raise ConfigurationError(f"{label}: missing columns {missing}; expected header t,u,y")
    if df.empty:
        raise ConfigurationError(f"{label}: no samples")

    t = df["t"].to_numpy(dtype=float)
    u = df["u"].to_numpy(dtype=float)
    y = df["y"].to_numpy(dtype=float)

    if np.isnan(y).any() or np.isnan(t).any():
        raise ConfigurationError(f"{label}: blank t or y cells")
    u_present = ~np.isnan(u)
    n_u = int(u_present.sum())
    if n_u == 0 or not u_present[:n_u].all():
        raise ConfigurationError(f"{label}: blank u cells are only allowed in the trailing rows")

    if ts is None:
        if t.size < 2:
            raise ConfigurationError(f"{label}: cannot infer the sampling period from a single row")
        ts = float(t[1] - t[0])
    try:
        return Trajectory(u=u[:n_u], y=y, ts=ts, label=label)
    except ValueError as e:
        raise ConfigurationError(f"{label}: {e}")


def load_trajectory(file_path, ts: Optional[float] = None) -> Trajectory:
    """
    Load an offline trajectory from CSV, Excel or JSON.

    Args:
        file_path: path to the data file
        ts: sampling period; inferred from the t column when omitted

    Returns:
        Trajectory labelled with the file name
    """
    filename = os.path.basename(str(file_path))
    if not os.path.isfile(file_path):
        raise ConfigurationError(f"Trajectory file not found: {file_path}")

    file_format = detect_file_format(file_path)
    reader = _READERS.get(file_format)
    if reader is None:
        raise ConfigurationError(f"⚠️  Unsupported format: {file_format} ({filename})")

    logging.info(f"📄 Loading trajectory: {filename}")
    try:
        df = reader(file_path)
    except (ValueError, OSError, pd.errors.ParserError) as e:
        logging.error(f"❌ Error reading {filename}: {e}")
        raise ConfigurationError(f"Cannot read {filename}: {e}")

    traj = trajectory_from_frame(df, ts=ts, label=Path(filename).stem)
    logging.info(f"📊 Loaded {traj.u.size} inputs, {traj.y.size} outputs (ts={traj.ts})")
    return traj
