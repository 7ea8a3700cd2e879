import json

import numpy as np
import pandas as pd
import pytest

from src.exceptions import ConfigurationError
from src.hankel_data import Trajectory
from src.trajectory_io import (
    detect_file_format,
    load_trajectory,
    save_trajectory,
    trajectory_frame,
    trajectory_from_frame,
)


def test_csv_round_trip_is_lossless(tmp_path, sec5_offline):
    path = save_trajectory(sec5_offline, tmp_path / "offline.csv")
    loaded = load_trajectory(path)
    np.testing.assert_array_equal(loaded.u, sec5_offline.u)
    np.testing.assert_array_equal(loaded.y, sec5_offline.y)
    assert loaded.extra_outputs == 1
    assert loaded.label == "offline"


def test_inverse_ready_rows_leave_u_blank(tmp_path, sec5_offline):
    path = save_trajectory(sec5_offline, tmp_path / "offline.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,u,y"
    assert len(lines) == 10
    assert lines[-1].split(",")[1] == ""


def test_blank_input_inside_data_rejected():
    df = pd.DataFrame({"t": [0.0, 0.1, 0.2], "u": [1.0, np.nan, 2.0], "y": [0.0, 1.0, 2.0]})
    with pytest.raises(ConfigurationError, match="trailing rows"):
        trajectory_from_frame(df)


def test_missing_columns_rejected():
    with pytest.raises(ConfigurationError, match="missing columns"):
        trajectory_from_frame(pd.DataFrame({"t": [0.0], "u": [1.0]}))


def test_sampling_period_inferred_or_given():
    df = pd.DataFrame({"t": [0.0, 0.5, 1.0], "u": [1.0, 2.0, 3.0], "y": [0.0, 1.0, 2.0]})
    assert trajectory_from_frame(df.copy()).ts == pytest.approx(0.5)
    assert trajectory_from_frame(df.copy(), ts=0.25).ts == 0.25


def test_json_ingestion(tmp_path):
    path = tmp_path / "w.json"
    path.write_text(json.dumps({"samples": [
        {"t": 0.0, "u": 1.0, "y": 0.0},
        {"t": 0.01, "u": -1.0, "y": 0.5},
        {"t": 0.02, "u": None, "y": 0.25},
    ]}))
    traj = load_trajectory(path)
    np.testing.assert_array_equal(traj.u, [1.0, -1.0])
    np.testing.assert_array_equal(traj.y, [0.0, 0.5, 0.25])


def test_excel_ingestion(tmp_path, sec5_offline):
    path = tmp_path / "w.xlsx"
    trajectory_frame(sec5_offline).to_excel(path, index=False)
    traj = load_trajectory(path, ts=0.01)
    np.testing.assert_allclose(traj.y, sec5_offline.y)
    assert traj.u.size == 8


def test_unsupported_and_missing_files(tmp_path):
    assert detect_file_format("a/B.XLSX") == "xlsx"
    odd = tmp_path / "w.parquet"
    odd.write_text("")
    with pytest.raises(ConfigurationError, match="Unsupported format"):
        load_trajectory(odd)
    with pytest.raises(ConfigurationError, match="not found"):
        load_trajectory(tmp_path / "missing.csv")


def test_unreadable_csv_is_a_configuration_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ConfigurationError, match="Cannot read"):
        load_trajectory(path)


def test_frame_pads_shorter_input():
    df = trajectory_frame(Trajectory([1.0], [0.0, 2.0], 0.1))
    assert df["u"].isna().tolist() == [False, True]
