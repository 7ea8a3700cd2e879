import logging

import numpy as np
import pytest

from conftest import DELAY, N_ORDER, TAU, TP, TS
from src.exceptions import CertificationError, ConfigurationError
from src.hankel_data import (
    Trajectory,
    build_controller_matrix,
    build_forward,
    build_inverse,
    certify,
    check_rank,
    expected_rank,
    hankel,
    minimum_offline_length,
    rank_profile,
    window,
)
from src.interconnect import unified_controller_trajectory
from src.lti_core import make_imc_filter, simulate
from src.sim_cli import collect_offline


def test_hankel_entries_and_shape():
    H = hankel([1, 2, 3, 4, 5], 3)
    np.testing.assert_array_equal(H, [[1, 2, 3], [2, 3, 4], [3, 4, 5]])


def test_hankel_full_depth_is_single_column():
    v = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(hankel(v, 3), v.reshape(3, 1))


@pytest.mark.parametrize("depth", [0, 6])
def test_hankel_rejects_bad_depth(depth):
    with pytest.raises(ValueError, match="Hankel depth"):
        hankel(np.arange(5.0), depth)


def test_trajectory_views():
    traj = Trajectory([1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 3.0], TS)
    assert traj.length == 3
    assert traj.extra_outputs == 1
    np.testing.assert_array_equal(traj.forward().y, [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(traj.lead(1).y, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="lead of 2"):
        traj.lead(2)


def test_trajectory_is_read_only():
    traj = Trajectory([1.0, 2.0], [0.0, 1.0], TS)
    with pytest.raises(ValueError):
        traj.u[0] = 5.0


# =============================================================================
# EXAMPLE-PLANT RANK CONDITIONS
# =============================================================================

def test_forward_matrix_certifies_at_rank_five(sec5_offline):
    matrix = build_forward(sec5_offline.forward(), TP)
    assert matrix.stacked().shape == (6, 6)
    assert not matrix.certified
    certified = certify(matrix, N_ORDER)
    assert certified.certified
    assert certified.rank == 5
    assert certified.columns == 6


def test_inverse_matrix_certifies_at_rank_five(sec5_offline):
    matrix = certify(build_inverse(sec5_offline, TP, DELAY), N_ORDER)
    assert matrix.stacked().shape == (7, 6)
    assert matrix.rank == 5
    assert matrix.Y_fL.shape == (2, 6)


def _controller_matrix(plant, td):
    data = collect_offline(plant, td, DELAY, seed=0).forward()
    w_c = unified_controller_trajectory(data.u, data.y, make_imc_filter(TAU, TS, DELAY))
    return build_controller_matrix(w_c.u, w_c.y, TP)


def test_controller_matrix_certifies_with_seven_samples(sec5_plant):
    matrix = certify(_controller_matrix(sec5_plant, 7), N_ORDER)
    assert matrix.stacked().shape == (6, 5)
    assert matrix.rank == 5


def test_controller_matrix_fails_one_sample_short(sec5_plant):
    with pytest.raises(CertificationError) as excinfo:
        certify(_controller_matrix(sec5_plant, 6), N_ORDER)
    assert excinfo.value.expected == 5
    assert excinfo.value.found == 4
    assert excinfo.value.matrix_name == "controller"


def test_certify_requires_window_at_least_order(sec5_offline):
    with pytest.raises(ConfigurationError, match="must be >= n"):
        certify(build_forward(sec5_offline.forward(), 1), N_ORDER)


def test_inverse_requires_exact_extra_outputs(sec5_offline):
    with pytest.raises(ValueError, match="exactly L=2"):
        build_inverse(sec5_offline, TP, 2)


def test_forward_requires_equal_lengths(sec5_offline):
    with pytest.raises(ValueError, match="equal-length"):
        build_forward(sec5_offline, TP)


def test_zero_data_fails_certification():
    traj = Trajectory(np.zeros(8), np.zeros(8), TS)
    with pytest.raises(CertificationError):
        certify(build_forward(traj, TP), N_ORDER)


# =============================================================================
# PROPERTIES
# =============================================================================

def test_any_window_lies_in_column_space(sec5_plant, sec5_offline):
    matrix = certify(build_forward(sec5_offline.forward(), TP), N_ORDER)
    H = matrix.stacked()

    rng = np.random.default_rng(11)
    u = rng.uniform(-1.0, 1.0, 40)
    other = Trajectory(u, simulate(sec5_plant, u, x0=rng.standard_normal(2)), TS)
    for start in range(0, 40 - TP - 1, 5):
        w = window(other, start, TP)
        coeffs, *_ = np.linalg.lstsq(H, w, rcond=None)
        assert np.linalg.norm(H @ coeffs - w) < 1e-8 * np.linalg.norm(w)


def test_rank_never_decreases_with_more_data(sec5_plant):
    long = collect_offline(sec5_plant, 20, DELAY, seed=5).forward()
    ranks = []
    for td in range(TP + 1, 21):
        prefix = Trajectory(long.u[:td], long.y[:td], TS)
        ranks.append(check_rank(build_forward(prefix, TP).stacked(), expected_rank(TP, N_ORDER)).rank)
    assert ranks == sorted(ranks)
    assert ranks[-1] == 5


def test_check_rank_reports_without_raising():
    result = check_rank(np.eye(3), 2)
    assert result.rank == 3
    assert not result.passed
    assert "FAIL" in result.summary()


def test_check_rank_validates_tolerance():
    with pytest.raises(ValueError, match="tolerance"):
        check_rank(np.eye(2), 2, tol=0.0)


def test_rank_profile_recovers_plant_order(sec5_plant):
    data = collect_offline(sec5_plant, 40, DELAY, seed=2)
    profile = rank_profile(data, 4)
    assert [tp for tp, _, _ in profile] == [1, 2, 3, 4]
    assert all(order == N_ORDER for _, _, order in profile)


def test_minimum_offline_lengths():
    assert minimum_offline_length(2, 1, "cbc") == 8
    assert minimum_offline_length(2, 1, "unified") == 7
    assert minimum_offline_length(2, 1, "cbc", tp=3) == 10
    with pytest.raises(ValueError, match="Unknown data kind"):
        minimum_offline_length(2, 1, "mpc")


def test_certification_is_logged(sec5_offline, caplog):
    with caplog.at_level(logging.INFO):
        certify(build_forward(sec5_offline.forward(), TP), N_ORDER, label="forward")
    records = [r for r in caplog.records if "✅ forward matrix (6, 6)" in r.getMessage()]
    assert len(records) == 1
    assert "smallest kept" in records[0].getMessage()
    assert records[0].name == "root"
