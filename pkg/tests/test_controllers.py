import numpy as np
import pytest

from conftest import DELAY, N_ORDER, TAU, TP, TS
from src.controllers import (
    CBC,
    IMC,
    UNIFIED,
    SignalWindow,
    build_cbc,
    build_imc,
    build_unified,
)
from src.exceptions import CertificationError, ConfigurationError
from src.hankel_data import Trajectory
from src.lti_core import DiscreteStateSpace
from src.sim_cli import collect_offline, run_closed_loop


@pytest.fixture
def controllers(sec5_plant, sec5_offline):
    return {
        CBC: build_cbc(sec5_offline, TP, N_ORDER, DELAY, TAU),
        UNIFIED: build_unified(sec5_offline, TP, N_ORDER, TAU, DELAY),
        IMC: build_imc(sec5_plant, TAU, DELAY),
    }


def test_signal_window_keeps_latest_samples():
    w = SignalWindow(3)
    for v in (1.0, 2.0, 3.0, 4.0):
        w.push(v)
    np.testing.assert_array_equal(w.values, [2.0, 3.0, 4.0])
    w.clear()
    np.testing.assert_array_equal(w.values, np.zeros(3))


def test_empty_signal_window_ignores_pushes():
    w = SignalWindow(0)
    w.push(1.0)
    assert len(w) == 0


@pytest.mark.parametrize("kind", [CBC, UNIFIED, IMC])
def test_zero_inputs_give_zero_outputs(controllers, kind):
    ctrl = controllers[kind]
    assert all(ctrl.step(0.0, 0.0) == 0.0 for _ in range(50))


@pytest.mark.parametrize("kind", [CBC, UNIFIED, IMC])
def test_reset_restores_rest(controllers, kind):
    ctrl = controllers[kind]
    for k in range(20):
        ctrl.step(1.0, 0.1 * k)
    ctrl.reset()
    assert ctrl.state.steps == 0
    assert ctrl.step(0.0, 0.0) == 0.0


# =============================================================================
# CONSTRUCTION
# =============================================================================

def test_cbc_builds_from_example_data(controllers):
    ctrl = controllers[CBC]
    assert ctrl.kind.forward.matrix.rank == 5
    assert ctrl.kind.inverse.matrix.rank == 5
    assert ctrl.kind.advanced_filter.order == DELAY
    assert {name: len(w) for name, w in ctrl.state.windows.items()} == {"u": 2, "yhat": 2, "s1": 3, "s2": 2}


def test_cbc_rejects_window_shorter_than_order(sec5_offline):
    with pytest.raises(ConfigurationError, match="must be >= n"):
        build_cbc(sec5_offline, 1, N_ORDER, DELAY, TAU)


def test_cbc_rejects_short_offline_data(sec5_plant):
    offline = collect_offline(sec5_plant, 7, DELAY, seed=0)
    with pytest.raises(ConfigurationError, match="T_d >= 2 T_p \\+ 1 \\+ n \\+ L = 8") as excinfo:
        build_cbc(offline, TP, N_ORDER, DELAY, TAU)
    message = str(excinfo.value)
    assert "forward matrix (6, 5) rank 5/5" in message
    assert "inverse matrix (7, 5) rank 5/5" in message


def test_cbc_needs_inverse_ready_data(sec5_offline):
    with pytest.raises(ConfigurationError, match="exactly L=1"):
        build_cbc(sec5_offline.forward(), TP, N_ORDER, DELAY, TAU)


def test_unified_builds_with_seven_samples(sec5_plant):
    ctrl = build_unified(collect_offline(sec5_plant, 7, DELAY, seed=0), TP, N_ORDER, TAU, DELAY)
    assert ctrl.kind.controller_matrix.rank == 5
    assert ctrl.kind.controller_gain.shape == (2 * TP + 1,)


def test_unified_fails_with_six_samples(sec5_plant):
    with pytest.raises(CertificationError, match="controller"):
        build_unified(collect_offline(sec5_plant, 6, DELAY, seed=0), TP, N_ORDER, TAU, DELAY)


def test_unified_fails_on_zero_data():
    with pytest.raises(CertificationError):
        build_unified(Trajectory(np.zeros(8), np.zeros(8), TS), TP, N_ORDER, TAU, DELAY)


def test_unstable_filter_is_a_configuration_error(sec5_offline):
    with pytest.raises(ConfigurationError, match="Unstable filter"):
        build_unified(sec5_offline, TP, N_ORDER, 0.001, DELAY)


def test_imc_requires_strictly_proper_model():
    model = DiscreteStateSpace([[0.5]], [[1.0]], [[1.0]], [[1.0]], TS)
    with pytest.raises(ConfigurationError, match="strictly proper"):
        build_imc(model, TAU, DELAY)


def test_memory_footprints(controllers):
    cbc = controllers[CBC].memory_footprint()
    unified = controllers[UNIFIED].memory_footprint()
    assert cbc == 2 * TP + DELAY
    assert unified == TP
    assert cbc - unified == N_ORDER + DELAY
    assert controllers[IMC].memory_footprint() == 0


# =============================================================================
# BUFFER SHIFTS
# =============================================================================

def test_cbc_windows_hold_the_named_signals(controllers):
    ctrl = controllers[CBC]
    rng = np.random.default_rng(5)
    s1_hist, u_hist, yhat_hist = [], [], []
    for _ in range(12):
        r, y = rng.uniform(-1, 1, 2)
        u_hist.append(ctrl.step(r, y))
        s1_hist.append(r - ctrl.state.last_error)
        yhat_hist.append(ctrl.state.pending_prediction)

    windows = ctrl.state.snapshot()
    np.testing.assert_allclose(windows["u"], u_hist[-TP:])
    np.testing.assert_allclose(windows["yhat"], yhat_hist[-TP:])
    np.testing.assert_allclose(windows["s1"], s1_hist[-(TP + DELAY):])
    assert windows["s2"].size == TP


def test_cbc_error_uses_previous_prediction(controllers):
    ctrl = controllers[CBC]
    ctrl.step(1.0, 0.0)
    previous = ctrl.state.pending_prediction
    ctrl.step(1.0, 0.3)
    assert ctrl.state.last_error == pytest.approx(0.3 - previous)


def test_unified_windows_hold_the_named_signals(controllers):
    ctrl = controllers[UNIFIED]
    rng = np.random.default_rng(6)
    s3_hist, u_hist = [], []
    for _ in range(10):
        r, y = rng.uniform(-1, 1, 2)
        u_hist.append(ctrl.step(r, y))
        s3_hist.append(r - y)

    windows = ctrl.state.snapshot()
    np.testing.assert_allclose(windows["u"], u_hist[-TP:])
    np.testing.assert_allclose(windows["s3"], s3_hist[-TP:])


def test_snapshot_is_a_copy(controllers):
    ctrl = controllers[UNIFIED]
    snap = ctrl.state.snapshot()
    ctrl.step(1.0, 0.0)
    np.testing.assert_array_equal(snap["s3"], np.zeros(TP))


# =============================================================================
# CLOSED-LOOP BEHAVIOUR
# =============================================================================

@pytest.fixture
def busy_config(sec5_config):
    """2000 samples with several reference and disturbance steps."""
    return sec5_config.with_overrides(
        duration=20.0,
        ref_steps=((0.5, 1.0), (5.0, -0.5), (9.0, 0.3), (15.0, 0.8)),
        dist_steps=((3.0, 0.2), (12.0, -0.4), (17.5, 0.1)),
    )


def test_ibc_variants_match_imc_on_a_busy_experiment(busy_config, controllers):
    logs = {kind: run_closed_loop(busy_config, controller=ctrl) for kind, ctrl in controllers.items()}
    assert logs[IMC].steps == 2000
    for kind in (CBC, UNIFIED):
        assert np.max(np.abs(logs[kind].u - logs[IMC].u)) < 1e-6
        assert np.max(np.abs(logs[kind].y - logs[IMC].y)) < 1e-6


def test_imc_error_is_zero_with_perfect_model(sec5_config, controllers):
    log = run_closed_loop(sec5_config.with_overrides(dist_steps=()), controller=controllers[IMC])
    assert np.max(np.abs(log.e)) < 1e-12


def test_imc_input_settles_at_inverse_dc_gain(sec5_config, controllers):
    log = run_closed_loop(sec5_config.with_overrides(dist_steps=()), controller=controllers[IMC])
    assert log.u[-1] == pytest.approx(1.0 / 1.25, abs=1e-6)
    assert log.y[-1] == pytest.approx(1.0, abs=1e-6)
