"""
Closed-Loop Controllers

Three controllers behind one step(r, y) -> u interface:
1. CBC-IBC     - forward predictor + inverse predictor + advanced filter z^L F
2. Unified-IBC - one predictor of C = G^-1 F / (1 - F) built from filtered plant data
3. IMC oracle  - classical model-based IMC with the same filter F

All buffers start at zero (plant at rest before the experiment). The CBC
forward predictor is built on lead-one data (u(t), y(t+1)): the prediction it
makes in loop t is the output the plant will report in loop t+1, which is
exactly what e(t+1) = y(t+1) - yhat(t) compares against.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from src.exceptions import ConfigurationError
from src.hankel_data import (
    DEFAULT_TOL,
    ControllerDataMatrix,
    Trajectory,
    build_controller_matrix,
    build_forward,
    build_inverse,
    certify,
    check_rank,
    expected_rank,
    minimum_offline_length,
)
from src.interconnect import unified_controller_trajectory
from src.lti_core import (
    DiscreteStateSpace,
    inverse_filter_system,
    make_advanced_filter,
    make_imc_filter,
)
from src.predictors import (
    ForwardPredictor,
    InversePredictor,
    build_forward_predictor,
    build_inverse_predictor,
    predict_forward,
    predict_inverse,
    pseudo_inverse,
)

CBC = "cbc"
UNIFIED = "unified"
IMC = "imc"

DISPLAY_NAMES = {
    CBC: "CBC-IBC",
    UNIFIED: "Unified-IBC",
    IMC: "IMC-oracle",
}


# =============================================================================
# STATE
# =============================================================================

class SignalWindow:
    """Fixed-length window of the most recent samples, oldest first."""

    def __init__(self, length: int):
        if length < 0:
            raise ValueError(f"Window length must be >= 0, got {length}")
        self._values = np.zeros(length)

    def __len__(self):
        return self._values.size

    @property
    def values(self) -> np.ndarray:
        return self._values

    def push(self, value: float):
        if self._values.size:
            self._values[:-1] = self._values[1:]
            self._values[-1] = value

    def clear(self):
        self._values[:] = 0.0


@dataclass
class ControllerState:
    """Everything a controller remembers between loops."""
    windows: Dict[str, SignalWindow] = field(default_factory=dict)
    # Internal states of realized filters / models, keyed by role
    states: Dict[str, np.ndarray] = field(default_factory=dict)
    # yhat(t-1) for CBC, the model output for IMC
    pending_prediction: float = 0.0
    last_prediction: Optional[float] = None
    last_error: Optional[float] = None
    steps: int = 0

    def reset(self):
        for window in self.windows.values():
            window.clear()
        for key in self.states:
            self.states[key] = np.zeros_like(self.states[key])
        self.pending_prediction = 0.0
        self.last_prediction = None
        self.last_error = None
        self.steps = 0

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Copies of every window, for inspection."""
        return {name: window.values.copy() for name, window in self.windows.items()}


@dataclass(frozen=True, eq=False)
class ControllerKind:
    """Immutable artifacts of one controller; which fields are set depends on `name`."""
    name: str
    tp: int
    delay: int
    ts: float
    forward: Optional[ForwardPredictor] = None
    inverse: Optional[InversePredictor] = None
    advanced_filter: Optional[DiscreteStateSpace] = None
    controller_matrix: Optional[ControllerDataMatrix] = None
    controller_gain: Optional[np.ndarray] = None     # F_f [E_p; F_p; E_f]^+
    model: Optional[DiscreteStateSpace] = None
    model_inverse: Optional[DiscreteStateSpace] = None   # G^-1 F

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES.get(self.name, self.name)


def _ss_step(sys: DiscreteStateSpace, x: np.ndarray, v: float):
    """One step of a realized system: returns (output, next state)."""
    if sys.order == 0:
        return float(sys.D[0, 0] * v), x
    y = float(sys.C[0] @ x + sys.D[0, 0] * v)
    return y, sys.A @ x + sys.B[:, 0] * v


# =============================================================================
# STEP FUNCTIONS
# =============================================================================

def cbc_step(kind: ControllerKind, state: ControllerState, r_t: float, y_t: float) -> float:
    """
    One CBC-IBC loop.

    Windows before the call: u over [t-T_p, t-1], yhat over [t-T_p, t-1],
    s1 over [t-T_p-L, t-1], s2 over [t-T_p-L, t-L-1].
    """
    tp, L = kind.tp, kind.delay
    w = state.windows

    e = y_t - state.pending_prediction
    s1 = r_t - e

    s1_hist = w["s1"].values
    s2 = predict_inverse(
        kind.inverse,
        u_ini_inv=w["s2"].values,
        y_ini_inv=s1_hist[:tp],
        y_pred_inv=np.append(s1_hist[tp:], s1),
    )

    u, state.states["filter"] = _ss_step(kind.advanced_filter, state.states["filter"], s2)

    yhat = predict_forward(kind.forward, w["u"].values, w["yhat"].values, u)

    w["s1"].push(s1)
    w["s2"].push(s2)
    w["u"].push(u)
    w["yhat"].push(yhat)

    state.last_prediction = state.pending_prediction
    state.last_error = e
    state.pending_prediction = yhat
    state.steps += 1
    return u


def unified_step(kind: ControllerKind, state: ControllerState, r_t: float, y_t: float) -> float:
    """One Unified-IBC loop: u(t) = F_f [E_p; F_p; E_f]^+ col(s3 window, u window, s3(t))."""
    w = state.windows
    s3 = r_t - y_t
    u = float(kind.controller_gain @ np.concatenate([w["s3"].values, w["u"].values, [s3]]))
    w["s3"].push(s3)
    w["u"].push(u)
    state.steps += 1
    return u


def imc_step(kind: ControllerKind, state: ControllerState, r_t: float, y_t: float) -> float:
    """Classical IMC: yhat from the internal model, e = y - yhat, u = G^-1 F (r - e)."""
    model = kind.model
    x_model = state.states["model"]
    yhat = float(model.C[0] @ x_model) if model.order else 0.0
    e = y_t - yhat

    u, state.states["inverse"] = _ss_step(kind.model_inverse, state.states["inverse"], r_t - e)
    if model.order:
        state.states["model"] = model.A @ x_model + model.B[:, 0] * u

    state.last_prediction = yhat
    state.last_error = e
    state.steps += 1
    return u


_STEPS: Dict[str, Callable[[ControllerKind, ControllerState, float, float], float]] = {
    CBC: cbc_step,
    UNIFIED: unified_step,
    IMC: imc_step,
}


class Controller:
    """A ControllerKind paired with its private ControllerState; one instance per experiment."""

    def __init__(self, kind: ControllerKind, state: ControllerState):
        self.kind = kind
        self.state = state
        self._step = _STEPS[kind.name]

    @property
    def name(self) -> str:
        return self.kind.name

    def step(self, r_t: float, y_t: float) -> float:
        return self._step(self.kind, self.state, r_t, y_t)

    def reset(self):
        self.state.reset()

    @property
    def exposes_prediction(self) -> bool:
        return self.kind.name in (CBC, IMC)

    def memory_footprint(self) -> int:
        """
        Past time instants each data-enabled prediction must remember, summed:
        CBC T_p (forward) + T_p + L (inverse), unified T_p, IMC none (model state only).
        """
        if self.kind.name == CBC:
            return 2 * self.kind.tp + self.kind.delay
        if self.kind.name == UNIFIED:
            return self.kind.tp
        return 0

    def __repr__(self):
        return f"Controller({self.kind.display_name}, tp={self.kind.tp}, L={self.kind.delay})"


# =============================================================================
# CONSTRUCTION
# =============================================================================

def _check_orders(tp: int, n: int, delay: int):
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    if tp < n:
        raise ConfigurationError(f"T_p={tp} must be >= n={n}")
    if delay < 1:
        raise ConfigurationError(f"L must be >= 1 (strictly proper plant), got {delay}")


def _short_data_ranks(offline: Trajectory, tp: int, n: int, delay: int, tol: float) -> str:
    """Rank diagnostics for data below the CBC budget; the budget holds even when both ranks pass."""
    parts = []
    for label, build in (("forward", lambda: build_forward(offline.lead(1), tp)),
                         ("inverse", lambda: build_inverse(offline, tp, delay))):
        try:
            matrix = build()
        except ValueError as e:
            parts.append(f"{label} matrix not buildable ({e})")
            continue
        result = check_rank(matrix.stacked(), expected_rank(tp, n), tol)
        sv = ", ".join(f"{s:.3e}" for s in result.singular_values)
        parts.append(f"{label} matrix {matrix.stacked().shape} rank {result.rank}/{result.expected} [{sv}]")
    return "; ".join(parts)


def build_cbc(offline: Trajectory, tp: int, n: int, delay: int, tau: float,
              tol: float = DEFAULT_TOL) -> Controller:
    """
    CBC-IBC setup: certified forward and inverse predictors and z^L F.

    Args:
        offline: inverse-ready data, y exactly L samples longer than u
        tp: past window T_p >= n
        n: plant order
        delay: plant L-delay
        tau: filter time constant (seconds)

    Raises:
        ConfigurationError: bad orders, wrong data lengths, too little data
        CertificationError: forward or inverse matrix failed its rank test
    """
    _check_orders(tp, n, delay)
    if offline.extra_outputs != delay:
        raise ConfigurationError(
            f"CBC data needs y exactly L={delay} samples longer than u, "
            f"got T_u={offline.u.size}, T_y={offline.y.size}"
        )
    needed = minimum_offline_length(n, delay, CBC, tp)
    if offline.length < needed:
        raise ConfigurationError(
            f"CBC needs T_d >= 2 T_p + 1 + n + L = {needed} offline samples, got {offline.length}; "
            f"{_short_data_ranks(offline, tp, n, delay, tol)}"
        )

    try:
        forward = certify(build_forward(offline.lead(1), tp), n, tol, label="forward")
        inverse = certify(build_inverse(offline, tp, delay), n, tol, label="inverse")
        advanced = make_advanced_filter(tau, offline.ts, delay)
    except ValueError as e:
        raise ConfigurationError(f"CBC setup: {e}")

    kind = ControllerKind(
        name=CBC, tp=tp, delay=delay, ts=offline.ts,
        forward=build_forward_predictor(forward),
        inverse=build_inverse_predictor(inverse),
        advanced_filter=advanced,
    )
    state = ControllerState(
        windows={
            "u": SignalWindow(tp),
            "yhat": SignalWindow(tp),
            "s1": SignalWindow(tp + delay),
            "s2": SignalWindow(tp),
        },
        states={"filter": np.zeros(advanced.order)},
    )
    logging.info(f"✅ Built {kind.display_name}: T_p={tp}, L={delay}, tau={tau}, T_d={offline.length}")
    logging.info(f"⚠️  First {tp + delay} steps run on zero-filled windows (plant assumed at rest)")
    return Controller(kind, state)


def build_unified(offline: Trajectory, tp: int, n: int, tau: float, delay: int = 1,
                  tol: float = DEFAULT_TOL) -> Controller:
    """
    Unified-IBC setup: filter the plant data through F, certify H_C, keep
    F_f [E_p; F_p; E_f]^+.

    Raises:
        ConfigurationError: bad orders or data
        CertificationError: H_C failed its rank test
    """
    _check_orders(tp, n, delay)
    data = offline.forward() if offline.extra_outputs else offline

    try:
        F = make_imc_filter(tau, data.ts, delay)
        w_c = unified_controller_trajectory(data.u, data.y, F, label=data.label)
        matrix = certify(build_controller_matrix(w_c.u, w_c.y, tp), n, tol, label="controller")
    except ValueError as e:
        raise ConfigurationError(f"Unified setup: {e}")

    A = np.vstack([matrix.E_p, matrix.F_p, matrix.E_f])
    gain = (matrix.F_f @ pseudo_inverse(A, cutoff=matrix.rank_check.cutoff)).ravel()
    gain.setflags(write=False)

    kind = ControllerKind(
        name=UNIFIED, tp=tp, delay=delay, ts=data.ts,
        controller_matrix=matrix,
        controller_gain=gain,
    )
    state = ControllerState(windows={"u": SignalWindow(tp), "s3": SignalWindow(tp)})
    logging.info(f"✅ Built {kind.display_name}: T_p={tp}, tau={tau}, T_d={data.length}")
    logging.info(f"⚠️  First {tp} steps run on zero-filled windows (plant assumed at rest)")
    return Controller(kind, state)


def build_imc(model: DiscreteStateSpace, tau: float, delay: int) -> Controller:
    """
    Model-based IMC oracle with filter F of order L.

    Raises:
        ConfigurationError: model not strictly proper, non-minimum-phase, or bad filter
    """
    if delay < 1:
        raise ConfigurationError(f"L must be >= 1, got {delay}")
    if model.D[0, 0] != 0.0:
        raise ConfigurationError("IMC model must be strictly proper (D = 0)")
    try:
        F = make_imc_filter(tau, model.ts, delay)
        Q = inverse_filter_system(model, F)
    except ValueError as e:
        raise ConfigurationError(f"IMC setup: {e}")

    kind = ControllerKind(name=IMC, tp=0, delay=delay, ts=model.ts, model=model, model_inverse=Q)
    state = ControllerState(states={"model": np.zeros(model.order), "inverse": np.zeros(Q.order)})
    logging.info(f"✅ Built {kind.display_name}: model order {model.order}, tau={tau}, L={delay}")
    return Controller(kind, state)
