"""
Data-Driven Interconnections

Turns trajectories recorded in isolation into trajectories of interconnected
systems, without a parametric model:
- regenerate: zero-initial-condition response of a system to any input, from its data alone
- zero_ic_trajectory: strip the initial-condition response from recorded data
- series / feedback / negative_feedback / parallel: trajectories of G_1, G_2 combined
- unified_controller_trajectory: trajectory of C = G^-1 F / (1 - F) from plant data

Results are not certified; certifying them for prediction is the caller's step.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.exceptions import ConfigurationError
from src.hankel_data import DEFAULT_TOL, Trajectory, build_forward, certify
from src.lti_core import ImcFilter, filter_signal
from src.predictors import ForwardPredictor, build_forward_predictor

SERIES = "series"
FEEDBACK = "feedback"
NEGATIVE_FEEDBACK = "negative_feedback"
PARALLEL = "parallel"
CONTROLLER = "controller"


# =============================================================================
# DATA STRUCTURES
# =============================================================================

@dataclass(frozen=True, eq=False)
class RegenerationContext:
    """Certified forward predictor of one system, ready to replay it from rest."""
    predictor: ForwardPredictor
    label: str = "system"

    @property
    def depth(self) -> int:
        return self.predictor.depth


@dataclass(frozen=True, eq=False)
class InterconnectionTrajectory:
    u: np.ndarray
    y: np.ndarray
    ts: float
    kind: str
    provenance: Tuple[str, ...] = ()

    def __post_init__(self):
        u = np.array(self.u, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if u.size != y.size:
            raise ValueError(f"Interconnection trajectory needs equal lengths, got {u.size} and {y.size}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def length(self) -> int:
        return self.u.size

    def to_trajectory(self) -> Trajectory:
        return Trajectory(self.u, self.y, self.ts, label=f"{self.kind}({','.join(self.provenance)})")


# =============================================================================
# REGENERATION (zero-IC replay from data)
# =============================================================================

def regeneration_context(traj: Trajectory, tp: int, n: int, tol: float = DEFAULT_TOL) -> RegenerationContext:
    """
    Certify the forward data matrix of `traj` and wrap its predictor.

    Raises:
        CertificationError: rank != T_p + 1 + n
    """
    data = traj.forward() if traj.extra_outputs else traj
    try:
        matrix = build_forward(data, tp)
    except ValueError as e:
        raise ConfigurationError(f"{traj.label}: {e}")
    matrix = certify(matrix, n, tol, label=f"{traj.label} forward")
    return RegenerationContext(predictor=build_forward_predictor(matrix), label=traj.label)


def regenerate(ctx: RegenerationContext, u_star: Sequence[float]) -> np.ndarray:
    """
    Output of the recorded system to u_star, starting from rest.

    Pads u_star with T_p leading zeros and rolls the forward predictor over it,
    feeding back its own outputs as the output history.
    """
    if not isinstance(ctx, RegenerationContext) or not ctx.predictor.matrix.certified:
        raise ConfigurationError("regenerate needs a certified RegenerationContext")
    u_star = np.asarray(u_star, dtype=float).ravel()
    tp = ctx.depth
    gain = ctx.predictor.gain
    a, b, c = gain[:tp], gain[tp], gain[tp + 1:]

    T = u_star.size
    u_mod = np.concatenate([np.zeros(tp), u_star])
    y_mod = np.zeros(T + tp)
    for t in range(tp, T + tp):
        y_mod[t] = a @ u_mod[t - tp:t] + b * u_mod[t] + c @ y_mod[t - tp:t]
    return y_mod[tp:]


def zero_ic_trajectory(traj: Trajectory, tp: int, n: int, tol: float = DEFAULT_TOL) -> Trajectory:
    """col(u^d, Z(u^d, u^d, y^d)): same inputs, outputs re-rolled from rest."""
    ctx = regeneration_context(traj, tp, n, tol)
    y0 = regenerate(ctx, traj.u)
    return Trajectory(traj.u, y0, traj.ts, label=f"{traj.label}@rest")


# =============================================================================
# INTERCONNECTIONS
# =============================================================================

def _io(w: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    w = w.forward() if w.extra_outputs else w
    return w.u, w.y


def _check_rates(w1: Trajectory, w2: Trajectory):
    if not np.isclose(w1.ts, w2.ts, rtol=1e-12, atol=0.0):
        raise ConfigurationError(f"Sampling periods differ: {w1.ts} vs {w2.ts}")


def series(w1: Trajectory, w2: Trajectory, tp: int, n2: int, tol: float = DEFAULT_TOL) -> InterconnectionTrajectory:
    """
    G_s = G_2 after G_1: col(u_1, Z(y_1, u_2, y_2)).

    G_1 keeps its recorded initial condition; G_2 starts from rest. The result
    is as long as w1 regardless of the length of w2.
    """
    _check_rates(w1, w2)
    u1, y1 = _io(w1)
    ys = regenerate(regeneration_context(w2, tp, n2, tol), y1)
    logging.info(f"🔗 series {w1.label} -> {w2.label}: {u1.size} samples")
    return InterconnectionTrajectory(u1, ys, w1.ts, SERIES, (w1.label, w2.label))


def feedback(w1: Trajectory, w2: Trajectory, tp: int, n2: int, tol: float = DEFAULT_TOL) -> InterconnectionTrajectory:
    """Positive feedback of G_2 around G_1: col(u_1 - y2_check, y_1), y2_check = Z(y_1, u_2, y_2)."""
    _check_rates(w1, w2)
    u1, y1 = _io(w1)
    y2_check = regenerate(regeneration_context(w2, tp, n2, tol), y1)
    logging.info(f"🔁 positive feedback {w1.label} <- {w2.label}: {u1.size} samples")
    return InterconnectionTrajectory(u1 - y2_check, y1, w1.ts, FEEDBACK, (w1.label, w2.label))


def negative_feedback(w1: Trajectory, w2: Trajectory, tp: int, n2: int,
                      tol: float = DEFAULT_TOL) -> InterconnectionTrajectory:
    """Negative feedback of G_2 around G_1: col(u_1 + y2_check, y_1)."""
    _check_rates(w1, w2)
    u1, y1 = _io(w1)
    y2_check = regenerate(regeneration_context(w2, tp, n2, tol), y1)
    logging.info(f"🔁 negative feedback {w1.label} <- {w2.label}: {u1.size} samples")
    return InterconnectionTrajectory(u1 + y2_check, y1, w1.ts, NEGATIVE_FEEDBACK, (w1.label, w2.label))


def parallel(w1: Trajectory, w2: Trajectory, tp: int, n2: int, tol: float = DEFAULT_TOL) -> InterconnectionTrajectory:
    """G_1 + G_2 driven by u_1: col(u_1, y_1 + Z(u_1, u_2, y_2))."""
    _check_rates(w1, w2)
    u1, y1 = _io(w1)
    y2 = regenerate(regeneration_context(w2, tp, n2, tol), u1)
    logging.info(f"⏸️ parallel {w1.label} + {w2.label}: {u1.size} samples")
    return InterconnectionTrajectory(u1, y1 + y2, w1.ts, PARALLEL, (w1.label, w2.label))


INTERCONNECTIONS = {
    SERIES: series,
    FEEDBACK: feedback,
    NEGATIVE_FEEDBACK: negative_feedback,
    PARALLEL: parallel,
}


def unified_controller_trajectory(u_d: Sequence[float], y_d: Sequence[float], F: ImcFilter,
                                  label: str = "plant") -> InterconnectionTrajectory:
    """
    w_c = col(y^d - ybar^d, ubar^d) with ybar = f * y^d and ubar = f * u^d:
    a trajectory of C = G^-1 F / (1 - F).
    """
    u_d = np.asarray(u_d, dtype=float).ravel()
    y_d = np.asarray(y_d, dtype=float).ravel()
    if u_d.size != y_d.size:
        raise ValueError(f"Controller trajectory needs equal-length u and y, got {u_d.size} and {y_d.size}")
    ybar = filter_signal(F.system, y_d)
    ubar = filter_signal(F.system, u_d)
    return InterconnectionTrajectory(y_d - ybar, ubar, F.ts, CONTROLLER, (label, f"F(tau={F.tau:g},L={F.order})"))
