"""
Data-Enabled Predictors

Single-step predictions straight from certified data matrices:
- Forward:  y_pred = Y_f [U_p; U_f; Y_p]^+ col(u_ini, u_pred, y_ini)
- Inverse:  u(t-L) = U_f [U_p; Y_p; Y_fL]^+ col(u_ini, y_ini, y_window)

Pseudoinverses are taken once at construction with the singular-value cutoff
used to certify the matrix, so each prediction is one dot product.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.exceptions import ConfigurationError
from src.hankel_data import (
    DEFAULT_TOL,
    ForwardDataMatrix,
    InverseDataMatrix,
    Trajectory,
    _DataMatrix,
)


# =============================================================================
# MINIMUM-NORM LEAST SQUARES
# =============================================================================

def pseudo_inverse(A: np.ndarray, tol: float = DEFAULT_TOL, cutoff: Optional[float] = None) -> np.ndarray:
    """
    Moore-Penrose pseudoinverse via SVD.

    Singular values at or below `cutoff` (absolute) are dropped; without a
    cutoff the threshold is tol * sigma_max(A).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if cutoff is None:
        cutoff = tol * (s[0] if s.size else 0.0)
    keep = s > cutoff
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def min_norm_solve(A: np.ndarray, b: Sequence[float], tol: float = DEFAULT_TOL) -> np.ndarray:
    """x = A^+ b: the least-squares solution of smallest Euclidean norm."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if b.size != A.shape[0]:
        raise ValueError(f"Right-hand side has {b.size} entries, matrix has {A.shape[0]} rows")
    return pseudo_inverse(A, tol) @ b


def _require_certified(matrix: _DataMatrix):
    if not matrix.certified:
        raise ConfigurationError(
            f"{matrix.name} data matrix must be certified before it is used for prediction"
        )


def _shared_cutoff(matrix: _DataMatrix) -> float:
    return matrix.rank_check.cutoff


# =============================================================================
# FORWARD PREDICTOR
# =============================================================================

@dataclass(frozen=True, eq=False)
class ForwardPredictor:
    matrix: ForwardDataMatrix
    pinv: np.ndarray       # [U_p; U_f; Y_p]^+
    gain: np.ndarray       # Y_f [U_p; U_f; Y_p]^+, length 2 T_p + 1

    @property
    def depth(self) -> int:
        return self.matrix.depth


def build_forward_predictor(matrix: ForwardDataMatrix) -> ForwardPredictor:
    _require_certified(matrix)
    A = np.vstack([matrix.U_p, matrix.U_f, matrix.Y_p])
    pinv = pseudo_inverse(A, cutoff=_shared_cutoff(matrix))
    gain = (matrix.Y_f @ pinv).ravel()
    pinv.setflags(write=False)
    gain.setflags(write=False)
    return ForwardPredictor(matrix=matrix, pinv=pinv, gain=gain)


def _check_window(name: str, values: np.ndarray, expected: int):
    if values.size != expected:
        raise ValueError(f"{name} must have {expected} samples, got {values.size}")


def predict_forward(p: ForwardPredictor, u_ini: Sequence[float], y_ini: Sequence[float], u_pred: float) -> float:
    """
    One-step output prediction consistent with the last T_p samples.

    Args:
        u_ini: inputs over [t - T_p, t - 1]
        y_ini: outputs over [t - T_p, t - 1]
        u_pred: input at t

    Returns:
        y(t)
    """
    u_ini = np.asarray(u_ini, dtype=float).ravel()
    y_ini = np.asarray(y_ini, dtype=float).ravel()
    _check_window("u_ini", u_ini, p.depth)
    _check_window("y_ini", y_ini, p.depth)
    rhs = np.concatenate([u_ini, [float(u_pred)], y_ini])
    return float(p.gain @ rhs)


def forward_coefficients(p: ForwardPredictor) -> Tuple[np.ndarray, float, np.ndarray]:
    """(a, b, c) with y_pred = a . u_ini + b u_pred + c . y_ini."""
    tp = p.depth
    return p.gain[:tp].copy(), float(p.gain[tp]), p.gain[tp + 1:].copy()


def predict_sequence(p: ForwardPredictor, u: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """
    Open-loop validation: predict y(t) for t = T_p .. N-1 from recorded history.
    """
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if u.size != y.size:
        raise ValueError(f"Need equal-length u and y, got {u.size} and {y.size}")
    tp = p.depth
    return np.array([
        predict_forward(p, u[t - tp:t], y[t - tp:t], u[t]) for t in range(tp, u.size)
    ])


def fit_arx(traj: Trajectory, n: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """
    Least-squares ARX(n, n) one-step predictor fitted to the offline data.

    Returns:
        theta with y(t) = theta . col(u[t-n:t], u(t), y[t-n:t]), the same layout
        as the forward predictor's gain.
    """
    u = traj.u
    y = traj.y[:u.size]
    rows = [np.concatenate([u[t - n:t], [u[t]], y[t - n:t]]) for t in range(n, u.size)]
    if not rows:
        raise ValueError(f"Need more than n={n} samples to fit an ARX model")
    Phi = np.vstack(rows)
    theta, *_ = np.linalg.lstsq(Phi, y[n:], rcond=tol)
    return theta


# =============================================================================
# INVERSE PREDICTOR
# =============================================================================

@dataclass(frozen=True, eq=False)
class InversePredictor:
    matrix: InverseDataMatrix
    pinv: np.ndarray       # [U_p; Y_p; Y_fL]^+
    gain: np.ndarray       # U_f [U_p; Y_p; Y_fL]^+, length 2 T_p + 1 + L

    @property
    def depth(self) -> int:
        return self.matrix.depth

    @property
    def delay(self) -> int:
        return self.matrix.delay


def build_inverse_predictor(matrix: InverseDataMatrix) -> InversePredictor:
    _require_certified(matrix)
    A = np.vstack([matrix.U_p, matrix.Y_p, matrix.Y_fL])
    pinv = pseudo_inverse(A, cutoff=_shared_cutoff(matrix))
    gain = (matrix.U_f @ pinv).ravel()
    pinv.setflags(write=False)
    gain.setflags(write=False)
    return InversePredictor(matrix=matrix, pinv=pinv, gain=gain)


def predict_inverse(p: InversePredictor, u_ini_inv: Sequence[float], y_ini_inv: Sequence[float],
                    y_pred_inv: Sequence[float]) -> float:
    """
    Reconstruct the input L steps in the past.

    Args:
        u_ini_inv: inputs over [t - T_p - L, t - L - 1]
        y_ini_inv: outputs over [t - T_p - L, t - L - 1]
        y_pred_inv: outputs over [t - L, t]

    Returns:
        u(t - L)
    """
    u_ini_inv = np.asarray(u_ini_inv, dtype=float).ravel()
    y_ini_inv = np.asarray(y_ini_inv, dtype=float).ravel()
    y_pred_inv = np.asarray(y_pred_inv, dtype=float).ravel()
    _check_window("u_ini_inv", u_ini_inv, p.depth)
    _check_window("y_ini_inv", y_ini_inv, p.depth)
    _check_window("y_pred_inv", y_pred_inv, p.delay + 1)
    return float(p.gain @ np.concatenate([u_ini_inv, y_ini_inv, y_pred_inv]))
