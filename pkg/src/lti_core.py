"""
LTI Core - Exact Discrete-Time Machinery

Everything parametric lives here:
1. Realization: transfer function -> controllable canonical state space (scipy tf2ss)
2. ZOH discretization via the augmented matrix exponential (scipy expm)
3. Exact simulation, impulse responses, zero-IC filtering
4. IMC filter F(z) = 1 / ((tau/Ts) z + 1 - tau/Ts)^L and its advanced form z^L F(z)
5. Oracle realizations: model inverse times filter, and the single-block IMC controller

The data-driven side never touches these objects except to generate data and to
check itself against them.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import signal
from scipy.linalg import expm

# Leading numerator coefficients below this (relative) are treated as exact zeros
_TRIM_TOL = 1e-9


# =============================================================================
# DATA STRUCTURES
# =============================================================================

def _trim_leading_zeros(coeffs: np.ndarray) -> np.ndarray:
    nonzero = np.flatnonzero(coeffs)
    if nonzero.size == 0:
        return np.zeros(1)
    return coeffs[nonzero[0]:]


@dataclass(frozen=True)
class ContinuousTransferFunction:
    """G(s) = num(s) / den(s), coefficients in descending powers of s."""
    num: Tuple[float, ...]
    den: Tuple[float, ...]

    def __post_init__(self):
        num = _trim_leading_zeros(np.asarray(self.num, dtype=float).ravel())
        den = np.asarray(self.den, dtype=float).ravel()
        if den.size == 0 or den[0] == 0:
            raise ValueError(f"Leading denominator coefficient must be nonzero, got {self.den}")
        object.__setattr__(self, "num", tuple(num.tolist()))
        object.__setattr__(self, "den", tuple(den.tolist()))

    @property
    def order(self) -> int:
        """n(G): denominator degree."""
        return len(self.den) - 1

    @property
    def l_delay(self) -> int:
        """L(G): denominator degree minus numerator degree."""
        return len(self.den) - len(self.num)

    @property
    def is_proper(self) -> bool:
        return self.l_delay >= 0

    def evaluate(self, s: complex) -> complex:
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def dc_gain(self) -> float:
        return float(np.real(self.evaluate(0.0)))


class ContinuousStateSpace(NamedTuple):
    """Continuous-time realization (A_c, B_c, C_c, D_c)."""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray


@dataclass(frozen=True, eq=False)
class DiscreteStateSpace:
    """
    x(t+1) = A x(t) + B u(t),  y(t) = C x(t) + D u(t), sampled at ts seconds.

    An order-0 system (A is 0x0) is a pure gain D.
    """
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    ts: float

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        A = np.zeros((0, 0)) if A.size == 0 else np.atleast_2d(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        try:
            B = np.array(self.B, dtype=float).reshape(n, 1)
            C = np.array(self.C, dtype=float).reshape(1, n)
            D = np.array(self.D, dtype=float).reshape(1, 1)
        except ValueError:
            raise ValueError(
                f"Inconsistent dimensions for order {n}: B {np.shape(self.B)}, "
                f"C {np.shape(self.C)}, D {np.shape(self.D)}"
            )
        if self.ts <= 0:
            raise ValueError(f"Sampling period must be positive, got {self.ts}")
        for name, value in (("A", A), ("B", B), ("C", C), ("D", D)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def spectral_radius(self) -> float:
        if self.order == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    @property
    def is_stable(self) -> bool:
        return self.spectral_radius < 1.0

    def evaluate(self, z: complex) -> complex:
        """Transfer function C (zI - A)^{-1} B + D at a point z."""
        if self.order == 0:
            return complex(self.D[0, 0])
        x = np.linalg.solve(z * np.eye(self.order) - self.A, self.B)
        return complex((self.C @ x + self.D)[0, 0])

    def __repr__(self):
        return f"DiscreteStateSpace(order={self.order}, ts={self.ts}, rho={self.spectral_radius:.6f})"


@dataclass(frozen=True, eq=False)
class ImcFilter:
    """F(z) = 1 / (a z + b)^L with a = tau/ts, b = 1 - tau/ts (unity DC gain)."""
    tau: float
    ts: float
    order: int
    system: DiscreteStateSpace

    @property
    def a(self) -> float:
        return self.tau / self.ts

    @property
    def b(self) -> float:
        return 1.0 - self.tau / self.ts

    @property
    def pole(self) -> float:
        return 1.0 - self.ts / self.tau

    @property
    def denominator(self) -> np.ndarray:
        """Coefficients of (a z + b)^L in descending powers of z."""
        return _filter_denominator(self.tau, self.ts, self.order)

    def evaluate(self, z: complex) -> complex:
        return 1.0 / np.polyval(self.denominator, z)


# =============================================================================
# REALIZATION & DISCRETIZATION
# =============================================================================

def _canonical(num: Sequence[float], den: Sequence[float]) -> Tuple[np.ndarray, ...]:
    """Controllable canonical (A, B, C, D) of num/den; a static gain gives a 0-state system."""
    num = _trim_leading_zeros(np.asarray(num, dtype=float).ravel())
    den = np.asarray(den, dtype=float).ravel()
    if len(num) > len(den):
        raise ValueError(
            f"Improper transfer function: numerator degree {len(num) - 1} exceeds "
            f"denominator degree {len(den) - 1}; it has no state-space realization"
        )
    if len(den) == 1:
        return np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.array([[num[0] / den[0]]])
    A, B, C, D = signal.tf2ss(num, den)
    return A, B, C, D


def realize(tf: ContinuousTransferFunction) -> ContinuousStateSpace:
    """
    Controllable canonical realization of a proper continuous transfer function.

    Raises:
        ValueError: tf is improper
    """
    if not tf.is_proper:
        raise ValueError(
            f"Improper transfer function (num degree {len(tf.num) - 1} > den degree {tf.order}); "
            "cannot realize"
        )
    return ContinuousStateSpace(*_canonical(tf.num, tf.den))


def zoh_discretize(ssc: ContinuousStateSpace, ts: float) -> DiscreteStateSpace:
    """
    Zero-order-hold discretization: exp([[A_c, B_c], [0, 0]] ts) = [[A, B], [0, I]].
    """
    if ts <= 0:
        raise ValueError(f"Sampling period must be positive, got {ts}")
    A_c = np.atleast_2d(np.asarray(ssc.A, dtype=float))
    n = A_c.shape[0] if A_c.size else 0
    B_c = np.asarray(ssc.B, dtype=float).reshape(n, 1)
    if n == 0:
        return DiscreteStateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), ssc.D, ts)

    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A_c
    M[:n, n:] = B_c
    Mexp = expm(M * ts)
    return DiscreteStateSpace(Mexp[:n, :n], Mexp[:n, n:], ssc.C, ssc.D, ts)


def discretize_tf(tf: ContinuousTransferFunction, ts: float) -> DiscreteStateSpace:
    return zoh_discretize(realize(tf), ts)


# =============================================================================
# SIMULATION
# =============================================================================

def simulate(sys: DiscreteStateSpace, u: Sequence[float], x0: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Exact recursion y(t) = C x(t) + D u(t), x(t+1) = A x(t) + B u(t).

    Args:
        sys: discrete system
        u: input sequence (length >= 1)
        x0: initial state (defaults to rest)

    Returns:
        Output sequence, same length as u
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size < 1:
        raise ValueError("Input sequence must contain at least one sample")
    n = sys.order
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x.shape != (n,):
        raise ValueError(f"Initial state must have dimension {n}, got {x.shape}")

    A, b, c, d = sys.A, sys.B[:, 0], sys.C[0, :], sys.D[0, 0]
    y = np.empty_like(u)
    for t, u_t in enumerate(u):
        y[t] = c @ x + d * u_t
        x = A @ x + b * u_t
    return y


def impulse_response(sys: DiscreteStateSpace, N: int) -> np.ndarray:
    """f(0) = D, f(k) = C A^{k-1} B."""
    if N < 1:
        raise ValueError(f"Impulse response length must be >= 1, got {N}")
    f = np.zeros(N)
    f[0] = sys.D[0, 0]
    if sys.order == 0:
        return f
    x = sys.B[:, 0].copy()
    c = sys.C[0, :]
    for k in range(1, N):
        f[k] = c @ x
        x = sys.A @ x
    return f


def dc_gain(sys: DiscreteStateSpace) -> float:
    """C (I - A)^{-1} B + D; inf when the system has a pole at z = 1."""
    try:
        return float(np.real(sys.evaluate(1.0)))
    except np.linalg.LinAlgError:
        return float("inf")


def shift(v: Sequence[float], k: int) -> np.ndarray:
    """Delay v by k samples (k > 0) or advance it (k < 0), zero-filled, same length."""
    v = np.asarray(v, dtype=float).ravel()
    out = np.zeros_like(v)
    if k == 0:
        out[:] = v
    elif k > 0:
        if k < v.size:
            out[k:] = v[:-k]
    elif -k < v.size:
        out[:k] = v[-k:]
    return out


# =============================================================================
# IMC FILTER
# =============================================================================

def _filter_denominator(tau: float, ts: float, order: int) -> np.ndarray:
    den = np.array([1.0])
    for _ in range(order):
        den = np.polymul(den, [tau / ts, 1.0 - tau / ts])
    return den


def _check_filter_args(tau: float, ts: float, order: int):
    if ts <= 0:
        raise ValueError(f"Sampling period must be positive, got {ts}")
    if order < 1:
        raise ValueError(f"Filter order L must be >= 1, got {order}")
    if tau <= ts / 2:
        raise ValueError(
            f"Unstable filter: tau={tau} must exceed ts/2={ts / 2} "
            f"(pole 1 - ts/tau = {1 - ts / tau if tau else float('-inf'):.4f} lies outside the unit circle)"
        )


def make_imc_filter(tau: float, ts: float, order: int) -> ImcFilter:
    """
    Build F(z) = 1 / ((tau/ts) z + (1 - tau/ts))^L.

    Raises:
        ValueError: tau <= ts/2 (pole outside the unit circle) or L < 1
    """
    _check_filter_args(tau, ts, order)
    den = _filter_denominator(tau, ts, order)
    system = DiscreteStateSpace(*_canonical([1.0], den), ts)
    logging.debug(f"IMC filter: tau={tau}, ts={ts}, L={order}, pole={1 - ts / tau:.6f}")
    return ImcFilter(tau=tau, ts=ts, order=order, system=system)


def make_advanced_filter(tau: float, ts: float, order: int) -> DiscreteStateSpace:
    """z^L F(z): biproper, so its first output sample already responds to the input."""
    _check_filter_args(tau, ts, order)
    den = _filter_denominator(tau, ts, order)
    num = np.zeros(order + 1)
    num[0] = 1.0
    return DiscreteStateSpace(*_canonical(num, den), ts)


def filter_signal(f_sys: DiscreteStateSpace, v: Sequence[float]) -> np.ndarray:
    """Zero-initial-condition filtering (truncated convolution with the impulse response)."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        return v.copy()
    return simulate(f_sys, v)


# =============================================================================
# IMC ORACLE REALIZATIONS
# =============================================================================

def to_transfer_function(sys: DiscreteStateSpace, l_delay: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    (num, den) in descending powers of z, with the first l_delay numerator
    coefficients removed (they must vanish for a system with that delay).
    """
    if sys.order == 0:
        return np.array([sys.D[0, 0]]), np.array([1.0])
    num, den = signal.ss2tf(sys.A, sys.B, sys.C, sys.D)
    num = np.asarray(num, dtype=float).ravel()
    scale = max(np.max(np.abs(num)), 1e-300)
    if l_delay > 0:
        head = num[:l_delay]
        if np.max(np.abs(head)) > _TRIM_TOL * scale:
            raise ValueError(
                f"System does not have L-delay {l_delay}: leading numerator coefficients {head}"
            )
        num = num[l_delay:]
    return num, np.asarray(den, dtype=float).ravel()


def _model_polynomials(model: DiscreteStateSpace, l_delay: int) -> Tuple[np.ndarray, np.ndarray]:
    num, den = to_transfer_function(model, l_delay)
    zeros = np.roots(num) if num.size > 1 else np.array([])
    if zeros.size and np.max(np.abs(zeros)) >= 1.0:
        raise ValueError(
            f"Non-minimum-phase model: zeros {np.round(zeros, 6)} on or outside the unit circle; "
            "the model inverse would be unstable"
        )
    return num, den


def inverse_filter_system(model: DiscreteStateSpace, filt: ImcFilter) -> DiscreteStateSpace:
    """
    Realize Q(z) = G^{-1}(z) F(z) = den_G / (num_G (a z + b)^L); biproper when
    the filter order equals the model's L-delay.
    """
    num_g, den_g = _model_polynomials(model, filt.order)
    return DiscreteStateSpace(*_canonical(den_g, np.polymul(num_g, filt.denominator)), model.ts)


def imc_equivalent_controller(model: DiscreteStateSpace, filt: ImcFilter) -> DiscreteStateSpace:
    """
    Realize C(z) = G^{-1} F / (1 - F) = den_G / (num_G ((a z + b)^L - 1)).

    Same order as the model; carries the integrating pole at z = 1.
    """
    num_g, den_g = _model_polynomials(model, filt.order)
    f_minus_one = filt.denominator.copy()
    f_minus_one[-1] -= 1.0
    return DiscreteStateSpace(*_canonical(den_g, np.polymul(num_g, f_minus_one)), model.ts)
