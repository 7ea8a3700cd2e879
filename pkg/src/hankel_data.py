"""
Hankel Data - Behavioral Data Matrices

Builds and certifies the data matrices every predictor stands on:
- ForwardDataMatrix     [U_p; U_f; Y_p; Y_f]    from equal-length (u, y)
- InverseDataMatrix     [U_p; U_f; Y_p; Y_fL]   from y exactly L samples longer than u
- ControllerDataMatrix  [E_p; E_f; F_p; F_f]    from the controller trajectory (e, ubar)

Key Principle: a matrix is usable for prediction only after its low-rank
condition rank = T_p + 1 + n has been certified. Certification is explicit.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import hankel as scipy_hankel

from src.exceptions import CertificationError, ConfigurationError

DEFAULT_TOL = 1e-8


# =============================================================================
# DATA STRUCTURES
# =============================================================================

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Aligned offline samples w^d = col(u^d, y^d); y may run L samples past u."""
    u: np.ndarray
    y: np.ndarray
    ts: float
    label: str = "trajectory"

    def __post_init__(self):
        u = np.array(self.u, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if u.size < 1 or y.size < 1:
            raise ValueError(f"Trajectory needs at least one input and one output sample, got {u.size}/{y.size}")
        if self.ts <= 0:
            raise ValueError(f"Sampling period must be positive, got {self.ts}")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def length(self) -> int:
        """T_d: number of input samples."""
        return self.u.size

    @property
    def extra_outputs(self) -> int:
        """How many output samples run past the last input (L for inverse-ready data)."""
        return self.y.size - self.u.size

    def forward(self) -> "Trajectory":
        """Equal-length slice of an inverse-ready trajectory."""
        if self.y.size < self.u.size:
            raise ValueError(f"Output shorter than input ({self.y.size} < {self.u.size})")
        return Trajectory(self.u, self.y[:self.u.size], self.ts, self.label)

    def lead(self, k: int) -> "Trajectory":
        """Pair u(t) with y(t + k): a trajectory of z^k G."""
        if self.y.size < self.u.size + k:
            raise ValueError(f"Need {self.u.size + k} output samples for a lead of {k}, have {self.y.size}")
        return Trajectory(self.u, self.y[k:k + self.u.size], self.ts, f"{self.label}+lead{k}")

    def __repr__(self):
        return f"Trajectory(label={self.label!r}, T_u={self.u.size}, T_y={self.y.size}, ts={self.ts})"


@dataclass(frozen=True, eq=False)
class RankCheck:
    """Diagnostic outcome of a rank test; never raises by itself."""
    rank: int
    expected: int
    passed: bool
    singular_values: np.ndarray
    tol: float

    @property
    def cutoff(self) -> float:
        return self.tol * (self.singular_values[0] if self.singular_values.size else 0.0)

    def summary(self) -> str:
        mark = "✅ PASS" if self.passed else "❌ FAIL"
        return f"{mark} rank {self.rank} (expected {self.expected})"


@dataclass(frozen=True, eq=False)
class _DataMatrix:
    depth: int
    rank_check: Optional[RankCheck] = field(default=None)

    name = "data"

    @property
    def certified(self) -> bool:
        return self.rank_check is not None and self.rank_check.passed

    @property
    def rank(self) -> Optional[int]:
        return None if self.rank_check is None else self.rank_check.rank

    @property
    def tol(self) -> Optional[float]:
        return None if self.rank_check is None else self.rank_check.tol

    @property
    def columns(self) -> int:
        return self.stacked().shape[1]

    def stacked(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ForwardDataMatrix(_DataMatrix):
    U_p: np.ndarray = None
    U_f: np.ndarray = None
    Y_p: np.ndarray = None
    Y_f: np.ndarray = None

    name = "forward"

    def stacked(self) -> np.ndarray:
        return np.vstack([self.U_p, self.U_f, self.Y_p, self.Y_f])


@dataclass(frozen=True, eq=False)
class InverseDataMatrix(_DataMatrix):
    U_p: np.ndarray = None
    U_f: np.ndarray = None
    Y_p: np.ndarray = None
    Y_fL: np.ndarray = None
    delay: int = 0

    name = "inverse"

    def stacked(self) -> np.ndarray:
        return np.vstack([self.U_p, self.U_f, self.Y_p, self.Y_fL])


@dataclass(frozen=True, eq=False)
class ControllerDataMatrix(_DataMatrix):
    E_p: np.ndarray = None
    E_f: np.ndarray = None
    F_p: np.ndarray = None
    F_f: np.ndarray = None

    name = "controller"

    def stacked(self) -> np.ndarray:
        return np.vstack([self.E_p, self.E_f, self.F_p, self.F_f])


# =============================================================================
# CONSTRUCTION
# =============================================================================

def hankel(v, T: int) -> np.ndarray:
    """
    Hankel matrix of depth T: entry (i, j) = v[i + j], shape T x (N - T + 1).

    Raises:
        ValueError: T < 1 or T > N
    """
    v = np.asarray(v, dtype=float).ravel()
    N = v.size
    if T < 1 or T > N:
        raise ValueError(f"Hankel depth must satisfy 1 <= T <= N, got T={T}, N={N}")
    return scipy_hankel(v[:T], v[T - 1:])


def _check_depth(tp: int, length: int):
    if tp < 1:
        raise ValueError(f"T_p must be >= 1, got {tp}")
    if tp + 1 > length:
        raise ValueError(f"Offline data too short: T_d={length} < T_p + 1 = {tp + 1}")


def build_forward(traj: Trajectory, tp: int) -> ForwardDataMatrix:
    """Forward data matrix from an equal-length trajectory (uncertified)."""
    if traj.u.size != traj.y.size:
        raise ValueError(f"Forward data needs equal-length u and y, got {traj.u.size} and {traj.y.size}")
    _check_depth(tp, traj.length)
    H_u = hankel(traj.u, tp + 1)
    H_y = hankel(traj.y, tp + 1)
    return ForwardDataMatrix(depth=tp, U_p=H_u[:tp], U_f=H_u[tp:], Y_p=H_y[:tp], Y_f=H_y[tp:])


def build_inverse(traj: Trajectory, tp: int, delay: int) -> InverseDataMatrix:
    """
    Inverse data matrix: U-blocks of depth T_p+1 over u, Y-blocks of depth
    T_p+1+L over y, with y exactly L samples longer than u.
    """
    if delay < 0:
        raise ValueError(f"L must be >= 0, got {delay}")
    if traj.y.size != traj.u.size + delay:
        raise ValueError(
            f"Inverse data needs output exactly L={delay} samples longer than input, "
            f"got T_u={traj.u.size}, T_y={traj.y.size}"
        )
    _check_depth(tp, traj.length)
    H_u = hankel(traj.u, tp + 1)
    H_y = hankel(traj.y, tp + 1 + delay)
    return InverseDataMatrix(depth=tp, delay=delay, U_p=H_u[:tp], U_f=H_u[tp:], Y_p=H_y[:tp], Y_fL=H_y[tp:])


def build_controller_matrix(e, ubar, tp: int) -> ControllerDataMatrix:
    """Controller data matrix: controller input e = y - ybar, controller output ubar."""
    e = np.asarray(e, dtype=float).ravel()
    ubar = np.asarray(ubar, dtype=float).ravel()
    if e.size != ubar.size:
        raise ValueError(f"Controller data needs equal lengths, got {e.size} and {ubar.size}")
    _check_depth(tp, e.size)
    H_e = hankel(e, tp + 1)
    H_f = hankel(ubar, tp + 1)
    return ControllerDataMatrix(depth=tp, E_p=H_e[:tp], E_f=H_e[tp:], F_p=H_f[:tp], F_f=H_f[tp:])


def window(traj: Trajectory, start: int, tp: int) -> np.ndarray:
    """col(u[start:start+T_p+1], y[start:start+T_p+1]); same layout as a data-matrix column."""
    stop = start + tp + 1
    if start < 0 or stop > min(traj.u.size, traj.y.size):
        raise ValueError(f"Window [{start}, {stop}) outside trajectory")
    return np.concatenate([traj.u[start:stop], traj.y[start:stop]])


# =============================================================================
# CERTIFICATION
# =============================================================================

def check_rank(M: np.ndarray, expected: int, tol: float = DEFAULT_TOL) -> RankCheck:
    """
    Numerical rank = number of singular values above tol * sigma_max.
    """
    if not 0 < tol < 1:
        raise ValueError(f"Rank tolerance must lie in (0, 1), got {tol}")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    sv = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    if sv.size == 0 or sv[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(sv > tol * sv[0]))
    return RankCheck(rank=rank, expected=expected, passed=(rank == expected), singular_values=sv, tol=tol)


def expected_rank(tp: int, n: int) -> int:
    """Low-rank condition: T_p + 1 + n."""
    return tp + 1 + n


def certify(matrix: _DataMatrix, n: int, tol: float = DEFAULT_TOL, label: Optional[str] = None):
    """
    Certify the low-rank condition of a data matrix.

    Returns:
        A certified copy of the matrix

    Raises:
        CertificationError: rank != T_p + 1 + n
        ConfigurationError: T_p < n
    """
    name = label or matrix.name
    if matrix.depth < n:
        raise ConfigurationError(f"{name}: T_p={matrix.depth} must be >= n={n}")
    result = check_rank(matrix.stacked(), expected_rank(matrix.depth, n), tol)
    sv = result.singular_values
    kept = sv[result.rank - 1] if result.rank > 0 else 0.0
    dropped = sv[result.rank] if result.rank < sv.size else 0.0
    if not result.passed:
        logging.error(f"❌ {name} matrix {matrix.stacked().shape}: {result.summary()}")
        raise CertificationError(name, result.expected, result.rank, sv)
    logging.info(
        f"✅ {name} matrix {matrix.stacked().shape}: {result.summary()}, "
        f"smallest kept {kept:.3e}, largest dropped {dropped:.3e}"
    )
    return replace(matrix, rank_check=result)


def rank_profile(traj: Trajectory, n_max: int, tol: float = DEFAULT_TOL) -> List[Tuple[int, int, int]]:
    """
    Forward-matrix rank for T_p = 1 .. n_max, as (T_p, rank, implied order rank - T_p - 1).

    For data rich enough, the implied order levels off at the true n once
    T_p >= n; the profile lets a user sanity-check the order they configured.
    """
    fwd = traj.forward() if traj.y.size != traj.u.size else traj
    profile = []
    for tp in range(1, n_max + 1):
        if tp + 1 > fwd.length:
            break
        rank = check_rank(build_forward(fwd, tp).stacked(), expected_rank(tp, 0), tol).rank
        profile.append((tp, rank, rank - tp - 1))
    return profile


def minimum_offline_length(n: int, delay: int, kind: str, tp: Optional[int] = None) -> int:
    """
    Smallest T_d for a given past window (T_p defaults to n):
    2 T_p + 1 + n + L for CBC (forward + inverse data),
    2 T_p + 1 + n for the unified controller and for a bare forward predictor.
    """
    tp = n if tp is None else tp
    kind = kind.lower()
    if kind == "cbc":
        return 2 * tp + 1 + n + delay
    if kind in ("unified", "forward"):
        return 2 * tp + 1 + n
    raise ValueError(f"Unknown data kind '{kind}'")
