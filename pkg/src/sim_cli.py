"""
Experiment Harness & Command-Line Interface

Flow:
1. collect_offline   - seeded random input through the plant, from rest (inverse-ready)
2. build_controller  - CBC-IBC / Unified-IBC from the offline data, IMC from the model
3. run_closed_loop   - y(t) = C x(t); u(t) = controller.step(r(t), y(t)); x <- A x + B (u + d)
4. compare / export  - pairwise deviations, CSV logs

Subcommands: collect, rank, simulate, compare, interconnect.
"""

import argparse
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.config import (
    CONTROLLER_KINDS,
    OUTPUT_DIR,
    ExperimentConfig,
    Schedule,
    load_config,
)
from src.controllers import (
    CBC,
    IMC,
    DISPLAY_NAMES,
    Controller,
    build_cbc,
    build_imc,
    build_unified,
)
from src.exceptions import ConfigurationError, IbcError, NumericalFailure
from src.hankel_data import (
    Trajectory,
    build_controller_matrix,
    build_forward,
    build_inverse,
    check_rank,
    expected_rank,
    rank_profile,
)
from src.interconnect import INTERCONNECTIONS, NEGATIVE_FEEDBACK, unified_controller_trajectory
from src.lti_core import DiscreteStateSpace, ImcFilter, discretize_tf, make_imc_filter, simulate
from src.trajectory_io import load_trajectory, save_frame, save_trajectory

__all__ = [
    "collect_offline",
    "schedule_value",
    "schedule_samples",
    "SimLog",
    "build_controller",
    "run_closed_loop",
    "compare_controllers",
    "export_offline_views",
    "cli_main",
    "load_config",
]


# =============================================================================
# OFFLINE DATA
# =============================================================================

def collect_offline(plant: DiscreteStateSpace, td: int, delay: int, seed: int, label: str = "offline") -> Trajectory:
    """
    One offline experiment from rest: u^d ~ U[-1, 1] for T_d samples, then
    L more output samples (inverse-ready, y longer than u by L).
    """
    if td < 1:
        raise ConfigurationError(f"T_d must be >= 1, got {td}")
    if delay < 0:
        raise ConfigurationError(f"L must be >= 0, got {delay}")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=td)
    y = simulate(plant, np.concatenate([u, np.zeros(delay)]))
    logging.info(f"🎲 Collected {td} offline samples (+{delay} outputs), seed={seed}")
    return Trajectory(u, y, plant.ts, label=label)


def export_offline_views(traj: Trajectory, F: ImcFilter) -> pd.DataFrame:
    """Raw and filtered offline data side by side: t, u, y, ubar, ybar, e (w_c = col(e, ubar))."""
    data = traj.forward() if traj.extra_outputs else traj
    w_c = unified_controller_trajectory(data.u, data.y, F, label=data.label)
    return pd.DataFrame({
        "t": np.arange(data.length) * data.ts,
        "u": data.u,
        "y": data.y,
        "ubar": w_c.y,
        "ybar": data.y - w_c.u,
        "e": w_c.u,
    })


# =============================================================================
# SCHEDULES
# =============================================================================

def _step_index(time_s: float, ts: float) -> int:
    return int(round(time_s / ts))


def schedule_value(schedule: Schedule, t: float, ts: Optional[float] = None) -> float:
    """
    Piecewise-constant step schedule: the level of the last step at or before t,
    0 before the first step. With `ts` the comparison is done on sample indices.
    """
    value = 0.0
    for step_time, level in schedule:
        if ts is None:
            reached = step_time <= t
        else:
            reached = _step_index(step_time, ts) <= _step_index(t, ts)
        if not reached:
            break
        value = level
    return value


def schedule_samples(schedule: Schedule, ts: float, steps: int) -> np.ndarray:
    """Schedule sampled on the grid k * ts, k = 0 .. steps-1."""
    out = np.zeros(steps)
    for step_time, level in schedule:
        out[min(max(_step_index(step_time, ts), 0), steps):] = level
    return out


# =============================================================================
# SIMULATION LOG
# =============================================================================

@dataclass
class SimLog:
    """Per-sample record of one closed-loop run on a uniform grid."""
    controller: str
    ts: float
    t: np.ndarray
    r: np.ndarray
    d: np.ndarray
    u: np.ndarray
    y: np.ndarray
    yhat: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None
    wall_time: float = field(default=0.0, compare=False)
    memory_footprint: int = 0

    @property
    def steps(self) -> int:
        return self.t.size

    @property
    def final_error(self) -> float:
        return float(abs(self.y[-1] - self.r[-1])) if self.steps else 0.0

    @property
    def step_time(self) -> float:
        return self.wall_time / self.steps if self.steps else 0.0

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.t, "r": self.r, "d": self.d, "u": self.u, "y": self.y}
        if self.yhat is not None and self.e is not None:
            columns["yhat"] = self.yhat
            columns["e"] = self.e
        return pd.DataFrame(columns)


def save_simlog(log: SimLog, path) -> Path:
    return save_frame(log.to_frame(), path)


# =============================================================================
# CLOSED LOOP
# =============================================================================

def _plants(cfg: ExperimentConfig) -> Tuple[DiscreteStateSpace, DiscreteStateSpace]:
    """(closed-loop plant, data-collection plant), both ZOH-discretized at ts."""
    try:
        plant = discretize_tf(cfg.plant, cfg.ts)
        source = cfg.collection_plant
        data_plant = plant if source is cfg.plant else discretize_tf(source, cfg.ts)
    except ValueError as e:
        raise ConfigurationError(f"Plant: {e}")
    if plant.D[0, 0] != 0.0:
        raise ConfigurationError("Closed-loop plant must be strictly proper")
    if not plant.is_stable:
        logging.warning(f"⚠️  Plant is not asymptotically stable (spectral radius {plant.spectral_radius:.6f})")
    return plant, data_plant


def build_controller(kind: str, cfg: ExperimentConfig, offline: Optional[Trajectory] = None,
                     model: Optional[DiscreteStateSpace] = None) -> Controller:
    """Construct one controller from the config; offline data and model are derived when omitted."""
    kind = kind.lower()
    if kind not in CONTROLLER_KINDS:
        raise ConfigurationError(f"Unknown controller '{kind}'; choose from {', '.join(CONTROLLER_KINDS)}")
    if kind == IMC:
        if model is None:
            model = _plants(cfg)[1]
        return build_imc(model, cfg.tau, cfg.l_delay)

    if offline is None:
        offline = collect_offline(_plants(cfg)[1], cfg.td, cfg.l_delay, cfg.seed)
    if kind == CBC:
        return build_cbc(offline, cfg.tp, cfg.n, cfg.l_delay, cfg.tau, cfg.rank_tol)
    return build_unified(offline, cfg.tp, cfg.n, cfg.tau, cfg.l_delay, cfg.rank_tol)


def run_closed_loop(cfg: ExperimentConfig, kind: Optional[str] = None,
                    controller: Optional[Controller] = None) -> SimLog:
    """
    Simulate the plant from rest under one controller.

    Args:
        cfg: experiment config
        kind: controller kind; defaults to the first one listed in the config
        controller: pre-built controller (reset before use); overrides `kind`

    Raises:
        ConfigurationError / CertificationError: controller construction failed
        NumericalFailure: a signal became non-finite
    """
    plant, _ = _plants(cfg)
    if controller is None:
        controller = build_controller(kind or cfg.controllers[0], cfg)
    else:
        controller.reset()

    N = cfg.steps
    t = np.arange(N) * cfg.ts
    r = schedule_samples(cfg.ref_steps, cfg.ts, N)
    d = schedule_samples(cfg.dist_steps, cfg.ts, N)
    u = np.zeros(N)
    y = np.zeros(N)
    with_prediction = controller.exposes_prediction
    yhat = np.zeros(N) if with_prediction else None
    e = np.zeros(N) if with_prediction else None

    A, B, C = plant.A, plant.B[:, 0], plant.C[0]
    x = np.zeros(plant.order)

    logging.info(f"▶️  {controller.kind.display_name}: {N} steps at ts={cfg.ts}")
    start = time.perf_counter()
    for k in range(N):
        y[k] = C @ x
        u[k] = controller.step(r[k], y[k])
        if not np.isfinite(u[k]) or not np.isfinite(y[k]):
            logging.error(f"❌ Non-finite signal at step {k}")
            raise NumericalFailure(f"{controller.kind.display_name} produced a non-finite signal", step=k)
        if with_prediction:
            yhat[k] = controller.state.last_prediction
            e[k] = controller.state.last_error
        x = A @ x + B * (u[k] + d[k])
    elapsed = time.perf_counter() - start
    logging.info(f"⏹️  {controller.kind.display_name}: done in {elapsed:.3f}s, final |y - r| = {abs(y[-1] - r[-1]):.3e}")

    return SimLog(
        controller=controller.name, ts=cfg.ts, t=t, r=r, d=d, u=u, y=y, yhat=yhat, e=e,
        wall_time=elapsed, memory_footprint=controller.memory_footprint(),
    )


# =============================================================================
# COMPARISON
# =============================================================================

@dataclass
class PairwiseDeviation:
    first: str
    second: str
    max_du: float
    rms_du: float
    max_dy: float
    rms_dy: float


@dataclass
class ComparisonReport:
    runs: Dict[str, SimLog]
    deviations: List[PairwiseDeviation]

    @property
    def max_deviation(self) -> float:
        return max((max(p.max_du, p.max_dy) for p in self.deviations), default=0.0)

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "controller": label,
                "final_error": log.final_error,
                "step_time_s": log.step_time,
                "memory_samples": log.memory_footprint,
            }
            for label, log in self.runs.items()
        ])

    def deviation_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(p) for p in self.deviations])

    def format(self) -> str:
        lines = ["📊 Controllers", self.summary_frame().to_string(index=False), "",
                 "📐 Pairwise deviations", self.deviation_frame().to_string(index=False)]
        return "\n".join(lines)


def _labels(kinds: Sequence[str]) -> List[str]:
    seen: Dict[str, int] = {}
    labels = []
    for kind in kinds:
        seen[kind] = seen.get(kind, 0) + 1
        labels.append(kind if seen[kind] == 1 else f"{kind}#{seen[kind]}")
    return labels


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v ** 2))) if v.size else 0.0


def compare_controllers(cfg: ExperimentConfig, max_workers: Optional[int] = None) -> ComparisonReport:
    """
    Run every controller listed in the config on identical schedules and data,
    in parallel (each run owns its plant state and controller instance).
    """
    if len(cfg.controllers) < 2:
        raise ConfigurationError(f"compare needs at least two controllers, got {list(cfg.controllers)}")

    _, data_plant = _plants(cfg)
    offline = collect_offline(data_plant, cfg.td, cfg.l_delay, cfg.seed)
    labels = _labels(cfg.controllers)
    controllers = [build_controller(kind, cfg, offline=offline, model=data_plant) for kind in cfg.controllers]

    with ThreadPoolExecutor(max_workers=max_workers or len(controllers)) as executor:
        futures = [executor.submit(run_closed_loop, cfg, None, ctrl) for ctrl in controllers]
        runs = {label: future.result() for label, future in zip(labels, futures)}

    deviations = []
    for a, b in combinations(labels, 2):
        du = runs[a].u - runs[b].u
        dy = runs[a].y - runs[b].y
        deviations.append(PairwiseDeviation(
            first=a, second=b,
            max_du=float(np.max(np.abs(du))), rms_du=_rms(du),
            max_dy=float(np.max(np.abs(dy))), rms_dy=_rms(dy),
        ))
    report = ComparisonReport(runs=runs, deviations=deviations)
    logging.info(f"✅ Compared {', '.join(labels)}: max deviation {report.max_deviation:.3e}")
    return report


# =============================================================================
# CLI
# =============================================================================

class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _overrides(args) -> Dict[str, str]:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    if getattr(args, "controller", None):
        overrides["controllers"] = args.controller
    return overrides


def _out_path(args, default_name: str) -> Path:
    return Path(args.out) if args.out else OUTPUT_DIR / default_name


def _print_rank(name: str, matrix: np.ndarray, expected: int, tol: float) -> bool:
    result = check_rank(matrix, expected, tol)
    sv_text = ", ".join(f"{s:.6e}" for s in result.singular_values)
    print(f"{name:<11} {matrix.shape[0]}x{matrix.shape[1]}  {result.summary()}")
    print(f"            singular values: [{sv_text}]")
    return result.passed


def _cmd_collect(args, cfg: ExperimentConfig) -> int:
    _, data_plant = _plants(cfg)
    traj = collect_offline(data_plant, cfg.td, cfg.l_delay, cfg.seed)
    out = _out_path(args, "offline.csv")
    if args.filtered:
        try:
            F = make_imc_filter(cfg.tau, cfg.ts, cfg.l_delay)
        except ValueError as e:
            raise ConfigurationError(str(e))
        save_frame(export_offline_views(traj, F), out)
    else:
        save_trajectory(traj, out)
    print(f"💾 {out}")
    return 0


def _cmd_rank(args, cfg: ExperimentConfig) -> int:
    if args.data:
        traj = load_trajectory(args.data, ts=cfg.ts)
    else:
        traj = collect_offline(_plants(cfg)[1], cfg.td, cfg.l_delay, cfg.seed)
    tp, n, L, tol = cfg.tp, cfg.n, cfg.l_delay, cfg.rank_tol
    expected = expected_rank(tp, n)
    fwd = traj.forward() if traj.extra_outputs else traj

    try:
        passed = [_print_rank("forward", build_forward(fwd, tp).stacked(), expected, tol)]
        if traj.extra_outputs == L:
            passed.append(_print_rank("inverse", build_inverse(traj, tp, L).stacked(), expected, tol))
        else:
            print(f"inverse     skipped (output is not exactly L={L} samples longer than input)")
        w_c = unified_controller_trajectory(fwd.u, fwd.y, make_imc_filter(cfg.tau, cfg.ts, L), label=fwd.label)
        passed.append(_print_rank("controller", build_controller_matrix(w_c.u, w_c.y, tp).stacked(), expected, tol))
    except ValueError as e:
        raise ConfigurationError(str(e))

    if args.profile:
        print("\nT_p  rank  implied n")
        for depth, rank, order in rank_profile(traj, args.profile, tol):
            print(f"{depth:>3}  {rank:>4}  {order:>9}")
    return 0 if all(passed) else 1


def _cmd_simulate(args, cfg: ExperimentConfig) -> int:
    log = run_closed_loop(cfg, kind=cfg.controllers[0])
    out = _out_path(args, f"simulate_{log.controller}.csv")
    save_simlog(log, out)
    print(f"{DISPLAY_NAMES[log.controller]}: {log.steps} steps, final |y - r| = {log.final_error:.3e}")
    print(f"💾 {out}")
    return 0


def _cmd_compare(args, cfg: ExperimentConfig) -> int:
    report = compare_controllers(cfg)
    print(report.format())
    if args.out:
        save_frame(report.deviation_frame(), args.out)
    return 0


def _cmd_interconnect(args) -> int:
    kind = NEGATIVE_FEEDBACK if args.kind == "negative" else args.kind
    w1 = load_trajectory(args.w1)
    w2 = load_trajectory(args.w2)
    result = INTERCONNECTIONS[kind](w1, w2, args.tp, args.n2)
    out = _out_path(args, f"{kind}.csv")
    save_trajectory(result.to_trajectory(), out)
    print(f"🔗 {kind}: {result.length} samples -> {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="ibc", description="Data-driven inversion-based control experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p, controller=False):
        p.add_argument("--config", required=True, help="experiment config file (key = value)")
        p.add_argument("--seed", type=int, help="override the offline-data seed")
        p.add_argument("--out", help="output CSV path")
        if controller:
            p.add_argument("--controller", choices=CONTROLLER_KINDS, help="controller to run")
        return p

    collect = with_config(sub.add_parser("collect", help="write the offline trajectory CSV"))
    collect.add_argument("--filtered", action="store_true", help="add filtered views (ubar, ybar, e)")

    rank = with_config(sub.add_parser("rank", help="certify data matrices and print singular values"))
    rank.add_argument("--data", help="trajectory file (CSV/XLSX/JSON); collected from the config if omitted")
    rank.add_argument("--profile", type=int, metavar="TP_MAX", help="also print the rank profile up to TP_MAX")

    with_config(sub.add_parser("simulate", help="run one controller, write the SimLog CSV"), controller=True)
    with_config(sub.add_parser("compare", help="run all configured controllers and report deviations"))

    inter = sub.add_parser("interconnect", help="trajectory of an interconnection from two trajectory files")
    inter.add_argument("--kind", required=True, choices=["series", "feedback", "negative", "parallel"])
    inter.add_argument("--w1", required=True, help="trajectory of G_1")
    inter.add_argument("--w2", required=True, help="trajectory of G_2")
    inter.add_argument("--tp", type=int, required=True, help="past window for regenerating G_2")
    inter.add_argument("--n2", type=int, required=True, help="order of G_2")
    inter.add_argument("--out", help="output CSV path")
    return parser


_COMMANDS = {
    "collect": _cmd_collect,
    "rank": _cmd_rank,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Returns:
        0 success, 1 configuration / certification / usage error, 2 numerical failure
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except _UsageError:
        return 1
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    try:
        if args.command == "interconnect":
            return _cmd_interconnect(args)
        cfg = load_config(args.config, overrides=_overrides(args))
        return _COMMANDS[args.command](args, cfg)
    except IbcError as e:
        logging.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
