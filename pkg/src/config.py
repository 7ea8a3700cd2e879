import os
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from dotenv import load_dotenv, dotenv_values

from src.exceptions import ConfigurationError
from src.lti_core import ContinuousTransferFunction

# Load environment variables
load_dotenv()

# --- Project Paths ---
# Base directory is the project root (calculated relative to this file in src/)
BASE_DIR = Path(__file__).parent.parent.resolve()

DATA_DIR = BASE_DIR / "data"
CONFIGS_DIR = DATA_DIR / "configs"
GOLDEN_DIR = DATA_DIR / "golden"
OUTPUT_DIR = Path(os.getenv("IBC_OUTPUT_DIR", str(BASE_DIR / "output")))

SEC5_CONFIG = CONFIGS_DIR / "sec5.cfg"

# --- Logging ---
LOG_LEVEL = os.getenv("IBC_LOG_LEVEL", "INFO").upper()
LOG_FILE = os.getenv("IBC_LOG_FILE", "ibc_debug.log")

# --- Numerics ---
# Relative singular-value cutoff shared by rank certification and pseudoinverses
DEFAULT_RANK_TOL = float(os.getenv("IBC_RANK_TOL", "1e-8"))

# --- Experiment defaults (artifact choices, the reference gives no numbers) ---
DEFAULT_REF_STEPS = "1:1"
DEFAULT_DIST_STEPS = "13:0.2"
DEFAULT_DURATION = 25.0
DEFAULT_SEED = 0
DEFAULT_CONTROLLERS = "cbc,unified,imc"
CONTROLLER_KINDS = ("cbc", "unified", "imc")

REQUIRED_KEYS = ("plant.num", "plant.den", "ts", "n", "l_delay", "tp", "td", "tau")
OPTIONAL_KEYS = ("duration", "ref.steps", "dist.steps", "seed", "rank_tol",
                 "controllers", "data_plant.num", "data_plant.den")


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None):
    """Configure logging to file AND console (file handler skipped when log_file is empty)."""
    level = (level or LOG_LEVEL).upper()
    log_file = LOG_FILE if log_file is None else log_file

    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )


# =============================================================================
# EXPERIMENT CONFIG
# =============================================================================

Schedule = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class ExperimentConfig:
    """One closed-loop experiment, as read from a `key = value` config file."""
    plant: ContinuousTransferFunction
    ts: float
    n: int
    l_delay: int
    tp: int
    td: int
    tau: float
    duration: float = DEFAULT_DURATION
    ref_steps: Schedule = ((1.0, 1.0),)
    dist_steps: Schedule = ((13.0, 0.2),)
    seed: int = DEFAULT_SEED
    rank_tol: float = DEFAULT_RANK_TOL
    controllers: Tuple[str, ...] = CONTROLLER_KINDS
    # Plant used for offline data collection (and as the IMC model); None means `plant`
    data_plant: Optional[ContinuousTransferFunction] = None
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.ts <= 0:
            raise ConfigurationError(f"ts must be positive, got {self.ts}")
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.l_delay < 1:
            raise ConfigurationError(f"l_delay must be >= 1 for a strictly proper plant, got {self.l_delay}")
        if self.tp < self.n:
            raise ConfigurationError(f"tp ({self.tp}) must be >= n ({self.n})")
        if self.td < self.tp + 1:
            raise ConfigurationError(f"td ({self.td}) must be >= tp + 1 ({self.tp + 1})")
        if self.duration <= 0:
            raise ConfigurationError(f"duration must be positive, got {self.duration}")
        if not 0 < self.rank_tol < 1:
            raise ConfigurationError(f"rank_tol must lie in (0, 1), got {self.rank_tol}")
        for name, schedule in (("ref.steps", self.ref_steps), ("dist.steps", self.dist_steps)):
            times = [t for t, _ in schedule]
            if times != sorted(times):
                raise ConfigurationError(f"{name} must be time-sorted, got {schedule}")
        unknown = [c for c in self.controllers if c not in CONTROLLER_KINDS]
        if unknown or not self.controllers:
            raise ConfigurationError(
                f"controllers must be drawn from {', '.join(CONTROLLER_KINDS)}, got {self.controllers}"
            )

    @property
    def collection_plant(self) -> ContinuousTransferFunction:
        return self.data_plant if self.data_plant is not None else self.plant

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.ts))

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


# =============================================================================
# PARSING HELPERS
# =============================================================================

def parse_coefficients(text: str, key: str) -> Tuple[float, ...]:
    """'10, 10' or '10 10' -> (10.0, 10.0)"""
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ConfigurationError(f"{key}: empty coefficient list")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"{key}: malformed coefficient list '{text}'")


def parse_schedule(text: str, key: str) -> Schedule:
    """'1:1; 13:0.2' -> ((1.0, 1.0), (13.0, 0.2)); empty text means no steps."""
    steps = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigurationError(f"{key}: expected 'time:level', got '{chunk}'")
        time_text, level_text = chunk.split(":", 1)
        try:
            steps.append((float(time_text), float(level_text)))
        except ValueError:
            raise ConfigurationError(f"{key}: malformed step '{chunk}'")
    return tuple(steps)


def format_schedule(schedule: Schedule) -> str:
    return "; ".join(f"{t:g}:{level:g}" for t, level in schedule)


def _parse_number(raw: Dict[str, str], key: str, kind=float):
    try:
        return kind(raw[key])
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: expected {kind.__name__}, got '{raw[key]}'")


def _parse_plant(raw: Dict[str, str], prefix: str) -> ContinuousTransferFunction:
    num = parse_coefficients(raw[f"{prefix}.num"], f"{prefix}.num")
    den = parse_coefficients(raw[f"{prefix}.den"], f"{prefix}.den")
    try:
        return ContinuousTransferFunction(num, den)
    except ValueError as e:
        raise ConfigurationError(f"{prefix}: {e}")


def config_from_mapping(raw: Dict[str, Optional[str]], source: Optional[str] = None) -> ExperimentConfig:
    """Validate a flat key/value mapping into an ExperimentConfig."""
    raw = {k.strip(): (v or "").strip() for k, v in raw.items()}

    unknown = sorted(set(raw) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ConfigurationError(f"Unknown config keys: {', '.join(unknown)}")
    missing = [k for k in REQUIRED_KEYS if not raw.get(k)]
    if missing:
        raise ConfigurationError(f"Missing config keys: {', '.join(missing)}")

    has_num, has_den = bool(raw.get("data_plant.num")), bool(raw.get("data_plant.den"))
    if has_num != has_den:
        raise ConfigurationError("data_plant.num and data_plant.den must be given together")

    controllers = tuple(
        c.strip().lower() for c in raw.get("controllers", DEFAULT_CONTROLLERS).split(",") if c.strip()
    )

    return ExperimentConfig(
        plant=_parse_plant(raw, "plant"),
        ts=_parse_number(raw, "ts"),
        n=_parse_number(raw, "n", int),
        l_delay=_parse_number(raw, "l_delay", int),
        tp=_parse_number(raw, "tp", int),
        td=_parse_number(raw, "td", int),
        tau=_parse_number(raw, "tau"),
        duration=_parse_number(raw, "duration") if raw.get("duration") else DEFAULT_DURATION,
        ref_steps=parse_schedule(raw.get("ref.steps", DEFAULT_REF_STEPS), "ref.steps"),
        dist_steps=parse_schedule(raw.get("dist.steps", DEFAULT_DIST_STEPS), "dist.steps"),
        seed=_parse_number(raw, "seed", int) if raw.get("seed") else DEFAULT_SEED,
        rank_tol=_parse_number(raw, "rank_tol") if raw.get("rank_tol") else DEFAULT_RANK_TOL,
        controllers=controllers,
        data_plant=_parse_plant(raw, "data_plant") if has_num else None,
        source=source,
    )


def load_config(path, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """
    Read a flat UTF-8 `key = value` config file.

    Args:
        path: config file path
        overrides: raw key/value pairs applied on top of the file (e.g. CLI --seed)

    Returns:
        Validated ExperimentConfig
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")

    raw = dict(dotenv_values(path, encoding="utf-8"))
    if overrides:
        raw.update({k: str(v) for k, v in overrides.items() if v is not None})

    logging.getLogger(__name__).debug(f"Loaded {len(raw)} config keys from {path}")
    return config_from_mapping(raw, source=str(path))


def config_to_text(cfg: ExperimentConfig) -> str:
    """Render a config back into the `key = value` format."""
    def coeffs(values):
        return ", ".join(f"{v:g}" for v in values)

    lines = [
        f"plant.num = {coeffs(cfg.plant.num)}",
        f"plant.den = {coeffs(cfg.plant.den)}",
        f"ts = {cfg.ts:g}",
        f"n = {cfg.n}",
        f"l_delay = {cfg.l_delay}",
        f"tp = {cfg.tp}",
        f"td = {cfg.td}",
        f"tau = {cfg.tau:g}",
        f"duration = {cfg.duration:g}",
        f"ref.steps = {format_schedule(cfg.ref_steps)}",
        f"dist.steps = {format_schedule(cfg.dist_steps)}",
        f"seed = {cfg.seed}",
        f"rank_tol = {cfg.rank_tol:g}",
        f"controllers = {','.join(cfg.controllers)}",
    ]
    if cfg.data_plant is not None:
        lines.append(f"data_plant.num = {coeffs(cfg.data_plant.num)}")
        lines.append(f"data_plant.den = {coeffs(cfg.data_plant.den)}")
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    # Test paths
    print(f"BASE_DIR: {BASE_DIR}")
    print(f"CONFIGS_DIR: {CONFIGS_DIR}")
    print(f"OUTPUT_DIR: {OUTPUT_DIR}")
    print(f"DEFAULT_RANK_TOL: {DEFAULT_RANK_TOL}")
    print(config_to_text(load_config(SEC5_CONFIG)))
