"""Shared fixtures: the example plant, its offline data and random stable systems."""

import numpy as np
import pytest
from scipy import signal

from src.config import SEC5_CONFIG, load_config
from src.hankel_data import Trajectory
from src.lti_core import ContinuousTransferFunction, DiscreteStateSpace, discretize_tf, simulate
from src.sim_cli import collect_offline

TS = 0.01
TP = 2
N_ORDER = 2
DELAY = 1
TAU = 0.5


@pytest.fixture
def sec5_tf():
    return ContinuousTransferFunction((10.0, 10.0), (1.0, 6.0, 8.0))


@pytest.fixture
def sec5_plant(sec5_tf):
    return discretize_tf(sec5_tf, TS)


@pytest.fixture
def sec5_offline(sec5_plant):
    """T_d = 8 inputs, 9 outputs: inverse-ready data of the example plant."""
    return collect_offline(sec5_plant, 8, DELAY, seed=0)


@pytest.fixture
def sec5_config():
    return load_config(SEC5_CONFIG)


def random_stable_system(rng: np.random.Generator, order: int, delay: int = 1, ts: float = TS) -> DiscreteStateSpace:
    """Random SISO system with real poles in (-0.9, 0.9) and zeros in (-0.8, 0.8)."""
    poles = rng.uniform(-0.9, 0.9, size=order)
    zeros = rng.uniform(-0.8, 0.8, size=order - delay)
    den = np.poly(poles)
    num = rng.uniform(0.5, 2.0) * np.atleast_1d(np.poly(zeros))
    A, B, C, D = signal.tf2ss(num, den)
    return DiscreteStateSpace(A, B, C, D, ts)


def random_trajectory(sys: DiscreteStateSpace, length: int, rng: np.random.Generator,
                      x0=None, label: str = "w") -> Trajectory:
    u = rng.uniform(-1.0, 1.0, size=length)
    return Trajectory(u, simulate(sys, u, x0), sys.ts, label=label)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
