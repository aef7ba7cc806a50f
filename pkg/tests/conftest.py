import numpy as np
import pytest

from src.plant import LtiStateSpace
from src.plant.systems import PendulumParams, pendulum, pendulum_scaled_gain, sim_stable, sim_unstable


def random_stable_system(rng: np.random.Generator, n: int, radius: float = 0.9) -> LtiStateSpace:
    """随机 SISO 系统，A 的谱半径缩放到 radius"""
    A = rng.standard_normal((n, n))
    A *= radius / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    b = rng.standard_normal(n)
    c = rng.standard_normal(n)
    return LtiStateSpace(A=A, b=b, c=c)


def random_minimum_phase_system(rng: np.random.Generator, n: int) -> LtiStateSpace:
    """可控标准型：极点与零点都在 |z| < 0.8 内取实数"""
    poles = rng.uniform(-0.8, 0.8, size=n)
    n_zeros = int(rng.integers(0, n))
    zeros = rng.uniform(-0.8, 0.8, size=n_zeros)
    den = np.poly(poles)
    num = np.poly(zeros) * rng.uniform(0.5, 2.0) if n_zeros else np.array([rng.uniform(0.5, 2.0)])
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -den[1:][::-1]
    b = np.zeros(n)
    b[-1] = 1.0
    c = np.zeros(n)
    c[: num.shape[0]] = num[::-1]
    return LtiStateSpace(A=A, b=b, c=c)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def stable_sys() -> LtiStateSpace:
    return sim_stable()


@pytest.fixture
def unstable_sys() -> LtiStateSpace:
    return sim_unstable()


@pytest.fixture
def pendulum_sys():
    return pendulum()


@pytest.fixture
def scaled_pendulum_sys():
    return pendulum_scaled_gain(0.5)


@pytest.fixture
def pendulum_params() -> PendulumParams:
    return PendulumParams()
