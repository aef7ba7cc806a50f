from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .models import LtiStateSpace, NonlinearSystem, OutputMap, Trajectory

SIM_A = [[0.0, 1.0], [-0.15, 0.8]]
SIM_B = [0.0, 1.0]


def sim_stable() -> LtiStateSpace:
    """零点 0.2（最小相位），极点 0.3/0.5"""
    return LtiStateSpace(A=SIM_A, b=SIM_B, c=[-0.2, 1.0])


def sim_unstable() -> LtiStateSpace:
    """同极点，零点 1.002（非最小相位）"""
    return LtiStateSpace(A=SIM_A, b=SIM_B, c=[-450.9, 450.0])


@dataclass(frozen=True)
class PendulumParams:
    """重力补偿 + PD 的摆闭环；a_hat 为控制器使用的重力系数估计"""

    period: float = 0.02
    a: float = 9.81
    a_hat: float = 9.81
    d: float = 0.5
    kp: float = 16.0
    kd: float = 8.0
    gamma: float = 1.0
    angle_limit: float = np.pi
    rate_limit: float = 20.0

    def drift_accel(self, x: np.ndarray) -> float:
        x1, x2 = x[0], x[1]
        return -(self.a - self.a_hat) * np.sin(x1) - self.d * x2 * abs(x2) - self.kp * x1 - self.kd * x2

    @property
    def input_gain(self) -> float:
        return self.kp * self.gamma


def pendulum_inverse_maps(p: PendulumParams) -> Tuple[OutputMap, OutputMap]:
    """两步复合：y(t+2) = x1 + 2T x2 + T^2 (φ(x) + kp γ u)"""
    T = p.period

    def hhat(x: np.ndarray) -> float:
        return float(x[0] + 2.0 * T * x[1] + T * T * p.drift_accel(x))

    def D(x: np.ndarray) -> float:
        return T * T * p.input_gain

    return hhat, D


def pendulum(params: PendulumParams = PendulumParams()) -> NonlinearSystem:
    T = params.period

    def f(x: np.ndarray) -> np.ndarray:
        return np.array([x[0] + T * x[1], x[1] + T * params.drift_accel(x)])

    def g(x: np.ndarray) -> np.ndarray:
        return np.array([0.0, T * params.input_gain])

    def h(x: np.ndarray) -> float:
        return float(x[0])

    name = "pendulum" if params.gamma == 1.0 else f"pendulum_gamma_{params.gamma:g}"
    return NonlinearSystem(
        f=f,
        g=g,
        h=h,
        n=2,
        lower=[-params.angle_limit, -params.rate_limit],
        upper=[params.angle_limit, params.rate_limit],
        name=name,
        inverse_maps=pendulum_inverse_maps(params),
    )


def pendulum_scaled_gain(gamma: float = 0.5, base: PendulumParams = PendulumParams()) -> NonlinearSystem:
    return pendulum(replace(base, gamma=gamma))


def benchmark_trajectory(steps: int, period: float = 1.0) -> Trajectory:
    t = np.arange(steps, dtype=np.float64)
    return Trajectory(np.sin(2.0 * np.pi * t / 15.0) + np.cos(2.0 * np.pi * t / 12.0) - 1.0, period)


def two_tone_trajectory(
    steps: int,
    period: float,
    tones: Tuple[Tuple[float, float], ...] = ((0.5, 0.25), (0.3, 0.13)),
) -> Trajectory:
    """Σ a·sin(2π f t T)，默认两个音调都不在摆的训练网格上"""
    t = np.arange(steps, dtype=np.float64) * period
    values = np.zeros(steps)
    for amplitude, freq in tones:
        values += amplitude * np.sin(2.0 * np.pi * freq * t)
    return Trajectory(values, period)


def step_trajectory(
    steps: int,
    period: float,
    amplitude: float = 1.0,
    start: int = 0,
    rise_steps: int = 0,
) -> Trajectory:
    """start 处阶跃到 amplitude；rise_steps > 0 时用升余弦过渡"""
    k = np.arange(steps, dtype=np.float64) - start
    if rise_steps <= 0:
        values = np.where(k >= 0, amplitude, 0.0)
    else:
        phase = np.clip(k / rise_steps, 0.0, 1.0)
        values = amplitude * 0.5 * (1.0 - np.cos(np.pi * phase))
    return Trajectory(values, period)
