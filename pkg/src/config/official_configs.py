from dataclasses import dataclass, field
from typing import Literal

from .config_base import ConfigBase

SystemKind = Literal["sim_stable", "sim_unstable", "pendulum", "pendulum_scaled_gain", "custom"]
LogLevel = Literal["TRACE", "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


@dataclass
class ExperimentConfig(ConfigBase):
    name: str = "sim_stable"
    seed: int = 0
    output_dir: str = "output"


@dataclass
class PendulumConfig(ConfigBase):
    period: float = 0.02
    a: float = 9.81
    a_hat: float = 9.81
    d: float = 0.5
    kp: float = 16.0
    kd: float = 8.0
    gamma: float = 1.0
    scaled_gamma: float = 0.5


@dataclass
class SystemConfig(ConfigBase):
    kind: SystemKind = "sim_stable"
    # 仅 kind = "custom" 时使用
    A: list[list[float]] = field(default_factory=list)
    b: list[float] = field(default_factory=list)
    c: list[float] = field(default_factory=list)
    period: float = 1.0
    pendulum: PendulumConfig = field(default_factory=PendulumConfig)


@dataclass
class FeaturesConfig(ConfigBase):
    mode: Literal["state_space", "transfer_function"] = "state_space"
    difference: bool = False
    difference_reference: Literal["desired_now", "actual_now"] = "actual_now"
    # 加回网络输出的参考；same 表示与 difference_reference 相同
    output_reference: Literal["same", "desired_now", "actual_now"] = "same"
    differenced_states: list[int] = field(default_factory=lambda: [0])
    # 为空时取 [r]
    preview_offsets: list[int] = field(default_factory=list)


@dataclass
class TrainingConfig(ConfigBase):
    hidden: list[int] = field(default_factory=lambda: [20, 20])
    activation: Literal["tanh", "relu"] = "tanh"
    trainer: Literal["levenberg_marquardt", "first_order"] = "levenberg_marquardt"
    max_iterations: int = 1000
    loss_tolerance: float = 1e-12
    lm_lambda_init: float = 1e-3
    lm_lambda_up: float = 10.0
    lm_lambda_down: float = 0.1
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    holdout_fraction: float = 0.0
    log_every: int = 50


@dataclass
class TrajectoriesConfig(ConfigBase):
    amplitudes: list[float] = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0, 5.0])
    frequencies_hz: list[float] = field(default_factory=lambda: [0.024, 0.032, 0.048, 0.091, 1.0])
    steps: int = 1000
    per_source: int = 200


@dataclass
class EvaluationConfig(ConfigBase):
    trajectory: Literal["benchmark", "two_tone", "step"] = "benchmark"
    steps: int = 5000
    # < 0 时取系统阶数 n
    skip: int = -1
    divergence_bound: float = 1e3
    tracking_loss_factor: float = 3.0
    tones: list[list[float]] = field(default_factory=lambda: [[0.5, 0.25], [0.3, 0.13]])
    step_amplitude: float = 1.0
    step_start: int = 100
    step_rise: int = 50
    tail_fraction: float = 0.2
    # 为空时从零状态开始
    initial_state: list[float] = field(default_factory=list)
    # 从 disturbance_start 起叠加在系统输入上的常值扰动
    disturbance: float = 0.0
    disturbance_start: int = 0


@dataclass
class DebugConfig(ConfigBase):
    level: LogLevel = "INFO"
    to_file: bool = False
    file_path: str = "logs/tracker.log"
    rotation: str = "10 MB"
    retention: str = "7 days"
    serialize: bool = False
    backtrace: bool = False
    diagnose: bool = False
