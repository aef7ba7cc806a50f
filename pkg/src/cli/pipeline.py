"""配置到实验流程的装配：系统解析、训练数据配方、网络训练与评估"""

import copy
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import Config
from ..config.official_configs import EvaluationConfig, FeaturesConfig, SystemConfig, TrajectoriesConfig
from ..errors import ConfigError
from ..features import FeatureSpec, balanced_sample, build_dataset, sinusoid_family
from ..logger import logger
from ..nnet import Dataset, FnnModel, TrainConfig, TrainResult, train
from ..plant import LtiStateSpace, System, Trajectory
from ..plant.systems import (
    PendulumParams,
    benchmark_trajectory,
    pendulum,
    sim_stable,
    sim_unstable,
    step_trajectory,
    two_tone_trajectory,
)
from ..runner import Evaluation, evaluate, run_baseline
from ..sysid import SysIdReport, identify_lti, identify_nonlinear
from ..utils import ordered_map

# 摆的训练配方与测试轨迹
PENDULUM_AMPLITUDES = [0.2, 0.4, 0.6, 0.8, 1.0]
PENDULUM_FREQUENCIES_HZ = [0.1, 0.2, 0.4, 0.6, 0.8]
PENDULUM_IDENTIFY_STEPS = 500
LTI_IDENTIFY_STEPS = 400
# 训练轨迹的峰值低于该值视为混叠成零
ALIASING_TOL = 1e-9


@dataclass
class Seeds:
    """由实验种子派生的各环节种子，全部写进报告"""

    experiment: int

    @property
    def init(self) -> int:
        return self.experiment

    @property
    def sample(self) -> int:
        return self.experiment + 1

    @property
    def train(self) -> int:
        return self.experiment + 2

    def to_dict(self) -> Dict[str, int]:
        return {"experiment": self.experiment, "init": self.init, "sample": self.sample, "train": self.train}


@dataclass
class TrainedPipeline:
    system: System
    period: float
    sysid: SysIdReport
    spec: FeatureSpec
    dataset: Dataset
    result: TrainResult
    seeds: Seeds
    notes: List[str] = field(default_factory=list)

    @property
    def model(self) -> FnnModel:
        return self.result.model


def build_system(cfg: SystemConfig) -> tuple[System, float]:
    """返回 (系统, 采样周期)"""
    if cfg.kind == "sim_stable":
        return sim_stable(), 1.0
    if cfg.kind == "sim_unstable":
        return sim_unstable(), 1.0
    if cfg.kind in ("pendulum", "pendulum_scaled_gain"):
        p = cfg.pendulum
        gamma = p.gamma if cfg.kind == "pendulum" else p.scaled_gamma
        params = PendulumParams(period=p.period, a=p.a, a_hat=p.a_hat, d=p.d, kp=p.kp, kd=p.kd, gamma=gamma)
        return pendulum(params), p.period
    if not cfg.A:
        raise ConfigError("system.kind = 'custom' requires system.A, system.b and system.c")
    try:
        return LtiStateSpace(A=cfg.A, b=cfg.b, c=cfg.c), cfg.period
    except ValueError as e:
        raise ConfigError(f"custom system matrices are inconsistent: {e}") from e


def identify(sys: System, period: float) -> SysIdReport:
    if isinstance(sys, LtiStateSpace):
        return identify_lti(sys, LTI_IDENTIFY_STEPS)
    return identify_nonlinear(sys, PENDULUM_IDENTIFY_STEPS, period)


def feature_spec(cfg: FeaturesConfig, r: int, n: int) -> FeatureSpec:
    try:
        return FeatureSpec(
            mode=cfg.mode,
            r=r,
            n=n,
            difference=cfg.difference,
            difference_reference=cfg.difference_reference,
            differenced_states=tuple(cfg.differenced_states),
            preview_offsets=tuple(cfg.preview_offsets) or None,
            output_reference=None if cfg.output_reference == "same" else cfg.output_reference,
        )
    except ValueError as e:
        raise ConfigError(f"[features] {e}") from e


def validate_trajectories(cfg: TrajectoriesConfig) -> None:
    if not cfg.amplitudes or not cfg.frequencies_hz:
        raise ConfigError("[trajectories] amplitudes and frequencies_hz must be nonempty")
    if cfg.per_source < 1 or cfg.steps < 1:
        raise ConfigError("[trajectories] steps and per_source must be positive")


def training_data(
    sys: System, period: float, cfg: TrajectoriesConfig, spec: FeatureSpec, seed: int
) -> tuple[Dataset, List[str]]:
    """正弦族驱动基线闭环，各轨迹建数据集后均衡抽样"""
    validate_trajectories(cfg)
    family = sinusoid_family(cfg.amplitudes, cfg.frequencies_hz, period, cfg.steps)
    notes = []
    for i, traj in enumerate(family):
        if np.max(np.abs(traj.values)) < ALIASING_TOL:
            a = cfg.amplitudes[i // len(cfg.frequencies_hz)]
            f = cfg.frequencies_hz[i % len(cfg.frequencies_hz)]
            note = f"trajectory a={a:g}, f={f:g} Hz samples to zero at T={period:g} s (aliased)"
            logger.warning(f"训练轨迹混叠为零: a={a:g}, f={f:g} Hz, T={period:g} s")
            notes.append(note)
    logs = ordered_map(lambda traj: run_baseline(sys, traj), family)
    datasets = ordered_map(lambda log: build_dataset(log, spec), logs)
    return balanced_sample(datasets, cfg.per_source, seed), notes


def train_config(config: Config, seed: int) -> TrainConfig:
    t = config.training
    try:
        return TrainConfig(
            max_iterations=t.max_iterations,
            loss_tolerance=t.loss_tolerance,
            lm_lambda_init=t.lm_lambda_init,
            lm_lambda_up=t.lm_lambda_up,
            lm_lambda_down=t.lm_lambda_down,
            rng_seed=seed,
            trainer=t.trainer,
            learning_rate=t.learning_rate,
            momentum=t.momentum,
            batch_size=t.batch_size,
            holdout_fraction=t.holdout_fraction,
            log_every=t.log_every,
        )
    except ValueError as e:
        raise ConfigError(f"[training] {e}") from e


def prepare(config: Config) -> tuple[System, float, SysIdReport, FeatureSpec]:
    sys, period = build_system(config.system)
    report = identify(sys, period)
    spec = feature_spec(config.features, report.relative_degree, sys.n)
    return sys, period, report, spec


def run_training(config: Config, dataset_hook=None) -> TrainedPipeline:
    """dataset_hook 在训练前拿到数据集，训练失败时数据集已经落盘"""
    seeds = Seeds(config.experiment.seed)
    sys, period, report, spec = prepare(config)
    if not config.training.hidden:
        raise ConfigError("[training] hidden must list at least one layer width")
    dataset, notes = training_data(sys, period, config.trajectories, spec, seeds.sample)
    if dataset_hook is not None:
        dataset_hook(dataset)
    net = FnnModel.hidden(spec.input_width, config.training.hidden, config.training.activation, seeds.init)
    logger.info(
        f"开始训练: system={config.system.kind}, mode={spec.mode}, width={spec.input_width}, "
        f"rows={len(dataset)}, params={net.n_params}"
    )
    result = train(net, dataset, train_config(config, seeds.train))
    return TrainedPipeline(sys, period, report, spec, dataset, result, seeds, notes)


def evaluation_trajectory(cfg: EvaluationConfig, period: float) -> Trajectory:
    if cfg.steps < 1:
        raise ConfigError("[evaluation] steps must be positive")
    if cfg.trajectory == "benchmark":
        return benchmark_trajectory(cfg.steps, period)
    if cfg.trajectory == "two_tone":
        if any(len(tone) != 2 for tone in cfg.tones):
            raise ConfigError("[evaluation] every tone must be [amplitude, frequency_hz]")
        return two_tone_trajectory(cfg.steps, period, tuple((a, f) for a, f in cfg.tones))
    return step_trajectory(cfg.steps, period, cfg.step_amplitude, cfg.step_start, cfg.step_rise)


def initial_state(cfg: EvaluationConfig, n: int) -> Optional[np.ndarray]:
    if not cfg.initial_state:
        return None
    if len(cfg.initial_state) != n:
        raise ConfigError(f"[evaluation] initial_state has {len(cfg.initial_state)} entries, system order is {n}")
    return np.array(cfg.initial_state, dtype=np.float64)


def evaluation_disturbance(cfg: EvaluationConfig, period: float) -> Optional[Trajectory]:
    if cfg.disturbance == 0.0:
        return None
    if cfg.disturbance_start < 0:
        raise ConfigError("[evaluation] disturbance_start must be non-negative")
    k = np.arange(cfg.steps)
    return Trajectory(np.where(k >= cfg.disturbance_start, cfg.disturbance, 0.0), period)


def run_evaluation(
    config: Config,
    sys: System,
    period: float,
    spec: FeatureSpec,
    net: FnnModel,
) -> Evaluation:
    if net.input_dim != spec.input_width:
        raise ConfigError(f"model expects {net.input_dim} inputs, feature spec produces {spec.input_width}")
    cfg = config.evaluation
    if cfg.tracking_loss_factor <= 0.0:
        raise ConfigError("[evaluation] tracking_loss_factor must be positive")
    y_d = evaluation_trajectory(cfg, period)
    skip = None if cfg.skip < 0 else cfg.skip
    tail = cfg.tail_fraction if cfg.trajectory == "step" else None
    return evaluate(
        sys,
        net,
        spec,
        y_d,
        skip=skip,
        divergence_bound=cfg.divergence_bound,
        steady_state_tail=tail,
        x0=initial_state(cfg, sys.n),
        disturbance=evaluation_disturbance(cfg, period),
        tracking_loss_factor=cfg.tracking_loss_factor,
    )


def with_overrides(config: Config, **sections) -> Config:
    """深拷贝配置并逐节覆盖字段，例如 with_overrides(cfg, system={"kind": "pendulum"})"""
    out = copy.deepcopy(config)
    for section, values in sections.items():
        target = getattr(out, section)
        for key, value in values.items():
            if not hasattr(target, key):
                raise ConfigError(f"unknown key {section}.{key}")
            setattr(target, key, value)
    return out


def pendulum_recipe(config: Config, kind: str, trajectory: str, steps: Optional[int] = None, **features) -> Config:
    evaluation = {"trajectory": trajectory}
    if steps is not None:
        evaluation["steps"] = steps
    return with_overrides(
        config,
        system={"kind": kind},
        trajectories={
            "amplitudes": list(PENDULUM_AMPLITUDES),
            "frequencies_hz": list(PENDULUM_FREQUENCIES_HZ),
            "steps": 1000,
            "per_source": 200,
        },
        evaluation=evaluation,
        features=features,
    )
