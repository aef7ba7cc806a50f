from dataclasses import dataclass, field
from typing import List, Literal, NamedTuple, Optional

import numpy as np

from ..errors import ContractError, TrainingDivergedError
from ..logger import logger
from .model import Dataset, FnnModel, gradient, jacobian, mse, residuals

# λ 超过该值仍找不到下降方向即视为收敛；若此时方程奇异则视为发散
LAMBDA_CEILING = 1e12


@dataclass
class TrainConfig:
    max_iterations: int = 1000
    loss_tolerance: float = 1e-12
    lm_lambda_init: float = 1e-3
    lm_lambda_up: float = 10.0
    lm_lambda_down: float = 0.1
    rng_seed: int = 0
    trainer: Literal["levenberg_marquardt", "first_order"] = "levenberg_marquardt"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    holdout_fraction: float = 0.0
    log_every: int = 50

    def __post_init__(self) -> None:
        if self.max_iterations < 1 or self.batch_size < 1 or self.log_every < 1:
            raise ContractError("max_iterations, batch_size and log_every must be positive")
        if self.loss_tolerance <= 0 or self.lm_lambda_init <= 0 or self.learning_rate <= 0:
            raise ContractError("loss_tolerance, lm_lambda_init and learning_rate must be positive")
        if not self.lm_lambda_up > 1.0 > self.lm_lambda_down > 0.0:
            raise ContractError(
                f"need lm_lambda_up > 1 > lm_lambda_down > 0, got {self.lm_lambda_up} / {self.lm_lambda_down}"
            )
        if not 0.0 <= self.momentum < 1.0:
            raise ContractError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ContractError(f"holdout_fraction must lie in [0, 1), got {self.holdout_fraction}")
        if self.trainer not in ("levenberg_marquardt", "first_order"):
            raise ContractError(f"unknown trainer {self.trainer!r}")


class TrainResult(NamedTuple):
    model: FnnModel
    loss_history: np.ndarray
    holdout_loss: Optional[float]
    stop_reason: str


@dataclass
class _LmState:
    theta: np.ndarray
    loss: float
    lam: float
    history: List[float] = field(default_factory=list)


def split_holdout(dataset: Dataset, fraction: float, rng: np.random.Generator) -> tuple[Dataset, Optional[Dataset]]:
    if fraction <= 0.0:
        return dataset, None
    n_hold = int(round(len(dataset) * fraction))
    if n_hold < 1 or n_hold >= len(dataset):
        raise ContractError(f"holdout fraction {fraction} leaves no rows on one side of {len(dataset)}")
    order = rng.permutation(len(dataset))
    return dataset.subset(np.sort(order[n_hold:])), dataset.subset(np.sort(order[:n_hold]))


def _lm_step(net: FnnModel, data: Dataset, state: _LmState, cfg: TrainConfig, iteration: int) -> bool:
    """一次 LM 迭代；找到下降步返回 True，λ 饱和返回 False"""
    model = net.with_parameters(state.theta)
    jac = jacobian(model, data)
    res = residuals(model, data)
    normal = jac.T @ jac
    grad = jac.T @ res
    eye = np.eye(normal.shape[0])
    while True:
        try:
            step = np.linalg.solve(normal + state.lam * eye, -grad)
        except np.linalg.LinAlgError:
            step = None
        if step is None or not np.all(np.isfinite(step)):
            if state.lam > LAMBDA_CEILING:
                raise TrainingDivergedError(iteration, state.lam)
            state.lam *= cfg.lm_lambda_up
            continue
        candidate = state.theta + step
        loss = mse(net.with_parameters(candidate), data)
        if np.isfinite(loss) and loss < state.loss:
            state.theta = candidate
            state.loss = loss
            state.lam = max(state.lam * cfg.lm_lambda_down, np.finfo(np.float64).tiny)
            return True
        state.lam *= cfg.lm_lambda_up
        if state.lam > LAMBDA_CEILING:
            return False


def _train_lm(net: FnnModel, data: Dataset, cfg: TrainConfig) -> tuple[FnnModel, List[float], str]:
    state = _LmState(theta=net.parameters(), loss=mse(net, data), lam=cfg.lm_lambda_init)
    state.history.append(state.loss)
    reason = "max_iterations"
    for iteration in range(1, cfg.max_iterations + 1):
        if state.loss < cfg.loss_tolerance:
            reason = "loss_tolerance"
            break
        if not _lm_step(net, data, state, cfg, iteration):
            logger.info(f"LM 阻尼系数超过 {LAMBDA_CEILING:.0e} 仍无下降方向，停止训练: iter={iteration}")
            reason = "lambda_saturated"
            break
        state.history.append(state.loss)
        if iteration % cfg.log_every == 0:
            logger.debug(f"LM iter={iteration} loss={state.loss:.3e} lambda={state.lam:.1e}")
    else:
        if state.loss < cfg.loss_tolerance:
            reason = "loss_tolerance"
    return net.with_parameters(state.theta), state.history, reason


def _train_first_order(
    net: FnnModel, data: Dataset, cfg: TrainConfig, rng: np.random.Generator
) -> tuple[FnnModel, List[float], str]:
    """带动量的小批量梯度下降，每个 iteration 为一个 epoch"""
    theta = net.parameters()
    velocity = np.zeros_like(theta)
    history = [mse(net, data)]
    reason = "max_iterations"
    for epoch in range(1, cfg.max_iterations + 1):
        if history[-1] < cfg.loss_tolerance:
            reason = "loss_tolerance"
            break
        order = rng.permutation(len(data))
        for start in range(0, len(data), cfg.batch_size):
            batch = data.subset(order[start : start + cfg.batch_size])
            velocity = cfg.momentum * velocity - cfg.learning_rate * gradient(net.with_parameters(theta), batch)
            theta = theta + velocity
        loss = mse(net.with_parameters(theta), data)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, float("nan"))
        history.append(loss)
        if epoch % cfg.log_every == 0:
            logger.debug(f"SGD epoch={epoch} loss={loss:.3e}")
    return net.with_parameters(theta), history, reason


def train(net: FnnModel, dataset: Dataset, cfg: TrainConfig) -> TrainResult:
    """标准化参数取自训练部分；给定 rng_seed 结果可复现"""
    if len(dataset) == 0:
        raise ContractError("dataset is empty")
    if dataset.inputs.shape[1] != net.input_dim or dataset.targets.shape[1] != net.output_dim:
        raise ContractError(
            f"dataset is {dataset.inputs.shape[1]}->{dataset.targets.shape[1]}, "
            f"network is {net.input_dim}->{net.output_dim}"
        )
    rng = np.random.default_rng(cfg.rng_seed)
    train_part, holdout = split_holdout(dataset, cfg.holdout_fraction, rng)
    net = net.with_standardization(train_part)
    if cfg.trainer == "levenberg_marquardt":
        model, history, reason = _train_lm(net, train_part, cfg)
    else:
        model, history, reason = _train_first_order(net, train_part, cfg, rng)
    holdout_loss = mse(model, holdout) if holdout is not None else None
    logger.info(
        f"训练结束 ({cfg.trainer}): iterations={len(history) - 1}, loss={history[-1]:.3e}, "
        f"holdout={holdout_loss if holdout_loss is None else f'{holdout_loss:.3e}'}, reason={reason}"
    )
    return TrainResult(model, np.array(history), holdout_loss, reason)
