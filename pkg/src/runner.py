"""基线闭环与 DNN 增强闭环的运行，以及跟踪误差指标"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol

import numpy as np
import pandas as pd

from .errors import ContractError, DivergenceError
from .features import FeatureSpec, apply_difference, assemble_inputs
from .inverse import StateSpaceInverse, exact_inverse_affine_nonlinear, exact_inverse_tf
from .logger import logger
from .plant import LtiStateSpace, RunLog, System, Trajectory, simulate, ss_to_tf
from .plant.simulation import advance, divergence_reason, output_of, partial_log
from .sysid import step_steady_state_error

DIVERGENCE_BOUND = 1e3
# |y - y_d| 超过 TRACKING_LOSS_FACTOR * max(max|y_d|, TRACKING_SCALE_FLOOR) 视为失去跟踪
TRACKING_LOSS_FACTOR = 3.0
TRACKING_SCALE_FLOOR = 1.0


class ReferenceGenerator(Protocol):
    def forward(self, x: np.ndarray) -> np.ndarray: ...


class ExactInversePolicy:
    """以精确逆代替 DNN 的参考生成器，特征布局与 FeatureSpec 一致（仅非差分模式）"""

    def __init__(self, sys: System, spec: FeatureSpec) -> None:
        if spec.difference:
            raise ContractError("the exact-inverse policy works on undifferenced features only")
        if spec.preview_offsets != (spec.r,):
            raise ContractError("the exact-inverse policy needs the single preview offset r")
        self.spec = spec
        self.sys = sys
        if spec.mode == "transfer_function":
            if not isinstance(sys, LtiStateSpace):
                raise ContractError("transfer-function oracle requires an LTI system")
            self.tf = ss_to_tf(sys)
        elif isinstance(sys, LtiStateSpace):
            self.ss_inverse = StateSpaceInverse(sys, spec.r)
        elif sys.inverse_maps is None:
            raise ContractError(f"system {sys.name!r} carries no analytic inverse maps")

    def forward(self, features: np.ndarray) -> np.ndarray:
        n = self.spec.n
        if self.spec.mode == "transfer_function":
            return np.array([exact_inverse_tf(self.tf, features[: n + 1], features[n + 1 :])])
        x, yd = features[:n], float(features[n])
        if isinstance(self.sys, LtiStateSpace):
            return np.array([self.ss_inverse(x, yd)])
        hhat, D = self.sys.inverse_maps
        return np.array([exact_inverse_affine_nonlinear(hhat, D, x, yd)])


def oracle_reference(sys: System, r: int, x: np.ndarray, y_d: Trajectory, t: int) -> Optional[float]:
    """当前状态下使 y(t+r) = y_d(t+r) 的参考输入；非线性系统没有解析逆时返回 None"""
    if isinstance(sys, LtiStateSpace):
        return StateSpaceInverse(sys, r)(x, y_d.at(t + r))
    if sys.inverse_maps is None:
        return None
    hhat, D = sys.inverse_maps
    return exact_inverse_affine_nonlinear(hhat, D, x, y_d.at(t + r))


def _check_disturbance(y_d: Trajectory, disturbance: Optional[Trajectory]) -> None:
    if disturbance is not None and len(disturbance) != len(y_d):
        raise ContractError(f"disturbance has {len(disturbance)} samples, desired trajectory has {len(y_d)}")


def run_baseline(
    sys: System,
    y_d: Trajectory,
    x0: Optional[np.ndarray] = None,
    disturbance: Optional[Trajectory] = None,
) -> RunLog:
    """基线闭环：期望轨迹直接作为参考输入；disturbance 叠加在参考输入上"""
    _check_disturbance(y_d, disturbance)
    if disturbance is None:
        return simulate(sys, y_d, x0)
    return simulate(sys, Trajectory(y_d.values + disturbance.values, y_d.period), x0, y_d=y_d)


def run_enhanced(
    sys: System,
    net: ReferenceGenerator,
    spec: FeatureSpec,
    y_d: Trajectory,
    x0: Optional[np.ndarray] = None,
    disturbance: Optional[Trajectory] = None,
) -> RunLog:
    """每步由当前状态与 y_d 的 r 步预览组装特征，DNN 输出作为基线系统的参考输入

    记录的 u 为生成器输出，disturbance 只作用于系统。
    """
    n_steps = len(y_d)
    if n_steps == 0:
        raise ContractError("desired trajectory is empty")
    if spec.mode == "state_space" and spec.n != sys.n:
        raise ContractError(f"feature spec expects n={spec.n}, system has n={sys.n}")
    _check_disturbance(y_d, disturbance)
    x = np.zeros(sys.n) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (sys.n,):
        raise ContractError(f"initial state has shape {x.shape}, expected ({sys.n},)")
    period = y_d.period
    us = np.zeros(n_steps)
    ys = np.empty(n_steps)
    xs = np.empty((n_steps, sys.n))

    def input_at(k: int) -> float:
        return float(us[k]) if k >= 0 else 0.0

    for t in range(n_steps):
        y = output_of(sys, x)
        problem = divergence_reason(x, y)
        if problem is None:
            features = assemble_inputs(spec, t, x, y_d.at, input_at)
            ref_out = 0.0
            if spec.difference:
                ref_in = y if spec.difference_reference == "actual_now" else y_d.at(t)
                ref_out = y if spec.output_reference == "actual_now" else y_d.at(t)
                features = apply_difference(features, None, np.array([ref_in]), spec)[0][0]
            u = float(net.forward(features)[0]) + ref_out
            if not np.isfinite(u):
                problem = "non-finite reference from generator"
        if problem is not None:
            logger.warning(f"增强闭环发散: step={t}, {problem}")
            raise DivergenceError(t, problem, partial_log(us, ys, xs, y_d, t, period))
        xs[t] = x
        ys[t] = y
        us[t] = u
        x = advance(sys, x, u if disturbance is None else u + disturbance.values[t])
    return RunLog(u=Trajectory(us, period), y=Trajectory(ys, period), x=xs, y_d=y_d)


def rms_error(y: Trajectory, y_d: Trajectory, skip: int = 0) -> float:
    if len(y) != len(y_d):
        raise ContractError(f"trajectories differ in length: {len(y)} vs {len(y_d)}")
    if not 0 <= skip < len(y):
        raise ContractError(f"skip={skip} must lie in [0, {len(y)})")
    err = y.values[skip:] - y_d.values[skip:]
    return float(np.sqrt(np.mean(err * err)))


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not np.isfinite(value):
        return None
    return float(value)


@dataclass(frozen=True)
class ExperimentReport:
    rms_baseline: float
    rms_enhanced: float
    reduction_percent: float
    diverged: bool
    per_step_errors: Dict[str, np.ndarray] = field(default_factory=dict)
    rms_modeling: Optional[float] = None
    diverged_at: Optional[int] = None
    skip: int = 0
    steady_state_error: Optional[float] = None
    # simulation / bound / tracking_loss
    divergence_reason: Optional[str] = None

    def to_dict(self, include_steps: bool = False) -> dict:
        data = {
            "rms_baseline": _finite_or_none(self.rms_baseline),
            "rms_enhanced": _finite_or_none(self.rms_enhanced),
            "reduction_percent": _finite_or_none(self.reduction_percent),
            "diverged": self.diverged,
            "diverged_at": self.diverged_at,
            "divergence_reason": self.divergence_reason,
            "rms_modeling": _finite_or_none(self.rms_modeling),
            "skip": self.skip,
            "steady_state_error": _finite_or_none(self.steady_state_error),
        }
        if include_steps:
            data["per_step_errors"] = {k: v.tolist() for k, v in self.per_step_errors.items()}
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def reduction_percent(rms_baseline: float, rms_enhanced: float) -> float:
    if not (np.isfinite(rms_baseline) and np.isfinite(rms_enhanced)) or rms_baseline == 0.0:
        return float("nan")
    return 100.0 * (1.0 - rms_enhanced / rms_baseline)


def first_exceedance(log: RunLog, bound: float) -> Optional[int]:
    hits = np.flatnonzero((np.abs(log.u.values) > bound) | (np.abs(log.y.values) > bound))
    return int(hits[0]) if hits.size else None


def tracking_loss_bound(y_d: Trajectory, factor: float = TRACKING_LOSS_FACTOR) -> float:
    return factor * max(float(np.max(np.abs(y_d.values))), TRACKING_SCALE_FLOOR)


def first_tracking_loss(log: RunLog, bound: float, skip: int = 0) -> Optional[int]:
    """skip 之后首个 |y - y_d| > bound 的步；网络饱和时 |u|、|y| 有界但跟踪已经丢失"""
    err = np.abs(log.y.values[skip:] - log.y_d.values[skip:])
    hits = np.flatnonzero(err > bound)
    return int(hits[0]) + skip if hits.size else None


@dataclass
class Evaluation:
    """一次评估的全部产物：报告、两条运行记录、逐步的 oracle 参考"""

    report: ExperimentReport
    baseline: RunLog
    enhanced: RunLog
    oracle_u: np.ndarray

    def plot_frame(self) -> pd.DataFrame:
        """逐步绘图数据；增强闭环提前发散时其后各列为空"""
        steps = len(self.baseline)
        pad = steps - len(self.enhanced)

        def padded(values: np.ndarray) -> np.ndarray:
            return np.concatenate((values, np.full(pad, np.nan)))

        return pd.DataFrame(
            {
                "t": self.baseline.y_d.steps,
                "y_d": self.baseline.y_d.values,
                "u_dnn": padded(self.enhanced.u.values),
                "u_oracle": padded(self.oracle_u),
                "y_baseline": self.baseline.y.values,
                "y_enhanced": padded(self.enhanced.y.values),
            }
        )


def evaluate(
    sys: System,
    net: ReferenceGenerator,
    spec: FeatureSpec,
    y_d: Trajectory,
    skip: Optional[int] = None,
    divergence_bound: float = DIVERGENCE_BOUND,
    steady_state_tail: Optional[float] = None,
    x0: Optional[np.ndarray] = None,
    disturbance: Optional[Trajectory] = None,
    tracking_loss_factor: float = TRACKING_LOSS_FACTOR,
) -> Evaluation:
    """基线与增强闭环在同一条期望轨迹上的对比；发散作为结果记录而不抛出

    三种情况判为发散：仿真守卫触发、|u| 或 |y| 超过 divergence_bound、
    skip 之后跟踪误差超过 tracking_loss_bound。发散时不给出误差下降百分比。
    """
    skip = sys.n if skip is None else skip
    baseline = run_baseline(sys, y_d, x0, disturbance)
    candidates: List[tuple[int, str]] = []
    try:
        enhanced = run_enhanced(sys, net, spec, y_d, x0, disturbance)
    except DivergenceError as e:
        enhanced = e.log
        candidates.append((e.step, "simulation"))
    exceed = first_exceedance(enhanced, divergence_bound)
    if exceed is not None:
        candidates.append((exceed, "bound"))
    lost = first_tracking_loss(enhanced, tracking_loss_bound(y_d, tracking_loss_factor), skip)
    if lost is not None:
        candidates.append((lost, "tracking_loss"))
    diverged_at, reason = min(candidates) if candidates else (None, None)
    diverged = diverged_at is not None
    if diverged:
        logger.warning(f"增强闭环在 step={diverged_at} 发散 ({reason})")

    oracle: List[float] = []
    for t in range(len(enhanced)):
        value = oracle_reference(sys, spec.r, enhanced.x[t], y_d, t)
        oracle.append(np.nan if value is None else value)
    oracle_u = np.array(oracle)

    rms_base = rms_error(baseline.y, baseline.y_d, skip)
    if len(enhanced) > skip:
        rms_enh = rms_error(enhanced.y, enhanced.y_d, skip)
        modeling = enhanced.u.values[skip:] - oracle_u[skip:]
        rms_modeling = float(np.sqrt(np.mean(modeling * modeling))) if np.all(np.isfinite(modeling)) else None
    else:
        rms_enh, rms_modeling = float("inf"), None
    steady = None
    if steady_state_tail is not None and not diverged:
        steady = step_steady_state_error(enhanced, steady_state_tail)

    errors = {"baseline": baseline.y.values - baseline.y_d.values, "enhanced": enhanced.y.values - enhanced.y_d.values}
    report = ExperimentReport(
        rms_baseline=rms_base,
        rms_enhanced=rms_enh,
        reduction_percent=float("nan") if diverged else reduction_percent(rms_base, rms_enh),
        diverged=diverged,
        per_step_errors=errors,
        rms_modeling=rms_modeling,
        diverged_at=diverged_at,
        skip=skip,
        steady_state_error=steady,
        divergence_reason=reason,
    )
    return Evaluation(report=report, baseline=baseline, enhanced=enhanced, oracle_u=oracle_u)


def baseline_steady_state_error(sys: System, y_d: Trajectory, tail: float = 0.2) -> float:
    return step_steady_state_error(run_baseline(sys, y_d), tail)
