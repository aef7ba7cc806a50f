"""闭环系统的最小辨识：相对阶、直流增益、零点/最小相位判定、阶跃稳态误差"""

import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import ContractError, DcGainUndefinedError, RelativeDegreeError
from .logger import logger
from .plant import LtiStateSpace, NonlinearSystem, RunLog, TransferFunctionModel, simulate, ss_to_tf
from .plant.models import OutputMap, Trajectory

MATRIX_TOL = 1e-9
STEP_RTOL = 1e-6
POLE_AT_ONE_TOL = 1e-12
UNIT_CIRCLE_BAND = 1e-6
DC_TOLERANCE = 1e-3


@dataclass
class SysIdReport:
    relative_degree: int
    dc_gain: float
    zeros: List[complex] = field(default_factory=list)
    minimum_phase: Optional[bool] = None
    step_steady_state_error: float = float("nan")
    near_unit_circle: bool = False
    difference_learning_eligible: bool = False

    def to_dict(self) -> dict:
        data = asdict(self)
        data["zeros"] = [{"re": float(z.real), "im": float(z.imag)} for z in self.zeros]
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def relative_degree_lti(sys: LtiStateSpace, tol: float = MATRIX_TOL) -> int:
    if tol <= 0:
        raise ContractError(f"tol must be positive, got {tol}")
    v = sys.b
    for r in range(1, sys.n + 1):
        if abs(float(sys.c @ v)) > tol:
            return r
        v = sys.A @ v
    raise RelativeDegreeError("relative degree undefined")


def relative_degree_from_step(step_log: RunLog, tol: Optional[float] = None) -> int:
    """阶跃从第 0 步施加、零初始状态；返回输出第一次明显离开零的步数"""
    if tol is None:
        tol = STEP_RTOL * abs(float(step_log.u.values[0]))
    if tol <= 0:
        raise ContractError("step amplitude is zero, cannot derive a detection threshold")
    hits = np.flatnonzero(np.abs(step_log.y.values[1:]) > tol)
    if hits.size == 0:
        raise RelativeDegreeError("no response detected")
    return int(hits[0]) + 1


def dc_gain(sys: Union[LtiStateSpace, TransferFunctionModel]) -> float:
    if isinstance(sys, TransferFunctionModel):
        den = float(np.real(sys.denominator(1.0)))
        if abs(den) <= POLE_AT_ONE_TOL:
            raise DcGainUndefinedError()
        return float(np.real(sys.numerator(1.0))) / den
    I_minus_A = np.eye(sys.n) - sys.A
    if abs(np.linalg.det(I_minus_A)) <= POLE_AT_ONE_TOL:
        raise DcGainUndefinedError()
    return float(sys.c @ np.linalg.solve(I_minus_A, sys.b))


def zeros(tf: TransferFunctionModel) -> np.ndarray:
    """伴随矩阵特征值（np.roots 即 Hessenberg QR）后每个根做一次 Newton 修正"""
    num = tf.numerator_desc()
    if num.shape[0] < 2:
        return np.empty(0, dtype=complex)
    deriv = np.polyder(num)
    roots = np.roots(num).astype(complex)
    polished = []
    for z in roots:
        slope = np.polyval(deriv, z)
        if slope != 0:
            candidate = z - np.polyval(num, z) / slope
            if abs(np.polyval(num, candidate)) <= abs(np.polyval(num, z)):
                z = candidate
        polished.append(z)
    return np.array(polished, dtype=complex)


def classify_zeros(zs: np.ndarray) -> tuple[bool, bool]:
    """返回 (minimum_phase, near_unit_circle)"""
    moduli = np.abs(zs)
    near = bool(np.any(np.abs(moduli - 1.0) <= UNIT_CIRCLE_BAND))
    minimum_phase = bool(np.all(moduli < 1.0)) and not near
    return minimum_phase, near


def step_steady_state_error(step_log: RunLog, tail_fraction: float = 0.2) -> float:
    if not 0.0 < tail_fraction <= 0.5:
        raise ContractError(f"tail_fraction must lie in (0, 0.5], got {tail_fraction}")
    window = int(len(step_log) * tail_fraction)
    if window < 10:
        raise ContractError(f"log of {len(step_log)} samples leaves a tail window of {window} < 10 samples")
    amplitude = float(step_log.y_d.values[-1])
    return float(np.mean(np.abs(step_log.y.values[-window:] - amplitude)))


def step_response(sys: Union[LtiStateSpace, NonlinearSystem], steps: int, period: float, amplitude: float = 1.0) -> RunLog:
    return simulate(sys, Trajectory(np.full(steps, amplitude), period))


def identify_lti(sys: LtiStateSpace, steps: int = 400, tol: float = MATRIX_TOL) -> SysIdReport:
    r = relative_degree_lti(sys, tol)
    tf = ss_to_tf(sys)
    zs = zeros(tf)
    minimum_phase, near = classify_zeros(zs)
    gain = dc_gain(sys)
    log = step_response(sys, steps, 1.0)
    r_step = relative_degree_from_step(log)
    if r_step != r:
        logger.warning(f"阶跃响应得到的相对阶与矩阵计算不一致: matrix={r}, step={r_step}")
    if near:
        logger.warning(f"存在贴近单位圆的零点 {zs}，按非最小相位处理")
    elif not minimum_phase:
        logger.warning(f"系统为非最小相位 (zeros={zs})，逆动力学不稳定，DNN 增强方法将失效")
    return SysIdReport(
        relative_degree=r,
        dc_gain=gain,
        zeros=list(zs),
        minimum_phase=minimum_phase,
        step_steady_state_error=step_steady_state_error(log),
        near_unit_circle=near,
        difference_learning_eligible=abs(gain - 1.0) <= DC_TOLERANCE,
    )


def identify_nonlinear(sys: NonlinearSystem, steps: int, period: float, amplitude: float = 1.0) -> SysIdReport:
    """非线性系统只用阶跃响应：零动态一般无法判定，r = n 时无零动态"""
    log = step_response(sys, steps, period, amplitude)
    r = relative_degree_from_step(log)
    gain = float(np.mean(log.y.values[-max(10, steps // 10):])) / amplitude
    return SysIdReport(
        relative_degree=r,
        dc_gain=gain,
        zeros=[],
        minimum_phase=True if r == sys.n else None,
        step_steady_state_error=step_steady_state_error(log),
        near_unit_circle=False,
        difference_learning_eligible=abs(gain - 1.0) <= DC_TOLERANCE,
    )


def composed_output(sys: NonlinearSystem, r: int) -> Tuple[OutputMap, OutputMap]:
    """数值复合 r 步输出映射：y(t+r) = hhat(x) + D(x) u(t)

    u(t) 之后的输入对 y(t+r) 没有影响，取零即可；仅对控制仿射且相对阶为 r 的系统成立。
    """
    if r < 1:
        raise ContractError(f"relative degree must be >= 1, got {r}")

    def propagate(x: np.ndarray, u: float) -> float:
        state = sys.step(np.asarray(x, dtype=np.float64), u)
        for _ in range(r - 1):
            state = sys.step(state, 0.0)
        return sys.output(state)

    def hhat(x: np.ndarray) -> float:
        return propagate(x, 0.0)

    def D(x: np.ndarray) -> float:
        return propagate(x, 1.0) - propagate(x, 0.0)

    return hhat, D
