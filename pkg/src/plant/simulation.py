from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ContractError, DivergenceError
from ..logger import logger
from .models import LtiStateSpace, NonlinearSystem, RunLog, Trajectory

System = Union[LtiStateSpace, NonlinearSystem]

# |y| 超过该值即判定发散
OUTPUT_BOUND = 1e9


def step_lti(sys: LtiStateSpace, x: np.ndarray, u: float) -> Tuple[np.ndarray, float]:
    """输出取更新前的状态：y(t) = c x(t)，随后 x(t+1) = A x(t) + b u(t)"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (sys.n,):
        raise ContractError(f"state has shape {x.shape}, expected ({sys.n},)")
    y = float(sys.c @ x)
    return sys.A @ x + sys.b * u, y


def output_of(sys: System, x: np.ndarray) -> float:
    if isinstance(sys, LtiStateSpace):
        return float(sys.c @ x)
    return sys.output(x)


def advance(sys: System, x: np.ndarray, u: float) -> np.ndarray:
    if isinstance(sys, LtiStateSpace):
        return sys.A @ x + sys.b * u
    return sys.step(x, u)


def divergence_reason(x: np.ndarray, y: float) -> Optional[str]:
    if not np.all(np.isfinite(x)):
        return "non-finite state"
    if not np.isfinite(y) or abs(y) > OUTPUT_BOUND:
        return f"|y| exceeded {OUTPUT_BOUND:.0e}"
    return None


def partial_log(
    us: np.ndarray, ys: np.ndarray, xs: np.ndarray, y_d: Trajectory, upto: int, period: float
) -> RunLog:
    return RunLog(
        u=Trajectory(us[:upto], period),
        y=Trajectory(ys[:upto], period),
        x=xs[:upto],
        y_d=Trajectory(y_d.values[:upto], period),
    )


def simulate(
    sys: System,
    u_seq: Trajectory,
    x0: Optional[np.ndarray] = None,
    y_d: Optional[Trajectory] = None,
) -> RunLog:
    """逐步施加输入序列，记录 u/x/y；y_d 缺省时即为输入本身（基线系统直接以期望输出为参考）"""
    n_steps = len(u_seq)
    if n_steps == 0:
        raise ContractError("input sequence is empty")
    n = sys.n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (n,):
        raise ContractError(f"initial state has shape {x.shape}, expected ({n},)")
    desired = u_seq if y_d is None else y_d
    if len(desired) != n_steps:
        raise ContractError(f"desired trajectory has {len(desired)} samples, input has {n_steps}")

    period = u_seq.period
    us = np.array(u_seq.values, dtype=np.float64)
    ys = np.empty(n_steps)
    xs = np.empty((n_steps, n))
    for t in range(n_steps):
        y = output_of(sys, x)
        problem = divergence_reason(x, y)
        if problem is not None:
            logger.warning(f"仿真发散: step={t}, {problem}")
            raise DivergenceError(t, problem, partial_log(us, ys, xs, desired, t, period))
        xs[t] = x
        ys[t] = y
        x = advance(sys, x, us[t])
    return RunLog(
        u=Trajectory(us, period),
        y=Trajectory(ys, period),
        x=xs,
        y_d=Trajectory(desired.values, period),
    )
