"""精确逆动力学：作为 DNN 的解析对照（oracle），也用于检验训练目标"""

from collections import deque
from typing import Sequence, Tuple

import numpy as np

from .errors import ContractError, RelativeDegreeError
from .plant import LtiStateSpace, Trajectory, TransferFunctionModel
from .plant.models import OutputMap

# |D(x)| 低于该值认为相对阶在此状态失效
AFFINE_GAIN_TOL = 1e-12


class StateSpaceInverse:
    """u(t) = (y_d(t+r) - c A^r x(t)) / (c A^{r-1} b)，缓存 c A^r 与 c A^{r-1} b"""

    def __init__(self, sys: LtiStateSpace, r: int) -> None:
        if not 1 <= r <= sys.n:
            raise ContractError(f"relative degree {r} outside [1, {sys.n}]")
        row = sys.c @ np.linalg.matrix_power(sys.A, r - 1)
        self.gain = float(row @ sys.b)
        if self.gain == 0.0:
            raise RelativeDegreeError(f"c A^{r - 1} b vanishes, r={r} is not the relative degree")
        self.free_response = row @ sys.A
        self.r = r

    def __call__(self, x: np.ndarray, yd_future: float) -> float:
        return float((yd_future - self.free_response @ np.asarray(x, dtype=np.float64)) / self.gain)


def exact_inverse_ss(sys: LtiStateSpace, r: int, x: np.ndarray, yd_future: float) -> float:
    return StateSpaceInverse(sys, r)(x, yd_future)


def _check_windows(tf: TransferFunctionModel, yd_window: np.ndarray, u_history: np.ndarray) -> None:
    if yd_window.shape != (tf.n + 1,):
        raise ContractError(f"y_d window must hold {tf.n + 1} samples, got {yd_window.shape}")
    if u_history.shape != (tf.n - tf.r,):
        raise ContractError(f"u history must hold {tf.n - tf.r} samples, got {u_history.shape}")


def _tf_weighted_sum(tf: TransferFunctionModel, yd_window: np.ndarray, u_history: np.ndarray) -> float:
    """yd_window = [y_d(t+r), ..., y_d(t-n+r)]，u_history = [u(t-1), ..., u(t-n+r)]

    差分方程移项：β_{n-r} u(t) = y_d(t+r) + Σ α_i y_d(t-n+r+i) - Σ_{i<n-r} β_i u(t-n+r+i)
    """
    n, r = tf.n, tf.r
    # 窗口按时间倒序，α_i 对应下标 n-i，β_i 对应下标 n-r-1-i
    total = yd_window[0] + tf.alpha @ yd_window[n:0:-1]
    if n > r:
        total -= tf.beta[:-1] @ u_history[::-1]
    return float(total)


def exact_inverse_tf(tf: TransferFunctionModel, yd_window: Sequence[float], u_history: Sequence[float]) -> float:
    yd_window = np.asarray(yd_window, dtype=np.float64)
    u_history = np.asarray(u_history, dtype=np.float64)
    _check_windows(tf, yd_window, u_history)
    return _tf_weighted_sum(tf, yd_window, u_history) / tf.leading


def steady_state_term(tf: TransferFunctionModel, yd_now: float) -> float:
    """s(y_d(t)) = (1 - Σβ + Σα) y_d(t) / β_{n-r}；单位直流增益时恒为零"""
    return float((1.0 - tf.beta.sum() + tf.alpha.sum()) * yd_now / tf.leading)


def exact_inverse_diff(
    tf: TransferFunctionModel,
    dyd_window: Sequence[float],
    du_history: Sequence[float],
    yd_now: float,
) -> Tuple[float, float]:
    """差分形式：窗口均相对 y_d(t) 取差；返回 (Δu, s_term)，u(t) = Δu + s_term + y_d(t)"""
    dyd_window = np.asarray(dyd_window, dtype=np.float64)
    du_history = np.asarray(du_history, dtype=np.float64)
    _check_windows(tf, dyd_window, du_history)
    return _tf_weighted_sum(tf, dyd_window, du_history) / tf.leading, steady_state_term(tf, yd_now)


class TransferFunctionInverse:
    """逐步运行的传递函数逆：u 历史放在环形缓冲里，初值为零"""

    def __init__(self, tf: TransferFunctionModel) -> None:
        self.tf = tf
        self.u_history: deque[float] = deque([0.0] * (tf.n - tf.r), maxlen=max(tf.n - tf.r, 1))

    def window(self, y_d: Trajectory, t: int) -> np.ndarray:
        """[y_d(t+r), ..., y_d(t-n+r)]；负下标按零初值，越过末端保持最后一个值"""
        return np.array([y_d.at(t + self.tf.r - j) for j in range(self.tf.n + 1)])

    def history(self) -> np.ndarray:
        if self.tf.n == self.tf.r:
            return np.empty(0)
        return np.array(self.u_history)

    def step(self, y_d: Trajectory, t: int) -> float:
        u = exact_inverse_tf(self.tf, self.window(y_d, t), self.history())
        if self.tf.n > self.tf.r:
            self.u_history.appendleft(u)
        return u


def exact_inverse_affine_nonlinear(hhat: OutputMap, D: OutputMap, x: np.ndarray, yd_future: float) -> float:
    gain = float(D(x))
    if abs(gain) < AFFINE_GAIN_TOL:
        raise RelativeDegreeError(f"relative degree lost at state {np.asarray(x).tolist()}")
    return (yd_future - float(hhat(x))) / gain
