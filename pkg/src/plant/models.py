from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd

from ..errors import ContractError

StateMap = Callable[[np.ndarray], np.ndarray]
OutputMap = Callable[[np.ndarray], float]
CSV_FLOAT_FORMAT = "%.17g"


def frozen_array(value, ndim: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim != ndim:
        raise ContractError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LtiStateSpace:
    """x(t+1) = A x(t) + b u(t),  y(t) = c x(t)"""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        A = frozen_array(self.A, 2, "A")
        b = frozen_array(np.ravel(self.b), 1, "b")
        c = frozen_array(np.ravel(self.c), 1, "c")
        n = A.shape[0]
        if n < 1 or A.shape != (n, n):
            raise ContractError(f"A must be square with n >= 1, got shape {A.shape}")
        if b.shape != (n,) or c.shape != (n,):
            raise ContractError(f"b and c must have {n} entries, got {b.shape} and {c.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


@dataclass(frozen=True)
class TransferFunctionModel:
    """(β_{n-r} z^{n-r} + ... + β_0) / (z^n + α_{n-1} z^{n-1} + ... + α_0)

    alpha/beta 按升幂存放，与差分方程的系数下标一致。
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        alpha = frozen_array(self.alpha, 1, "alpha")
        beta = frozen_array(self.beta, 1, "beta")
        n = alpha.shape[0]
        if n < 1:
            raise ContractError("transfer function order must be >= 1")
        if not 1 <= beta.shape[0] <= n:
            raise ContractError(f"numerator must have between 1 and {n} coefficients, got {beta.shape[0]}")
        if beta[-1] == 0.0:
            raise ContractError("leading numerator coefficient must be nonzero")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def r(self) -> int:
        return self.n - (self.beta.shape[0] - 1)

    @property
    def leading(self) -> float:
        return float(self.beta[-1])

    def denominator_desc(self) -> np.ndarray:
        return np.concatenate(([1.0], self.alpha[::-1]))

    def numerator_desc(self) -> np.ndarray:
        return self.beta[::-1].copy()

    def numerator(self, z: complex) -> complex:
        return np.polyval(self.numerator_desc(), z)

    def denominator(self, z: complex) -> complex:
        return np.polyval(self.denominator_desc(), z)

    def __call__(self, z: complex) -> complex:
        return self.numerator(z) / self.denominator(z)


@dataclass(frozen=True)
class NonlinearSystem:
    """x(t+1) = f(x) + g(x) u,  y = h(x)

    inverse_maps 可选地给出解析的 (hhat, D)，满足 y(t+r) = hhat(x) + D(x) u(t)。
    """

    f: StateMap
    g: StateMap
    h: OutputMap
    n: int
    lower: np.ndarray
    upper: np.ndarray
    name: str = "nonlinear"
    inverse_maps: Optional[Tuple[OutputMap, OutputMap]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        lower = frozen_array(self.lower, 1, "lower")
        upper = frozen_array(self.upper, 1, "upper")
        if self.n < 1 or lower.shape != (self.n,) or upper.shape != (self.n,):
            raise ContractError(f"operating region bounds must have {self.n} entries")
        if np.any(lower > upper):
            raise ContractError("operating region lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def step(self, x: np.ndarray, u: float) -> np.ndarray:
        return np.asarray(self.f(x), dtype=np.float64) + np.asarray(self.g(x), dtype=np.float64) * u

    def output(self, x: np.ndarray) -> float:
        return float(self.h(x))

    def in_region(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class Trajectory:
    """等间隔采样序列，样本下标隐含为 0..N-1"""

    values: np.ndarray
    period: float = 1.0

    def __post_init__(self) -> None:
        values = frozen_array(np.ravel(self.values), 1, "values")
        if self.period <= 0.0:
            raise ContractError(f"sample period must be positive, got {self.period}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "period", float(self.period))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.period

    def at(self, k: int) -> float:
        """越过末端的预览保持最后一个值，k < 0 时按零初始条件返回 0"""
        if k < 0:
            return 0.0
        if k >= len(self):
            return float(self.values[-1])
        return float(self.values[k])

    def shifted(self, offset: float) -> "Trajectory":
        return Trajectory(self.values + offset, self.period)


@dataclass(frozen=True)
class RunLog:
    u: Trajectory
    y: Trajectory
    x: np.ndarray
    y_d: Trajectory

    def __post_init__(self) -> None:
        x = frozen_array(self.x, 2, "x")
        n_steps = len(self.u)
        if not (len(self.y) == len(self.y_d) == x.shape[0] == n_steps):
            raise ContractError(
                f"run log sequences differ in length: u={n_steps}, y={len(self.y)}, "
                f"y_d={len(self.y_d)}, x={x.shape[0]}"
            )
        if not (self.u.period == self.y.period == self.y_d.period):
            raise ContractError("run log sequences differ in sample period")
        object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return len(self.u)

    @property
    def period(self) -> float:
        return self.u.period

    @property
    def state_dim(self) -> int:
        return self.x.shape[1]

    def to_frame(self) -> pd.DataFrame:
        columns = {
            "t": self.u.steps,
            "u": self.u.values,
            "y": self.y.values,
            "y_d": self.y_d.values,
        }
        for i in range(self.state_dim):
            columns[f"x{i}"] = self.x[:, i]
        return pd.DataFrame(columns)

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        return path

    @classmethod
    def from_csv(cls, path: str | Path, period: float = 1.0) -> "RunLog":
        frame = pd.read_csv(path, float_precision="round_trip")
        state_cols = sorted((c for c in frame.columns if c.startswith("x")), key=lambda c: int(c[1:]))
        return cls(
            u=Trajectory(frame["u"].to_numpy(), period),
            y=Trajectory(frame["y"].to_numpy(), period),
            x=frame[state_cols].to_numpy(),
            y_d=Trajectory(frame["y_d"].to_numpy(), period),
        )
