"""由运行记录构造 DNN 训练集：状态空间 / 传递函数两种特征选择，以及差分学习变换"""

from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractError
from .nnet import Dataset
from .plant import RunLog, Trajectory

SampleAt = Callable[[int], float]


@dataclass(frozen=True)
class FeatureSpec:
    """mode=state_space: [x(t), y(t+k) for k in preview_offsets]
    mode=transfer_function: [y(t+r), ..., y(t-n+r), u(t-1), ..., u(t-n+r)]

    difference=True 时输出类特征与目标都减去参考值 ref(t)；状态中只有 differenced_states
    列出的分量（位置类）做差，其余（速度类）保持原值。

    运行时 difference_reference 决定输入侧的 ref(t)，output_reference 决定加回网络输出的
    ref(t)，缺省与输入侧相同。训练时两侧都是实际输出。
    """

    mode: Literal["state_space", "transfer_function"]
    r: int
    n: int
    difference: bool = False
    difference_reference: Literal["desired_now", "actual_now"] = "actual_now"
    differenced_states: Tuple[int, ...] = (0,)
    preview_offsets: Optional[Tuple[int, ...]] = None
    output_reference: Optional[Literal["desired_now", "actual_now"]] = None

    def __post_init__(self) -> None:
        if self.mode not in ("state_space", "transfer_function"):
            raise ContractError(f"unknown feature mode {self.mode!r}")
        if self.output_reference is None:
            object.__setattr__(self, "output_reference", self.difference_reference)
        for side in (self.difference_reference, self.output_reference):
            if side not in ("desired_now", "actual_now"):
                raise ContractError(f"unknown difference reference {side!r}")
        if not 1 <= self.r <= self.n:
            raise ContractError(f"relative degree {self.r} outside [1, {self.n}]")
        if any(not 0 <= i < self.n for i in self.differenced_states):
            raise ContractError(f"differenced state index out of range in {self.differenced_states}")
        offsets = (self.r,) if self.preview_offsets is None else tuple(int(k) for k in self.preview_offsets)
        if not offsets or min(offsets) < 1:
            raise ContractError(f"preview offsets must be positive, got {offsets}")
        if self.mode == "transfer_function" and offsets != (self.r,):
            raise ContractError("preview offsets only apply to state_space mode")
        object.__setattr__(self, "preview_offsets", offsets)
        object.__setattr__(self, "differenced_states", tuple(self.differenced_states))

    @property
    def input_width(self) -> int:
        if self.mode == "state_space":
            return self.n + len(self.preview_offsets)
        return 2 * self.n - self.r + 1

    @property
    def history(self) -> int:
        """传递函数模式需要回看的步数"""
        return self.n - self.r if self.mode == "transfer_function" else 0

    @property
    def lookahead(self) -> int:
        return max(self.preview_offsets) if self.mode == "state_space" else self.r

    @property
    def feature_names(self) -> Tuple[str, ...]:
        prefix = "d_" if self.difference else ""
        if self.mode == "state_space":
            names = [f"{prefix}x{i}" if i in self.differenced_states else f"x{i}" for i in range(self.n)]
            names += [f"{prefix}y[t+{k}]" for k in self.preview_offsets]
            return tuple(names)
        names = [f"{prefix}y[t{self.r - j:+d}]" for j in range(self.n + 1)]
        names += [f"{prefix}u[t-{m + 1}]" for m in range(self.n - self.r)]
        return tuple(names)

    def difference_mask(self) -> np.ndarray:
        """需要减去 ref(t) 的输入列"""
        mask = np.ones(self.input_width, dtype=bool)
        if self.mode == "state_space":
            mask[: self.n] = False
            mask[list(self.differenced_states)] = True
        return mask


def assemble_inputs(spec: FeatureSpec, t: int, x: np.ndarray, output_at: SampleAt, input_at: SampleAt) -> np.ndarray:
    """未做差分的一行输入；训练时 output_at 取实际输出，运行时取期望轨迹"""
    if spec.mode == "state_space":
        return np.concatenate((np.asarray(x, dtype=np.float64), [output_at(t + k) for k in spec.preview_offsets]))
    outputs = [output_at(t + spec.r - j) for j in range(spec.n + 1)]
    inputs = [input_at(t - 1 - m) for m in range(spec.n - spec.r)]
    return np.array(outputs + inputs, dtype=np.float64)


def apply_difference(
    inputs: np.ndarray, targets: Optional[np.ndarray], refs: np.ndarray, spec: FeatureSpec
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Δ 变换：输出类列与目标减去每行的 ref(t)"""
    if not spec.difference:
        raise ContractError("apply_difference requires a spec with difference=True")
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64)).copy()
    refs = np.asarray(refs, dtype=np.float64).reshape(-1)
    if refs.shape[0] != inputs.shape[0]:
        raise ContractError(f"{refs.shape[0]} references for {inputs.shape[0]} rows")
    mask = spec.difference_mask()
    inputs[:, mask] -= refs[:, None]
    if targets is None:
        return inputs, None
    targets = np.asarray(targets, dtype=np.float64).reshape(inputs.shape[0], -1) - refs[:, None]
    return inputs, targets


def _log_sampler(values: np.ndarray) -> SampleAt:
    def at(k: int) -> float:
        return float(values[k])

    return at


def build_dataset(log: RunLog, spec: FeatureSpec) -> Dataset:
    """训练阶段：实际输出 y 代替 y_d（该运行实际达到了 y，其逆映射把 y(t+r) 对应回 u(t)）

    缺少完整预览或历史窗口的边界行直接丢弃。
    """
    n_steps = len(log)
    if n_steps <= spec.n + spec.r:
        raise ContractError(f"log of {n_steps} samples is too short for n={spec.n}, r={spec.r}")
    if log.x.shape[1] != spec.n and spec.mode == "state_space":
        raise ContractError(f"log state has {log.x.shape[1]} components, spec expects {spec.n}")
    y_at = _log_sampler(log.y.values)
    u_at = _log_sampler(log.u.values)
    rows = range(spec.history, n_steps - spec.lookahead)
    if len(rows) == 0:
        raise ContractError(f"log of {n_steps} samples leaves no complete feature window")
    inputs = np.array([assemble_inputs(spec, t, log.x[t], y_at, u_at) for t in rows])
    targets = log.u.values[rows.start : rows.stop].copy()
    if spec.difference:
        refs = log.y.values[rows.start : rows.stop]
        inputs, targets = apply_difference(inputs, targets, refs, spec)
    return Dataset(inputs, targets, spec.feature_names)


def sinusoid_family(
    amplitudes: Sequence[float], frequencies_hz: Sequence[float], period: float, steps: int
) -> List[Trajectory]:
    """每个 (幅值, 频率) 组合一条 a·sin(2π f T t)，幅值在外层循环"""
    if len(amplitudes) == 0 or len(frequencies_hz) == 0:
        raise ContractError("amplitude and frequency lists must be nonempty")
    if steps < 1:
        raise ContractError(f"steps must be positive, got {steps}")
    t = np.arange(steps, dtype=np.float64)
    return [
        Trajectory(a * np.sin(2.0 * np.pi * f * period * t), period) for a in amplitudes for f in frequencies_hz
    ]


def balanced_sample(datasets: Sequence[Dataset], per_source: int, seed: int) -> Dataset:
    """每个来源不放回地均匀抽取 per_source 行，按来源顺序拼接"""
    if len(datasets) == 0:
        raise ContractError("no source datasets")
    rng = np.random.default_rng(seed)
    parts = []
    for i, source in enumerate(datasets):
        if len(source) < per_source:
            raise ContractError(f"source {i} has {len(source)} rows, fewer than per_source={per_source}")
        parts.append(source.subset(rng.choice(len(source), size=per_source, replace=False)))
    return Dataset.concat(parts)
