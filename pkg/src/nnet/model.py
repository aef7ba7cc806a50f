import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import ContractError
from ..plant.models import CSV_FLOAT_FORMAT

Activation = Literal["tanh", "relu", "linear"]
ACTIVATIONS = ("tanh", "relu", "linear")
TARGET_COLUMN = "target_u"


def _activate(kind: str, a: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(a)
    if kind == "relu":
        return np.maximum(a, 0.0)
    return a


def _activate_prime(kind: str, a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """z 为该层激活后的输出，tanh 的导数直接由 z 计算"""
    if kind == "tanh":
        return 1.0 - z * z
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    return np.ones_like(a)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        targets = np.asarray(self.targets, dtype=np.float64)
        if targets.ndim == 1:
            targets = targets[:, None]
        if inputs.shape[0] != targets.shape[0]:
            raise ContractError(f"dataset has {inputs.shape[0]} input rows but {targets.shape[0]} target rows")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ContractError("dataset contains non-finite entries")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(inputs.shape[1]))
        if len(names) != inputs.shape[1]:
            raise ContractError(f"{len(names)} feature names for {inputs.shape[1]} input columns")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def subset(self, index: np.ndarray) -> "Dataset":
        return Dataset(self.inputs[index], self.targets[index], self.feature_names)

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise ContractError("cannot concatenate zero datasets")
        return cls(
            np.vstack([p.inputs for p in parts]),
            np.vstack([p.targets for p in parts]),
            parts[0].feature_names,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.inputs, columns=list(self.feature_names))
        frame[TARGET_COLUMN] = self.targets[:, 0]
        return frame

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        return path

    @classmethod
    def from_csv(cls, path: str | Path) -> "Dataset":
        frame = pd.read_csv(path, float_precision="round_trip")
        names = [c for c in frame.columns if c != TARGET_COLUMN]
        return cls(frame[names].to_numpy(), frame[TARGET_COLUMN].to_numpy(), tuple(names))


@dataclass(frozen=True)
class FnnModel:
    """全连接前馈网络，权重按 (fan_in, fan_out) 存放；标准化参数随模型保存

    输入先做 (x - input_shift) * input_scale，输出再做 output_shift + output_scale * z。
    训练集中方差为零的输入列 input_scale 为 0，该特征在推理时不起作用。
    """

    layer_sizes: Tuple[int, ...]
    activations: Tuple[str, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    input_shift: Optional[np.ndarray] = None
    input_scale: Optional[np.ndarray] = None
    output_shift: Optional[np.ndarray] = None
    output_scale: Optional[np.ndarray] = None
    _shapes: Tuple[Tuple[int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ContractError(f"invalid layer sizes {sizes}")
        acts = tuple(self.activations)
        if len(acts) != len(sizes) - 1 or any(a not in ACTIVATIONS for a in acts):
            raise ContractError(f"need {len(sizes) - 1} activations from {ACTIVATIONS}, got {acts}")
        if acts[-1] != "linear":
            raise ContractError("output layer activation must be linear")
        shapes = tuple(zip(sizes[:-1], sizes[1:]))
        weights = tuple(np.array(w, dtype=np.float64).reshape(s) for w, s in zip(self.weights, shapes, strict=True))
        biases = tuple(np.array(b, dtype=np.float64).reshape(s[1]) for b, s in zip(self.biases, shapes, strict=True))
        d_in, d_out = sizes[0], sizes[-1]
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "_shapes", shapes)
        for name, default, size in (
            ("input_shift", 0.0, d_in),
            ("input_scale", 1.0, d_in),
            ("output_shift", 0.0, d_out),
            ("output_scale", 1.0, d_out),
        ):
            value = getattr(self, name)
            arr = np.full(size, default) if value is None else np.array(value, dtype=np.float64).reshape(size)
            object.__setattr__(self, name, arr)

    @classmethod
    def initialize(
        cls,
        layer_sizes: Sequence[int],
        activations: Sequence[str],
        seed: int,
    ) -> "FnnModel":
        """Glorot 均匀初始化，偏置为零"""
        rng = np.random.default_rng(seed)
        weights: List[np.ndarray] = []
        biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_sizes), tuple(activations), tuple(weights), tuple(biases))

    @classmethod
    def hidden(cls, input_dim: int, hidden: Sequence[int], activation: str, seed: int, output_dim: int = 1) -> "FnnModel":
        sizes = (input_dim, *hidden, output_dim)
        return cls.initialize(sizes, (activation,) * len(hidden) + ("linear",), seed)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self._shapes)

    def parameters(self) -> np.ndarray:
        """逐层展开：W.ravel() 后接 b"""
        return np.concatenate([np.concatenate((w.ravel(), b)) for w, b in zip(self.weights, self.biases)])

    def with_parameters(self, theta: np.ndarray) -> "FnnModel":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ContractError(f"expected {self.n_params} parameters, got {theta.shape}")
        weights, biases = [], []
        pos = 0
        for fan_in, fan_out in self._shapes:
            weights.append(theta[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out))
            pos += fan_in * fan_out
            biases.append(theta[pos : pos + fan_out])
            pos += fan_out
        return replace(self, weights=tuple(weights), biases=tuple(biases))

    def with_standardization(self, dataset: Dataset) -> "FnnModel":
        in_mean = dataset.inputs.mean(axis=0)
        in_std = dataset.inputs.std(axis=0)
        in_scale = np.divide(1.0, in_std, out=np.zeros_like(in_std), where=in_std > 0.0)
        out_mean = dataset.targets.mean(axis=0)
        out_std = dataset.targets.std(axis=0)
        out_scale = np.where(out_std > 0.0, out_std, 1.0)
        return replace(
            self,
            input_shift=in_mean,
            input_scale=in_scale,
            output_shift=out_mean,
            output_scale=out_scale,
        )

    def _propagate(self, inputs: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """返回每层的预激活 A_l 与激活输出 Z_l（Z_0 为标准化后的输入）"""
        z = (inputs - self.input_shift) * self.input_scale
        pre: List[np.ndarray] = []
        post: List[np.ndarray] = [z]
        for w, b, kind in zip(self.weights, self.biases, self.activations):
            a = z @ w + b
            z = _activate(kind, a)
            pre.append(a)
            post.append(z)
        return pre, post

    def forward_batch(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if inputs.shape[1] != self.input_dim:
            raise ContractError(f"input has {inputs.shape[1]} features, network expects {self.input_dim}")
        _, post = self._propagate(inputs)
        return self.output_shift + self.output_scale * post[-1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ContractError(f"input has shape {x.shape}, network expects ({self.input_dim},)")
        return self.forward_batch(x[None, :])[0]

    def lipschitz_bound(self) -> float:
        """各层权重谱范数之积（tanh/relu 斜率不超过 1），再乘标准化的缩放"""
        bound = float(np.max(np.abs(self.input_scale))) * float(np.max(np.abs(self.output_scale)))
        for w in self.weights:
            bound *= float(np.linalg.norm(w, 2))
        return bound

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "activations": list(self.activations),
            "input_shift": self.input_shift.tolist(),
            "input_scale": self.input_scale.tolist(),
            "output_shift": self.output_shift.tolist(),
            "output_scale": self.output_scale.tolist(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FnnModel":
        try:
            return cls(
                layer_sizes=tuple(data["layer_sizes"]),
                activations=tuple(data["activations"]),
                weights=tuple(np.array(w) for w in data["weights"]),
                biases=tuple(np.array(b) for b in data["biases"]),
                input_shift=np.array(data["input_shift"]),
                input_scale=np.array(data["input_scale"]),
                output_shift=np.array(data["output_shift"]),
                output_scale=np.array(data["output_scale"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ContractError(f"malformed model description: {e}") from e

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "FnnModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def forward(net: FnnModel, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def residuals(net: FnnModel, dataset: Dataset) -> np.ndarray:
    """按样本优先展开的残差 forward(x_i) - t_i"""
    return (net.forward_batch(dataset.inputs) - dataset.targets).ravel()


def mse(net: FnnModel, dataset: Dataset) -> float:
    e = residuals(net, dataset)
    return float(e @ e) / len(dataset)


def gradient(net: FnnModel, dataset: Dataset) -> np.ndarray:
    """(1/N) Σ ||forward(x_i) - t_i||^2 对展开参数的精确反向传播梯度"""
    if len(dataset) == 0:
        raise ContractError("dataset is empty")
    pre, post = net._propagate(dataset.inputs)
    out = net.output_shift + net.output_scale * post[-1]
    delta = (2.0 / len(dataset)) * (out - dataset.targets) * net.output_scale
    grads: List[np.ndarray] = []
    for layer in range(len(net.weights) - 1, -1, -1):
        grads.append(np.concatenate(((post[layer].T @ delta).ravel(), delta.sum(axis=0))))
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * _activate_prime(
                net.activations[layer - 1], pre[layer - 1], post[layer]
            )
    return np.concatenate(grads[::-1])


def jacobian(net: FnnModel, dataset: Dataset) -> np.ndarray:
    """每个 (样本, 输出) 残差对展开参数的导数，行序与 residuals 一致"""
    if len(dataset) == 0:
        raise ContractError("dataset is empty")
    pre, post = net._propagate(dataset.inputs)
    n_samples, n_out = len(dataset), net.output_dim
    jac = np.empty((n_samples, n_out, net.n_params))
    for k in range(n_out):
        delta = np.zeros((n_samples, n_out))
        delta[:, k] = net.output_scale[k]
        blocks: List[np.ndarray] = []
        for layer in range(len(net.weights) - 1, -1, -1):
            z = post[layer]
            dw = (z[:, :, None] * delta[:, None, :]).reshape(n_samples, -1)
            blocks.append(np.hstack((dw, delta)))
            if layer > 0:
                delta = (delta @ net.weights[layer].T) * _activate_prime(
                    net.activations[layer - 1], pre[layer - 1], post[layer]
                )
        jac[:, k, :] = np.hstack(blocks[::-1])
    return jac.reshape(n_samples * n_out, net.n_params)
