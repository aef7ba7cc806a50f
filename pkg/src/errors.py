from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .plant.models import RunLog


class TrackerError(Exception):
    """工具包内所有可预期错误的基类"""


class ContractError(TrackerError, ValueError):
    """前置条件或维度不满足"""


class DivergenceError(TrackerError):
    def __init__(self, step: int, message: str, log: Optional["RunLog"] = None) -> None:
        super().__init__(f"simulation diverged at step {step}: {message}")
        self.step = step
        self.log = log


class ZeroTransferFunctionError(TrackerError):
    def __init__(self) -> None:
        super().__init__("zero transfer function")


class RelativeDegreeError(TrackerError):
    pass


class DcGainUndefinedError(TrackerError):
    def __init__(self) -> None:
        super().__init__("DC gain undefined (integrator)")


class TrainingDivergedError(TrackerError):
    def __init__(self, iteration: int, lam: float) -> None:
        super().__init__(f"training diverged at iteration {iteration} (lambda={lam:.3e})")
        self.iteration = iteration
        self.lam = lam


class ConfigError(TrackerError):
    pass
