from .models import LtiStateSpace, NonlinearSystem, RunLog, Trajectory, TransferFunctionModel
from .simulation import System, simulate, step_lti
from .conversion import ss_to_tf, tf_to_ss

__all__ = [
    "LtiStateSpace",
    "NonlinearSystem",
    "RunLog",
    "Trajectory",
    "TransferFunctionModel",
    "System",
    "simulate",
    "step_lti",
    "ss_to_tf",
    "tf_to_ss",
]
