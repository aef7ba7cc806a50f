from typing import List, Tuple

import numpy as np

from ..errors import ZeroTransferFunctionError
from .models import LtiStateSpace, TransferFunctionModel

# 分子前导系数小于该相对阈值视为零
NUMERATOR_RTOL = 1e-12


def faddeev_leverrier(A: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """返回特征多项式降幂系数 [1, p_1, ..., p_n] 以及 adj(zI - A) = Σ z^{n-1-j} B_j 的 B_j"""
    n = A.shape[0]
    eye = np.eye(n)
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    adjugate_terms = [eye]
    B = eye
    for j in range(1, n + 1):
        AB = A @ B
        coeffs[j] = -np.trace(AB) / j
        if j < n:
            B = AB + coeffs[j] * eye
            adjugate_terms.append(B)
    return coeffs, adjugate_terms


def ss_to_tf(sys: LtiStateSpace) -> TransferFunctionModel:
    den, terms = faddeev_leverrier(sys.A)
    # 分子 c adj(zI-A) b 的降幂系数，长度 n
    num = np.array([sys.c @ B @ sys.b for B in terms])
    scale = max(1.0, float(np.max(np.abs(num))))
    nonzero = np.flatnonzero(np.abs(num) > NUMERATOR_RTOL * scale)
    if nonzero.size == 0:
        raise ZeroTransferFunctionError()
    num = num[nonzero[0]:]
    return TransferFunctionModel(alpha=den[1:][::-1], beta=num[::-1])


def tf_to_ss(tf: TransferFunctionModel) -> LtiStateSpace:
    """可控标准型：b = [0, ..., 0, 1]^T，A 末行为 -α"""
    n = tf.n
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -tf.alpha
    b = np.zeros(n)
    b[-1] = 1.0
    c = np.zeros(n)
    c[: tf.beta.shape[0]] = tf.beta
    return LtiStateSpace(A=A, b=b, c=c)
