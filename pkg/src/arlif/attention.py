"""Single query/key/value attention layer over the T x k history matrix.

Exactly 3*k*(k+1) trainable scalars: three affine maps k -> k. The forward
pass keeps every intermediate in a cache; the backward pass is
hand-differentiated (readout mean -> E = A.V -> row softmax -> 1/sqrt(k)
scaled logits -> the affine maps) and is verified against central finite
differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, StaleCache

EPS = 1e-6


def param_count(k: int) -> int:
    """Trainable scalars in the layer: 3 affine maps of k*(k+1) each."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 3 * k * (k + 1)


@dataclass
class AttentionParams:
    Wq: np.ndarray
    Wk: np.ndarray
    Wv: np.ndarray
    bq: np.ndarray
    bk: np.ndarray
    bv: np.ndarray
    k: int

    def blocks(self) -> tuple[np.ndarray, ...]:
        return (self.Wq, self.Wk, self.Wv, self.bq, self.bk, self.bv)

    def n_scalars(self) -> int:
        return sum(b.size for b in self.blocks())


def init_params(k: int, seed: int, scale: float = 0.01) -> AttentionParams:
    """Wv = identity, biases zero, Wq/Wk uniform in [-scale, scale].

    scale = 0 gives exactly-zero logits, i.e. uniform attention on the
    first forward pass.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    rng = np.random.default_rng(seed)
    return AttentionParams(
        Wq=rng.uniform(-scale, scale, (k, k)),
        Wk=rng.uniform(-scale, scale, (k, k)),
        Wv=np.eye(k),
        bq=np.zeros(k),
        bk=np.zeros(k),
        bv=np.zeros(k),
        k=k,
    )


def softmax_rows(M: np.ndarray) -> np.ndarray:
    """Row-wise exp-normalization with max subtraction for stability."""
    M = np.asarray(M, dtype=np.float64)
    shifted = M - M.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ForwardCache:
    H: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    A: np.ndarray
    E: np.ndarray
    r: float
    s: float


def forward(params: AttentionParams, H) -> tuple[float, ForwardCache]:
    """Score the current history matrix.

    Q/K/V are affine images of H, A = softmax_rows(Q.K^T / sqrt(k)),
    E = A.V; the readout is the mean over trees of E's most-recent column,
    clamped into [EPS, 1 - EPS].
    """
    H = np.array(H, dtype=np.float64)  # snapshot: the caller's buffer may mutate
    if H.ndim != 2 or H.shape[0] < 1:
        raise DimensionMismatch(f"H must be a T x k matrix, got shape {H.shape}")
    if H.shape[1] != params.k:
        raise DimensionMismatch(f"H has {H.shape[1]} columns, params expect k={params.k}")
    Q = H @ params.Wq + params.bq
    K = H @ params.Wk + params.bk
    V = H @ params.Wv + params.bv
    A = softmax_rows(Q @ K.T / math.sqrt(params.k))
    E = A @ V
    r = float(E[:, -1].mean())
    s = min(max(r, EPS), 1.0 - EPS)
    return s, ForwardCache(H=H, Q=Q, K=K, V=V, A=A, E=E, r=r, s=s)


def bce_loss(s: float, label: int) -> float:
    """Binary cross-entropy against a {0,1} label; s must be in (0,1)."""
    return -(label * math.log(s) + (1 - label) * math.log(1.0 - s))


def _zero_grads(params: AttentionParams) -> AttentionParams:
    k = params.k
    return AttentionParams(
        Wq=np.zeros((k, k)), Wk=np.zeros((k, k)), Wv=np.zeros((k, k)),
        bq=np.zeros(k), bk=np.zeros(k), bv=np.zeros(k), k=k,
    )


def backward(params: AttentionParams, cache: ForwardCache, label: int) -> AttentionParams:
    """Gradients of BCE(score, label) w.r.t. all six parameter blocks.

    Returns an AttentionParams holding the gradients. The gradient is zero
    whenever the readout was clamped (s != r).
    """
    if cache.H.shape[1] != params.k or cache.Q.shape != cache.H.shape:
        raise StaleCache(
            f"cache built for k={cache.H.shape[1]}, params expect k={params.k}"
        )
    if cache.s != cache.r:
        return _zero_grads(params)
    H, Q, K, V, A, E = cache.H, cache.Q, cache.K, cache.V, cache.A, cache.E
    T, k = H.shape
    s, y = cache.s, label
    g = (s - y) / (s * (1.0 - s))  # dL/ds

    dE = np.zeros_like(E)
    dE[:, -1] = g / T  # readout touches only the most-recent column

    dV = A.T @ dE
    dA = dE @ V.T
    # row-wise softmax Jacobian: dz_j = a_j * (dA_j - <dA_j, a_j>)
    dlogits = A * (dA - (dA * A).sum(axis=1, keepdims=True))
    dlogits /= math.sqrt(k)
    dQ = dlogits @ K
    dK = dlogits.T @ Q

    return AttentionParams(
        Wq=H.T @ dQ,
        Wk=H.T @ dK,
        Wv=H.T @ dV,
        bq=dQ.sum(axis=0),
        bk=dK.sum(axis=0),
        bv=dV.sum(axis=0),
        k=k,
    )


def sgd_step(params: AttentionParams, grads: AttentionParams, eta: float) -> AttentionParams:
    """Plain SGD: p <- p - eta * g, in place; returns params."""
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    if grads.k != params.k:
        raise DimensionMismatch(f"gradient k={grads.k} vs params k={params.k}")
    params.Wq -= eta * grads.Wq
    params.Wk -= eta * grads.Wk
    params.Wv -= eta * grads.Wv
    params.bq -= eta * grads.bq
    params.bk -= eta * grads.bk
    params.bv -= eta * grads.bv
    return params
