"""Chunked causal softmax attention over the shared normalized representation."""

from dataclasses import dataclass

import numpy as np

from biopars.errors import DimensionError, ParameterError
from biopars.models.tensor import Tensor, matmul, softmax_rows


@dataclass
class OpCounter:
    """Counts multiply-adds spent in attention score and mixing products."""

    multiply_adds: int = 0

    def add(self, rows: int, cols: int, inner: int) -> None:
        self.multiply_adds += rows * cols * inner


def qk_affine(zprime: Tensor, kq: Tensor, mq: Tensor, kk: Tensor, mk: Tensor) -> tuple[Tensor, Tensor]:
    """
    Per-feature scale and shift of the shared representation into queries and keys.

    Example:
        >>> q, k = qk_affine(np.array([[0.6, 0.8]]), np.array([2.0, 1.0]), np.array([0.0, 1.0]), np.ones(2), np.zeros(2))
        >>> q
        array([[1.2, 1.8]])
    """
    z = zprime.shape[-1]
    for name, arr in (("kq", kq), ("mq", mq), ("kk", kk), ("mk", mk)):
        if arr.shape != (z,):
            raise DimensionError(f"{name} has shape {arr.shape}, expected ({z},)")
    return kq * zprime + mq, kk * zprime + mk


def causal_mask(size: int) -> np.ndarray:
    return np.tril(np.ones((size, size), dtype=bool))


def _chunks(n: int, c: int):
    for start in range(0, n, c):
        yield start, min(start + c, n)


def _check_attention_inputs(q: Tensor, k: Tensor, v: Tensor, c: int) -> None:
    if c < 1:
        raise ParameterError(f"chunk length must be >= 1, got {c}")
    if q.shape != k.shape:
        raise DimensionError(f"queries {q.shape} and keys {k.shape} differ in shape")
    if v.shape[0] != q.shape[0]:
        raise DimensionError(f"values have {v.shape[0]} rows, queries have {q.shape[0]}")


def _chunk_probs(qc: Tensor, kc: Tensor, causal: bool) -> Tensor:
    scores = matmul(qc, kc.T)
    if causal:
        scores = np.where(causal_mask(scores.shape[0]), scores, -np.inf)
    return softmax_rows(scores)


def chunked_causal_attention(
    q: Tensor, k: Tensor, v: Tensor, c: int, causal: bool = True, counter: OpCounter | None = None
) -> Tensor:
    """
    Softmax attention restricted to non-overlapping chunks of length c.

    No 1/sqrt(z) scale is applied: the rows of Z' are unit vectors already.

    Args:
        q: Queries (n, z)
        k: Keys (n, z)
        v: Values (n, v)
        c: Chunk length; the last chunk may be shorter
        causal: Mask keys that come after the query inside a chunk
        counter: Optional multiply-add counter

    Returns:
        Attention output (n, v)
    """
    _check_attention_inputs(q, k, v, c)
    out = np.zeros((q.shape[0], v.shape[1]))
    for start, end in _chunks(q.shape[0], c):
        probs = _chunk_probs(q[start:end], k[start:end], causal)
        out[start:end] = matmul(probs, v[start:end])
        if counter is not None:
            size = end - start
            counter.add(size, size, q.shape[1])
            counter.add(size, v.shape[1], size)
    return out


def chunked_attention_backward(
    q: Tensor, k: Tensor, v: Tensor, c: int, causal: bool, grad_out: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients with respect to q, k and v, chunk by chunk."""
    g_q, g_k, g_v = np.zeros(q.shape), np.zeros(k.shape), np.zeros(v.shape)
    for start, end in _chunks(q.shape[0], c):
        qc, kc, vc, gc = q[start:end], k[start:end], v[start:end], grad_out[start:end]
        probs = _chunk_probs(qc, kc, causal)
        g_probs = gc @ vc.T
        g_scores = probs * (g_probs - np.sum(g_probs * probs, axis=1, keepdims=True))
        g_v[start:end] = probs.T @ gc
        g_q[start:end] = g_scores @ kc
        g_k[start:end] = g_scores.T @ qc
    return g_q, g_k, g_v
